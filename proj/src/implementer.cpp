#include "execforge/implementer.hpp"

#include <sstream>
#include <stdexcept>
#include <thread>

#include "execforge/hash.hpp"
#include "execforge/zips.hpp"
#include "json.hpp"

namespace execforge {

namespace {

std::string render_tree(const FileTree& tree) {
    std::ostringstream ss;
    for (const auto& [path, content] : tree) {
        ss << "== " << path << " ==\n" << content;
        if (content.empty() || content.back() != '\n') ss << "\n";
    }
    return ss.str();
}

std::string propose_prompt_text(const Idea& idea, const FileTree& baseline, int k) {
    std::ostringstream ss;
    ss << "Implement this research idea as a unified diff against the baseline codebase.\n"
       << "Idea: " << idea.idea_text << "\n"
       << "Baseline codebase:\n"
       << render_tree(baseline) << "Output " << k << " candidate diffs, one per sample.\n";
    return ss.str();
}

}  // namespace

std::vector<std::string> propose_diffs(const Idea& idea, const FileTree& baseline, int k,
                                       ModelEndpoint& endpoint) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (baseline.empty()) throw std::invalid_argument("baseline tree is empty");
    ModelRequest req;
    req.prompt = propose_prompt_text(idea, baseline, k);
    req.n_samples = k;
    auto comps = endpoint.generate(req);
    std::vector<std::string> out;
    out.reserve(k);
    for (const auto& c : comps) out.push_back(c.body_text);
    return out;
}

std::string revise_diff(const Idea& idea, const FileTree& baseline,
                        const std::string& failed_diff, const std::string& patch_log,
                        ModelEndpoint& endpoint) {
    if (patch_log.empty()) throw std::invalid_argument("patch_log must be nonempty");
    std::ostringstream ss;
    ss << "Your previous diff failed to apply. Revise it.\n"
       << "Idea: " << idea.idea_text << "\n"
       << "Failed diff:\n"
       << failed_diff << "\nPatch log:\n"
       << patch_log << "\nBaseline codebase:\n"
       << render_tree(baseline) << "Output one corrected unified diff.\n";
    ModelRequest req;
    req.prompt = ss.str();
    req.n_samples = 1;
    return endpoint.generate(req)[0].body_text;
}

namespace {

struct Pipeline {
    int index = 0;
    bool succeeded = false;  // produced an applied, guard-passing tree
    std::string diff;
    std::string patch_log;   // from the latest failed attempt
    FileTree tree;           // set on success
};

// One apply attempt for a pipeline; updates its success/log state.
void attempt(Pipeline& p, const FileTree& baseline, const Environment& env) {
    PatchOutcome out = apply_patch(baseline, p.diff);
    if (!out.applied) {
        p.patch_log = out.patch_log;
        return;
    }
    GuardResult guard = guard_frozen_paths(p.diff, env);
    if (!guard.ok) {
        std::string paths;
        for (const auto& v : guard.violations) paths += (paths.empty() ? "" : ", ") + v;
        p.patch_log = "guard violation: frozen path modified: " + paths;
        return;
    }
    p.succeeded = true;
    p.tree = std::move(*out.patched_tree);
}

}  // namespace

ImplementResult implement_idea(const Idea& idea, const FileTree& baseline,
                               const Environment& env, const ImplementerConfig& cfg,
                               ModelEndpoint& endpoint, ArtifactStore& store,
                               const std::string& artifact_key) {
    if (cfg.k_parallel < 1 || cfg.max_revisions < 0)
        throw std::invalid_argument("bad implementer config");

    ImplementResult result;
    auto candidates = propose_diffs(idea, baseline, cfg.k_parallel, endpoint);

    std::vector<Pipeline> pipes(cfg.k_parallel);
    for (int i = 0; i < cfg.k_parallel; ++i) {
        pipes[i].index = i;
        pipes[i].diff = candidates[i];
    }

    const Pipeline* winner = nullptr;
    for (int round = 0; round <= cfg.max_revisions && !winner; ++round) {
        // Revision rounds fetch a corrected diff first (sequential within a
        // pipeline, concurrent across pipelines).
        if (round > 0) {
            std::vector<std::thread> fetchers;
            for (auto& p : pipes) {
                fetchers.emplace_back([&p, &idea, &baseline, &endpoint] {
                    p.diff = revise_diff(idea, baseline, p.diff, p.patch_log, endpoint);
                });
            }
            for (auto& t : fetchers) t.join();
        }

        std::vector<std::thread> appliers;
        for (auto& p : pipes) {
            ++result.apply_attempts;
            appliers.emplace_back([&p, &baseline, &env] { attempt(p, baseline, env); });
        }
        for (auto& t : appliers) t.join();

        // Join barrier: lowest successful index wins; everyone else is
        // cancelled. With lockstep rounds all pipelines exhaust together.
        for (const auto& p : pipes) {
            if (p.succeeded) {
                winner = &p;
                break;
            }
        }
    }

    if (!winner) {
        std::ostringstream log;
        log << "all " << cfg.k_parallel << " candidates failed after "
            << result.apply_attempts << " apply attempts; last logs:\n";
        for (const auto& p : pipes) log << "  #" << p.index << ": " << p.patch_log << "\n";
        result.failure_log = log.str();
        return result;
    }

    result.success = true;
    result.winner_index = winner->index;
    result.winning_diff = winner->diff;
    std::string zip_bytes = zip_pack(winner->tree);
    result.digest = store.put(artifact_key, zip_bytes);
    result.codebase_key = artifact_key;

    nlohmann::ordered_json meta;
    meta["idea_id"] = idea.id;
    meta["idea_text"] = idea.idea_text;
    meta["diff"] = winner->diff;
    meta["env_id"] = env.env_id;
    store.put(artifact_key + ".meta.json", meta.dump(2) + "\n");
    return result;
}

}  // namespace execforge
