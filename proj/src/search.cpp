#include "execforge/search.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace execforge {

namespace {

constexpr std::uint64_t kExecSalt = 0x6578656373616c74ULL;
constexpr std::uint64_t kSubsampleSalt = 0x7375627373616c74ULL;

// Prompt scaffolding. The embedded-line formats are load-bearing: tests and
// mock ideators parse them back out of prompt text.
constexpr const char* kExploitHeader =
    "These ideas beat the baseline. Combine their strengths into improved variants.";
constexpr const char* kExploreHeader =
    "Propose completely new ideas different from all of these prior ideas.";
constexpr const char* kFreshHeader = "Propose fresh ideas for the environment.";

std::string exploit_line(const Trajectory& t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", t.reward);
    return std::string("- reward ") + buf + ": " + t.idea.idea_text + "\n";
}

std::string explore_line(const Trajectory& t) { return "- " + t.idea.idea_text + "\n"; }

std::string idea_id(const char* prefix, long epoch, long slot) {
    return std::string(prefix) + std::to_string(epoch) + "-i" + std::to_string(slot);
}

}  // namespace

double SearchConfig::rate_at(long t) const {
    if (schedule_kind == "constant") return a1;
    if (schedule_kind == "linear")
        return std::min(schedule_cap, a1 + schedule_step * static_cast<double>(t - 1));
    throw std::invalid_argument("unknown schedule kind: " + schedule_kind);
}

void SearchConfig::validate() const {
    if (N < 1) throw std::invalid_argument("N must be >= 1");
    if (T < 0) throw std::invalid_argument("T must be >= 0");
    if (context_budget_chars < 1) throw std::invalid_argument("context budget must be positive");
    if (schedule_kind == "linear" && schedule_step < 0)
        throw std::invalid_argument("schedule must be non-decreasing");
    for (long t = 1; t <= std::max(T, 1L); ++t) {
        double a = rate_at(t);
        if (a < 0.0 || a > 100.0)
            throw std::invalid_argument("a(t) out of [0,100] at t=" + std::to_string(t));
    }
}

std::pair<long, long> split_budget(double a, long n) {
    if (a < 0.0 || a > 100.0) throw std::invalid_argument("rate out of [0,100]");
    long n_exp = static_cast<long>(std::floor(a * static_cast<double>(n) / 100.0));
    return {n_exp, n - n_exp};
}

std::vector<Trajectory> select_positive(const std::vector<Trajectory>& trajs, double beta) {
    std::vector<Trajectory> out;
    for (const auto& t : trajs)
        if (t.reward > beta) out.push_back(t);
    return out;
}

std::optional<ExploitPrompt> exploit_prompt(const std::vector<Trajectory>& d_plus, long n,
                                            long context_budget_chars) {
    if (d_plus.empty()) return std::nullopt;

    std::vector<const Trajectory*> ranked;
    ranked.reserve(d_plus.size());
    for (const auto& t : d_plus) ranked.push_back(&t);
    std::stable_sort(ranked.begin(), ranked.end(), [](const Trajectory* a, const Trajectory* b) {
        if (a->reward != b->reward) return a->reward > b->reward;
        if (a->epoch != b->epoch) return a->epoch < b->epoch;
        return a->idea.id < b->idea.id;
    });

    std::string body;
    std::vector<std::string> parent_ids;
    long used = 0;
    for (const Trajectory* t : ranked) {
        std::string line = exploit_line(*t);
        if (used + static_cast<long>(line.size()) > context_budget_chars) break;
        used += static_cast<long>(line.size());
        body += line;
        parent_ids.push_back(t->idea.id);
    }
    if (parent_ids.empty()) return std::nullopt;  // nothing fits: exploit is meaningless

    std::ostringstream prompt;
    prompt << kExploitHeader << "\n"
           << body << "Propose " << n << " new variant ideas, one per line.\n";

    ExploitPrompt out;
    out.request.prompt = prompt.str();
    out.request.n_samples = static_cast<int>(n);
    out.parent_ids = std::move(parent_ids);
    return out;
}

std::vector<Trajectory> subsample_to_context(const std::vector<Trajectory>& trajs,
                                             long budget_chars, std::uint64_t seed) {
    if (budget_chars <= 0) throw std::invalid_argument("budget must be positive");
    std::vector<std::size_t> order(trajs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<Trajectory> out;
    long used = 0;
    for (std::size_t idx : order) {
        long cost = static_cast<long>(explore_line(trajs[idx]).size());
        if (used + cost > budget_chars) break;
        used += cost;
        out.push_back(trajs[idx]);
    }
    return out;
}

ModelRequest explore_prompt(const std::vector<Trajectory>& subset, long n) {
    std::ostringstream prompt;
    if (subset.empty()) {
        prompt << kFreshHeader << "\n";
    } else {
        prompt << kExploreHeader << "\n";
        for (const auto& t : subset) prompt << explore_line(t);
    }
    prompt << "Propose " << n << " ideas, one per line.\n";

    ModelRequest req;
    req.prompt = prompt.str();
    req.n_samples = static_cast<int>(n);
    return req;
}

namespace {

Trajectory execute_idea(const Idea& idea, long epoch, ExecutionBackend& backend,
                        const Environment& env, std::uint64_t seed, long& tick) {
    Timestamps ts;
    ts.created = tick++;
    ExecutionResultLite res = backend.run(idea, seed);
    ts.completed = tick++;
    double reward = evaluate(env, res.metrics, res.status).value;
    Trajectory traj =
        make_trajectory(idea, epoch, res.status, std::move(res.metrics), reward,
                        std::move(res.execution_log));
    traj.timestamps = ts;
    return traj;
}

}  // namespace

SearchResult run_search(const SearchConfig& cfg, ModelEndpoint& ideator,
                        ExecutionBackend& backend, const Environment& env) {
    cfg.validate();
    SearchResult out;
    std::vector<Trajectory> all;
    long tick = 0;

    for (long t = 0; t <= cfg.T; ++t) {
        std::vector<Idea> ideas;
        ideas.reserve(cfg.N);

        if (t == 0) {
            ModelRequest req = explore_prompt({}, cfg.N);
            auto comps = ideator.generate(req);
            out.prompts.push_back({t, IdeaSource::sampled, req.prompt, {}});
            for (long j = 0; j < cfg.N; ++j)
                ideas.push_back(make_idea(idea_id("e", t, j), comps[j].body_text,
                                          comps[j].thinking_text, IdeaSource::sampled, {}));
        } else {
            auto [n_exp, n_expl] = split_budget(cfg.rate_at(t), cfg.N);
            auto d_plus = select_positive(all, cfg.beta);
            std::optional<ExploitPrompt> ep;
            if (n_exp > 0) ep = exploit_prompt(d_plus, n_exp, cfg.context_budget_chars);
            if (!ep) {
                // Empty (or unusable) positive set: the whole batch explores.
                n_exp = 0;
                n_expl = cfg.N;
            }
            long j = 0;
            if (ep) {
                auto comps = ideator.generate(ep->request);
                out.prompts.push_back({t, IdeaSource::exploit, ep->request.prompt,
                                       ep->parent_ids});
                for (long k = 0; k < n_exp; ++k, ++j)
                    ideas.push_back(make_idea(idea_id("e", t, j), comps[k].body_text,
                                              comps[k].thinking_text, IdeaSource::exploit,
                                              ep->parent_ids));
            }
            if (n_expl > 0) {
                auto subset = subsample_to_context(all, cfg.context_budget_chars,
                                                   derive_seed(cfg.seed ^ kSubsampleSalt, t));
                ModelRequest req = explore_prompt(subset, n_expl);
                auto comps = ideator.generate(req);
                out.prompts.push_back({t, IdeaSource::explore, req.prompt, {}});
                for (long k = 0; k < n_expl; ++k, ++j)
                    ideas.push_back(make_idea(idea_id("e", t, j), comps[k].body_text,
                                              comps[k].thinking_text, IdeaSource::explore, {}));
            }
        }

        for (long j = 0; j < static_cast<long>(ideas.size()); ++j)
            all.push_back(execute_idea(ideas[j], t, backend, env,
                                       derive_seed(cfg.seed ^ kExecSalt, t, j), tick));
    }

    out.trajectories = std::move(all);
    return out;
}

std::vector<Trajectory> best_of_n(ModelEndpoint& ideator, ExecutionBackend& backend,
                                  const Environment& env, long n, std::uint64_t seed) {
    std::vector<Trajectory> out;
    if (n <= 0) return out;
    ModelRequest req = explore_prompt({}, n);
    auto comps = ideator.generate(req);
    long tick = 0;
    for (long j = 0; j < n; ++j) {
        Idea idea = make_idea(idea_id("b", 0, j), comps[j].body_text, comps[j].thinking_text,
                              IdeaSource::sampled, {});
        out.push_back(execute_idea(idea, 0, backend, env, derive_seed(seed ^ kExecSalt, 0, j),
                                   tick));
    }
    return out;
}

std::vector<std::pair<long, double>> epoch_best(const std::vector<Trajectory>& trajs) {
    std::vector<std::pair<long, double>> per_epoch;  // max within each epoch
    for (const auto& t : trajs) {
        auto it = std::find_if(per_epoch.begin(), per_epoch.end(),
                               [&](const auto& p) { return p.first == t.epoch; });
        if (it == per_epoch.end())
            per_epoch.emplace_back(t.epoch, t.reward);
        else
            it->second = std::max(it->second, t.reward);
    }
    std::sort(per_epoch.begin(), per_epoch.end());
    double best = 0.0;
    for (auto& [epoch, r] : per_epoch) {
        best = std::max(best, r);
        r = best;
    }
    return per_epoch;
}

std::vector<Completion> LatticeMutationIdeator::generate(const ModelRequest& req) {
    bool is_exploit = req.prompt.find(kExploitHeader) != std::string::npos;

    std::vector<std::vector<int>> parents;
    if (is_exploit) {
        std::size_t pos = 0;
        while ((pos = req.prompt.find("set x=(", pos)) != std::string::npos) {
            if (auto coords = spec_.parse_idea(req.prompt.substr(pos))) parents.push_back(*coords);
            pos += 7;
        }
    }

    std::vector<Completion> out;
    out.reserve(req.n_samples);
    for (int s = 0; s < req.n_samples; ++s) {
        std::vector<int> coords;
        if (is_exploit && !parents.empty()) {
            coords = parents[rng_.next_index(parents.size())];
            int dim = static_cast<int>(rng_.next_index(coords.size()));
            int delta = rng_.next_unit() < 0.5 ? -1 : 1;
            int moved = coords[dim] + delta;
            if (moved < spec_.coord_min || moved > spec_.coord_max) moved = coords[dim] - delta;
            coords[dim] = moved;
        } else {
            for (int d = 0; d < spec_.dimension; ++d)
                coords.push_back(rng_.next_int(spec_.coord_min, spec_.coord_max));
        }
        out.push_back({std::nullopt, spec_.idea_for(coords)});
    }
    return out;
}

}  // namespace execforge
