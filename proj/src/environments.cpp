#include "execforge/environments.hpp"

#include <fnmatch.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "execforge/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace execforge {

namespace {

RewardKind reward_kind_from_string(const std::string& s) {
    if (s == "accuracy") return RewardKind::accuracy;
    if (s == "reciprocal_loss") return RewardKind::reciprocal_loss;
    if (s == "synthetic") return RewardKind::synthetic;
    throw std::runtime_error("unknown reward_kind: " + s);
}

FileTree read_tree(const fs::path& dir) {
    FileTree tree;
    if (!fs::exists(dir)) return tree;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        tree[fs::relative(entry.path(), dir).generic_string()] = ss.str();
    }
    return tree;
}

}  // namespace

Environment load_environment(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path);
    json j = json::parse(in);

    Environment env;
    env.env_id = j.at("env_id").get<std::string>();
    env.reward_kind = reward_kind_from_string(j.at("reward_kind").get<std::string>());
    env.frozen_paths = j.at("frozen_paths").get<std::vector<std::string>>();
    if (j.contains("resource_requirement")) {
        const auto& r = j["resource_requirement"];
        env.resource_requirement.gpu_count = r.value("gpu_count", 0);
        env.resource_requirement.cpu_count = r.value("cpu_count", 1);
        env.resource_requirement.memory_mb = r.value("memory_mb", 1024L);
    }
    env.time_budget_s = j.value("time_budget_s", 60.0);
    if (j.contains("entrypoint")) env.entrypoint = j["entrypoint"].get<std::vector<std::string>>();
    env.validation_interval = j.value("validation_interval", 1L);
    if (j.contains("baseline_dir")) {
        fs::path base = fs::path(manifest_path).parent_path() /
                        j["baseline_dir"].get<std::string>();
        env.baseline = read_tree(base);
    }
    if (j.contains("baseline_reward"))
        env.baseline_reward = Reward{j["baseline_reward"].get<double>(), env.reward_kind};
    return env;
}

GuardResult guard_frozen_paths(const UnifiedDiff& diff, const Environment& env) {
    GuardResult res;
    for (const auto& path : diff_target_paths(diff)) {
        for (const auto& glob : env.frozen_paths) {
            if (fnmatch(glob.c_str(), path.c_str(), 0) == 0) {
                res.ok = false;
                res.violations.push_back(path);
                break;
            }
        }
    }
    return res;
}

GuardResult guard_frozen_paths(const std::string& diff_text, const Environment& env) {
    auto parsed = parse_unified_diff(diff_text);
    if (!parsed.diff) return GuardResult{true, {}};  // unparseable never applies anyway
    return guard_frozen_paths(*parsed.diff, env);
}

Reward evaluate(const Environment& env, const MetricsLog& metrics, ExecutionStatus status) {
    if (status != ExecutionStatus::succeeded) return Reward{0.0, env.reward_kind};
    switch (env.reward_kind) {
        case RewardKind::accuracy:
            try {
                return reward_from_accuracy(metrics);
            } catch (const NoAccuracyRecordsError&) {
                return Reward{0.0, RewardKind::accuracy};
            }
        case RewardKind::reciprocal_loss: {
            auto last = metrics.last("val_loss");
            if (!last) return Reward{0.0, RewardKind::reciprocal_loss};
            try {
                return reward_from_loss(last->value);
            } catch (const NonFiniteLossError&) {
                return Reward{0.0, RewardKind::reciprocal_loss};
            }
        }
        case RewardKind::synthetic: {
            auto r = metrics.last("reward");
            return Reward{r ? r->value : 0.0, RewardKind::synthetic};
        }
    }
    return Reward{0.0, env.reward_kind};
}

// ---------------------------------------------------------------------------
// LatticeTune
// ---------------------------------------------------------------------------

double LatticeTuneSpec::reward_at(const std::vector<int>& coords) const {
    double d2 = 0.0;
    for (int i = 0; i < dimension; ++i) {
        double d = coords[i] - optimum[i];
        d2 += d * d;
    }
    return base + amplitude * std::exp(-d2 / width);
}

std::optional<std::vector<int>> LatticeTuneSpec::parse_idea(const std::string& idea_text) const {
    // Accepts exactly one "set x=(a,b,c,d)" fragment with in-range integers.
    auto pos = idea_text.find("set x=(");
    if (pos == std::string::npos) return std::nullopt;
    std::size_t i = pos + 7;
    std::vector<int> coords;
    while (coords.size() < static_cast<std::size_t>(dimension)) {
        std::size_t start = i;
        bool neg = false;
        if (i < idea_text.size() && idea_text[i] == '-') {
            neg = true;
            ++i;
        }
        long v = 0;
        bool any = false;
        while (i < idea_text.size() && idea_text[i] >= '0' && idea_text[i] <= '9') {
            v = v * 10 + (idea_text[i] - '0');
            ++i;
            any = true;
        }
        if (!any) return std::nullopt;
        if (neg) v = -v;
        if (v < coord_min || v > coord_max) return std::nullopt;
        coords.push_back(static_cast<int>(v));
        (void)start;
        if (coords.size() < static_cast<std::size_t>(dimension)) {
            if (i >= idea_text.size() || idea_text[i] != ',') return std::nullopt;
            ++i;
        }
    }
    if (i >= idea_text.size() || idea_text[i] != ')') return std::nullopt;
    return coords;
}

std::string LatticeTuneSpec::idea_for(const std::vector<int>& coords) const {
    std::ostringstream ss;
    ss << "set x=(";
    for (int i = 0; i < dimension; ++i) {
        if (i) ss << ",";
        ss << coords[i];
    }
    ss << ")";
    return ss.str();
}

std::vector<int> LatticeTuneSpec::baseline_coords() const {
    return std::vector<int>(dimension, (coord_min + coord_max + 1) / 2);
}

ExecutionResultLite synth_execute(const LatticeTuneSpec& spec, const std::string& idea_text,
                                  std::uint64_t seed) {
    (void)seed;  // LatticeTune is fully deterministic
    ExecutionResultLite res;
    auto coords = spec.parse_idea(idea_text);
    if (!coords) {
        res.status = ExecutionStatus::patch_failed;
        res.execution_log = "unparseable idea: expected 'set x=(a,b,c,d)' with coordinates in [" +
                            std::to_string(spec.coord_min) + "," + std::to_string(spec.coord_max) +
                            "]";
        return res;
    }
    res.status = ExecutionStatus::succeeded;
    res.metrics.records.push_back({0, "reward", spec.reward_at(*coords)});
    res.metrics.terminal = true;
    res.execution_log = "lattice point evaluated";
    return res;
}

Environment lattice_environment(const LatticeTuneSpec& spec) {
    Environment env;
    env.env_id = "lattice_tune";
    env.reward_kind = RewardKind::synthetic;
    env.baseline["objective.md"] = "tune the lattice point\n";
    env.baseline_reward = Reward{spec.reward_at(spec.baseline_coords()), RewardKind::synthetic};
    env.time_budget_s = 1.0;
    return env;
}

// ---------------------------------------------------------------------------
// TwoMode
// ---------------------------------------------------------------------------

std::string TwoModeSpec::idea_name(int index) const {
    if (index < n_easy) return "E" + std::to_string(index + 1);
    return "C" + std::to_string(index - n_easy + 1);
}

std::optional<int> TwoModeSpec::parse_idea(const std::string& idea_text) const {
    // The idea name is the first whitespace token.
    auto toks = tokenize(idea_text);
    if (toks.empty()) return std::nullopt;
    for (int i = 0; i < idea_count(); ++i)
        if (toks[0] == idea_name(i)) return i;
    return std::nullopt;
}

std::string TwoModeSpec::idea_text(int index) const {
    // Easy ideas carry the keywords the RL policy collapses onto; complex
    // ideas describe multi-step interventions. Names stay parseable.
    static const char* easy_bodies[] = {
        "apply layernorm to the reward model inputs",
        "use an ema of the policy weights for evaluation",
    };
    static const char* complex_bodies[] = {
        "rewrite the advantage estimator with learned baselines",
        "distill a critic ensemble into the policy head",
        "restructure the curriculum around failure clusters",
        "add a retrieval cache over past rollouts",
        "schedule entropy bonuses from gradient variance",
        "factorize the value head across token positions",
        "train an auxiliary inverse dynamics objective",
        "resample prompts by estimated difficulty quantiles",
    };
    std::string body = index < n_easy ? easy_bodies[index % 2]
                                      : complex_bodies[(index - n_easy) % 8];
    return idea_name(index) + " " + body;
}

std::string TwoModeSpec::thinking_text(int index) const {
    // Deterministic filler sized so token_count equals the declared
    // thinking length for the idea's mode.
    int tokens = is_easy(index) ? easy_thinking_tokens : complex_thinking_tokens;
    std::ostringstream ss;
    for (int i = 0; i < tokens; ++i) {
        if (i) ss << ' ';
        ss << "step" << i;
    }
    return ss.str();
}

double TwoModeSpec::expected_reward(int index) const {
    return is_easy(index) ? easy_success_p * easy_reward : complex_success_p * complex_reward;
}

double TwoModeSpec::expected_uniform_reward() const {
    double total = 0.0;
    for (int i = 0; i < idea_count(); ++i) total += expected_reward(i);
    return total / idea_count();
}

double TwoModeSpec::expected_easy_only_reward() const {
    double total = 0.0;
    for (int i = 0; i < n_easy; ++i) total += expected_reward(i);
    return total / n_easy;
}

double TwoModeSpec::uniform_avg_thinking() const {
    double total = 0.0;
    for (int i = 0; i < idea_count(); ++i)
        total += is_easy(i) ? easy_thinking_tokens : complex_thinking_tokens;
    return total / idea_count();
}

ExecutionResultLite synth_execute(const TwoModeSpec& spec, const std::string& idea_text,
                                  std::uint64_t seed) {
    ExecutionResultLite res;
    auto idx = spec.parse_idea(idea_text);
    if (!idx) {
        res.status = ExecutionStatus::patch_failed;
        res.execution_log = "unknown idea name";
        return res;
    }
    double p = spec.is_easy(*idx) ? spec.easy_success_p : spec.complex_success_p;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(*idx)));
    bool success = rng.next_unit() < p;
    if (!success) {
        res.status = ExecutionStatus::run_failed;
        res.execution_log = "experiment did not converge";
        return res;
    }
    double reward = spec.is_easy(*idx) ? spec.easy_reward : spec.complex_reward;
    res.status = ExecutionStatus::succeeded;
    res.metrics.records.push_back({0, "reward", reward});
    res.metrics.terminal = true;
    res.execution_log = "experiment finished";
    return res;
}

Environment two_mode_environment(const TwoModeSpec& spec) {
    Environment env;
    env.env_id = "two_mode";
    env.reward_kind = RewardKind::synthetic;
    env.baseline["objective.md"] = "pick an intervention\n";
    env.baseline_reward = Reward{spec.expected_uniform_reward(), RewardKind::synthetic};
    env.time_budget_s = 1.0;
    return env;
}

}  // namespace execforge
