#pragma once

// Environment definitions: reward mapping, frozen-path guards against
// reward hacking, process adapters for real tasks, and two deterministic
// synthetic environments (LatticeTune for search, TwoMode for the RL sim).

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "execforge/difftext.hpp"
#include "execforge/domain.hpp"

namespace execforge {

struct ResourceRequirement {
    int gpu_count = 0;
    int cpu_count = 1;
    long memory_mb = 1024;
};

struct Environment {
    std::string env_id;
    FileTree baseline;
    Reward baseline_reward{0.0, RewardKind::synthetic};  // β, cached at load
    ResourceRequirement resource_requirement;
    double time_budget_s = 60.0;
    RewardKind reward_kind = RewardKind::synthetic;
    std::vector<std::string> frozen_paths;  // fnmatch-style globs
    std::vector<std::string> entrypoint;
    long validation_interval = 1;  // steps between validation records
};

// Reads env.json (see load_environment) plus the baseline directory.
Environment load_environment(const std::string& manifest_path);

struct GuardResult {
    bool ok = true;
    std::vector<std::string> violations;  // touched frozen paths
};

// Violation iff any file section of the diff targets a frozen glob.
GuardResult guard_frozen_paths(const UnifiedDiff& diff, const Environment& env);
GuardResult guard_frozen_paths(const std::string& diff_text, const Environment& env);

// Maps a finished execution to its reward. Never throws: a failed status
// or a degenerate metrics log yields 0.
Reward evaluate(const Environment& env, const MetricsLog& metrics, ExecutionStatus status);

// ---------------------------------------------------------------------------
// Synthetic environments
// ---------------------------------------------------------------------------

struct LatticeTuneSpec {
    int dimension = 4;
    int coord_min = 0;
    int coord_max = 9;
    std::vector<int> optimum{7, 2, 5, 1};
    double base = 0.3;
    double amplitude = 0.6;
    double width = 8.0;

    double reward_at(const std::vector<int>& coords) const;
    // Parses "set x=(a,b,c,d)" with each coordinate in range.
    std::optional<std::vector<int>> parse_idea(const std::string& idea_text) const;
    std::string idea_for(const std::vector<int>& coords) const;
    std::vector<int> baseline_coords() const;  // center of the lattice
};

struct TwoModeSpec {
    int n_easy = 2;
    int n_complex = 8;
    double easy_success_p = 1.0;
    double easy_reward = 0.5;
    double complex_success_p = 0.3;
    double complex_reward = 0.9;
    int easy_thinking_tokens = 40;
    int complex_thinking_tokens = 400;

    int idea_count() const { return n_easy + n_complex; }
    // Idea names: E1..E{n_easy}, C1..C{n_complex}.
    std::string idea_name(int index) const;
    bool is_easy(int index) const { return index < n_easy; }
    std::optional<int> parse_idea(const std::string& idea_text) const;
    // Canonical idea text carries collapse-keyword bodies for the analysis
    // module; the leading name token is what parse_idea matches.
    std::string idea_text(int index) const;
    std::string thinking_text(int index) const;

    double expected_reward(int index) const;
    double expected_uniform_reward() const;   // uniform policy over all ideas
    double expected_easy_only_reward() const; // policy on easy ideas only
    double uniform_avg_thinking() const;
};

struct ExecutionResultLite {
    ExecutionStatus status = ExecutionStatus::run_failed;
    MetricsLog metrics;
    std::string execution_log;
};

// Pure function of (spec, idea_text, seed): runs a synthetic "experiment".
ExecutionResultLite synth_execute(const LatticeTuneSpec& spec, const std::string& idea_text,
                                  std::uint64_t seed);
ExecutionResultLite synth_execute(const TwoModeSpec& spec, const std::string& idea_text,
                                  std::uint64_t seed);

// Environment wrappers for the synthetic specs (β cached from the
// baseline idea / uniform policy respectively).
Environment lattice_environment(const LatticeTuneSpec& spec = {});
Environment two_mode_environment(const TwoModeSpec& spec = {});

}  // namespace execforge
