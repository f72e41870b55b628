#pragma once

// Core data types shared by every other module: ideas, execution outcomes,
// metrics series, rewards, and the reward mappings.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace execforge {

enum class IdeaSource { sampled, exploit, explore, rl_rollout };

std::string to_string(IdeaSource s);
IdeaSource idea_source_from_string(const std::string& s);

// Whitespace token count; the project-wide thinking/idea length unit.
std::size_t token_count(const std::string& text);
std::vector<std::string> tokenize(const std::string& text);

// True iff any whitespace token of text equals one of the patterns,
// case-insensitively. Shared by convergence counting and analysis.
bool text_matches_keyword(const std::string& text, const std::vector<std::string>& patterns);

struct Idea {
    std::string id;
    std::string idea_text;
    std::optional<std::string> thinking_text;
    std::size_t thinking_len = 0;  // whitespace tokens of thinking_text, 0 when absent
    IdeaSource source = IdeaSource::sampled;
    std::vector<std::string> parent_ids;  // empty for fresh samples
};

// Builds an Idea with thinking_len derived from thinking_text.
Idea make_idea(std::string id, std::string idea_text,
               std::optional<std::string> thinking_text, IdeaSource source,
               std::vector<std::string> parent_ids = {});

enum class ExecutionStatus { succeeded, patch_failed, run_failed, timed_out, guard_violation };

std::string to_string(ExecutionStatus s);
ExecutionStatus execution_status_from_string(const std::string& s);

struct MetricRecord {
    std::int64_t step = 0;
    std::string name;
    double value = 0.0;

    bool operator==(const MetricRecord&) const = default;
};

// Ordered series of metric records. Steps must be non-decreasing per name.
struct MetricsLog {
    std::vector<MetricRecord> records;
    bool terminal = false;  // whether the run reached its configured end

    bool empty() const { return records.empty(); }

    // True iff steps are non-decreasing within every metric name.
    bool steps_monotone() const;

    // Last record carrying the given name, if any.
    std::optional<MetricRecord> last(const std::string& name) const;
};

enum class RewardKind { accuracy, reciprocal_loss, synthetic };

std::string to_string(RewardKind k);

struct Reward {
    double value = 0.0;  // in [0, inf)
    RewardKind kind = RewardKind::synthetic;
};

struct NonFiniteLossError : std::domain_error {
    explicit NonFiniteLossError(const std::string& what) : std::domain_error(what) {}
};

struct NoAccuracyRecordsError : std::domain_error {
    NoAccuracyRecordsError() : std::domain_error("no accuracy records in series") {}
};

// Proxy reward for loss-metric environments: 1/loss. Throws NonFiniteLossError
// for NaN, infinite, or non-positive losses; callers map that to a reward-0
// trajectory with status run_failed.
Reward reward_from_loss(double final_validation_loss);

// Max over the accuracy records of the series (records named `metric_name`).
// Throws NoAccuracyRecordsError when the series holds none.
Reward reward_from_accuracy(const MetricsLog& series,
                            const std::string& metric_name = "val_accuracy");

struct Timestamps {
    std::int64_t created = 0;    // logical tick, not wall clock
    std::int64_t completed = 0;
};

struct Trajectory {
    Idea idea;
    std::int64_t epoch = 0;
    std::optional<std::string> diff;
    std::optional<std::string> codebase_key;
    ExecutionStatus status = ExecutionStatus::run_failed;
    MetricsLog metrics;
    double reward = 0.0;  // 0 unless status == succeeded
    std::string execution_log;
    Timestamps timestamps;
};

// Enforces the status/reward coupling: non-succeeded trajectories carry
// reward 0 regardless of the reward argument.
Trajectory make_trajectory(Idea idea, std::int64_t epoch, ExecutionStatus status,
                           MetricsLog metrics, double reward,
                           std::string execution_log = {},
                           std::optional<std::string> diff = std::nullopt,
                           std::optional<std::string> codebase_key = std::nullopt);

}  // namespace execforge
