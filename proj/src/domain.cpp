#include "execforge/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace execforge {

std::string to_string(IdeaSource s) {
    switch (s) {
    case IdeaSource::sampled: return "sampled";
    case IdeaSource::exploit: return "exploit";
    case IdeaSource::explore: return "explore";
    case IdeaSource::rl_rollout: return "rl_rollout";
    }
    throw std::logic_error("bad IdeaSource");
}

IdeaSource idea_source_from_string(const std::string& s) {
    if (s == "sampled") return IdeaSource::sampled;
    if (s == "exploit") return IdeaSource::exploit;
    if (s == "explore") return IdeaSource::explore;
    if (s == "rl_rollout") return IdeaSource::rl_rollout;
    throw std::invalid_argument("unknown idea source: " + s);
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::size_t token_count(const std::string& text) {
    std::istringstream in(text);
    std::string tok;
    std::size_t n = 0;
    while (in >> tok) ++n;
    return n;
}

bool text_matches_keyword(const std::string& text, const std::vector<std::string>& patterns) {
    auto lower = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return s;
    };
    std::vector<std::string> wanted;
    for (const auto& p : patterns) wanted.push_back(lower(p));
    for (const auto& tok : tokenize(text)) {
        std::string t = lower(tok);
        for (const auto& w : wanted) {
            if (t == w) return true;
        }
    }
    return false;
}

Idea make_idea(std::string id, std::string idea_text,
               std::optional<std::string> thinking_text, IdeaSource source,
               std::vector<std::string> parent_ids) {
    Idea idea;
    idea.id = std::move(id);
    idea.idea_text = std::move(idea_text);
    idea.thinking_len = thinking_text ? token_count(*thinking_text) : 0;
    idea.thinking_text = std::move(thinking_text);
    idea.source = source;
    idea.parent_ids = std::move(parent_ids);
    if (idea.source == IdeaSource::exploit && idea.parent_ids.empty()) {
        throw std::invalid_argument("exploit idea requires parent_ids");
    }
    return idea;
}

std::string to_string(ExecutionStatus s) {
    switch (s) {
    case ExecutionStatus::succeeded: return "succeeded";
    case ExecutionStatus::patch_failed: return "patch_failed";
    case ExecutionStatus::run_failed: return "run_failed";
    case ExecutionStatus::timed_out: return "timed_out";
    case ExecutionStatus::guard_violation: return "guard_violation";
    }
    throw std::logic_error("bad ExecutionStatus");
}

ExecutionStatus execution_status_from_string(const std::string& s) {
    if (s == "succeeded") return ExecutionStatus::succeeded;
    if (s == "patch_failed") return ExecutionStatus::patch_failed;
    if (s == "run_failed") return ExecutionStatus::run_failed;
    if (s == "timed_out") return ExecutionStatus::timed_out;
    if (s == "guard_violation") return ExecutionStatus::guard_violation;
    throw std::invalid_argument("unknown execution status: " + s);
}

bool MetricsLog::steps_monotone() const {
    std::unordered_map<std::string, std::int64_t> last_step;
    for (const auto& r : records) {
        auto it = last_step.find(r.name);
        if (it != last_step.end() && r.step < it->second) return false;
        last_step[r.name] = r.step;
    }
    return true;
}

std::optional<MetricRecord> MetricsLog::last(const std::string& name) const {
    std::optional<MetricRecord> found;
    for (const auto& r : records) {
        if (r.name == name) found = r;
    }
    return found;
}

std::string to_string(RewardKind k) {
    switch (k) {
    case RewardKind::accuracy: return "accuracy";
    case RewardKind::reciprocal_loss: return "reciprocal_loss";
    case RewardKind::synthetic: return "synthetic";
    }
    throw std::logic_error("bad RewardKind");
}

Reward reward_from_loss(double final_validation_loss) {
    if (!std::isfinite(final_validation_loss) || final_validation_loss <= 0.0) {
        throw NonFiniteLossError("loss must be finite and > 0");
    }
    return Reward{1.0 / final_validation_loss, RewardKind::reciprocal_loss};
}

Reward reward_from_accuracy(const MetricsLog& series, const std::string& metric_name) {
    bool any = false;
    double best = 0.0;
    for (const auto& r : series.records) {
        if (r.name != metric_name) continue;
        if (!any || r.value > best) best = r.value;
        any = true;
    }
    if (!any) throw NoAccuracyRecordsError{};
    return Reward{best, RewardKind::accuracy};
}

Trajectory make_trajectory(Idea idea, std::int64_t epoch, ExecutionStatus status,
                           MetricsLog metrics, double reward, std::string execution_log,
                           std::optional<std::string> diff,
                           std::optional<std::string> codebase_key) {
    Trajectory t;
    t.idea = std::move(idea);
    t.epoch = epoch;
    t.diff = std::move(diff);
    t.codebase_key = std::move(codebase_key);
    t.status = status;
    t.metrics = std::move(metrics);
    t.reward = status == ExecutionStatus::succeeded ? reward : 0.0;
    t.execution_log = std::move(execution_log);
    return t;
}

}  // namespace execforge
