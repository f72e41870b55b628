#pragma once

// Benchmarking and reporting over trajectory logs: completion rate, average
// and best performance, idea-type stratification, convergence diagnostics.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "execforge/domain.hpp"
#include "execforge/environments.hpp"
#include "execforge/gateway.hpp"
#include "execforge/serialize.hpp"

namespace execforge {

// |succeeded| / |all|; an empty input is 0.
double completion_rate(const std::vector<Trajectory>& trajs);

struct Performance {
    double average = 0.0;  // over succeeded trajectories only
    double best = 0.0;
};

// nullopt when nothing succeeded (both statistics undefined).
std::optional<Performance> avg_best_performance(const std::vector<Trajectory>& trajs);

enum class IdeaClass { hyper_parameter, algorithmic };

std::string to_string(IdeaClass c);
IdeaClass idea_class_from_string(const std::string& s);

struct JudgeUnavailableError : std::runtime_error {
    explicit JudgeUnavailableError(const std::string& what) : std::runtime_error(what) {}
};

// Every decision is logged with the idea id it classified.
class IdeaJudge {
public:
    virtual ~IdeaJudge() = default;
    virtual IdeaClass classify(const Idea& idea) = 0;

    const std::vector<std::pair<std::string, IdeaClass>>& decisions() const {
        return decisions_;
    }

protected:
    void log_decision(const std::string& idea_id, IdeaClass c) {
        decisions_.emplace_back(idea_id, c);
    }

private:
    std::vector<std::pair<std::string, IdeaClass>> decisions_;
};

// Deterministic judge for synthetic environments: a lattice coordinate
// tweak is config-only, anything else counts as algorithmic.
class RuleJudge : public IdeaJudge {
public:
    explicit RuleJudge(LatticeTuneSpec spec = {}) : spec_(std::move(spec)) {}
    IdeaClass classify(const Idea& idea) override;

private:
    LatticeTuneSpec spec_;
};

// Model-backed judge; endpoint failures and unparseable answers surface as
// JudgeUnavailableError.
class ModelJudge : public IdeaJudge {
public:
    explicit ModelJudge(ModelEndpoint& endpoint) : endpoint_(endpoint) {}
    IdeaClass classify(const Idea& idea) override;

    static std::string prompt_for(const Idea& idea);

private:
    ModelEndpoint& endpoint_;
};

IdeaClass classify_idea(const Idea& idea, IdeaJudge& judge);

struct StratifiedRow {
    IdeaClass idea_class = IdeaClass::hyper_parameter;
    double percent = 0.0;                 // share of all ideas
    std::optional<double> average;        // empty when the class has no successes
    std::optional<double> best;
};

// One row per class (hyper_parameter first). classes must align 1:1 with
// trajs. Percentages over a nonempty input sum to 100 within 0.1.
std::vector<StratifiedRow> stratified_table(const std::vector<Trajectory>& trajs,
                                            const std::vector<IdeaClass>& classes);

// Per epoch, how many idea texts match any of the case-insensitive token
// patterns.
std::vector<int> keyword_convergence(const std::vector<std::vector<std::string>>& ideas_by_epoch,
                                     const std::vector<std::string>& patterns);

struct StratifiedRates {
    double rate_top = 0.0;     // longest-thinking band
    double rate_bottom = 0.0;  // shortest-thinking band
};

// Execution rates of the thinking-length bands: bottom holds trajectories
// within top_frac of the shortest length, top within top_frac of the
// longest (all-equal lengths put every trajectory in both bands). Requires
// at least ceil(1/top_frac) trajectories.
StratifiedRates thinking_stratified_execution(const std::vector<Trajectory>& epoch_trajs,
                                              double top_frac = 0.30);

struct AnalysisReport {
    nlohmann::ordered_json json;
    std::string markdown;
};

// Pure aggregation of a run's records; deterministic given its inputs.
AnalysisReport build_report(const std::vector<TrajectoryRecord>& records, IdeaJudge& judge,
                            const std::vector<std::string>& patterns);

// Reads <run_dir>/trajectories.jsonl (absent = empty run) and writes
// report.json and report.md beside it. Returns the report.
AnalysisReport write_report(const std::string& run_dir, IdeaJudge& judge,
                            const std::vector<std::string>& patterns);

}  // namespace execforge
