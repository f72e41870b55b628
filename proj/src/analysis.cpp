#include "execforge/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "execforge/search.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace execforge {

double completion_rate(const std::vector<Trajectory>& trajs) {
    if (trajs.empty()) return 0.0;
    std::size_t ok = 0;
    for (const auto& t : trajs) ok += t.status == ExecutionStatus::succeeded;
    return static_cast<double>(ok) / static_cast<double>(trajs.size());
}

std::optional<Performance> avg_best_performance(const std::vector<Trajectory>& trajs) {
    Performance perf;
    std::size_t n = 0;
    for (const auto& t : trajs) {
        if (t.status != ExecutionStatus::succeeded) continue;
        perf.average += t.reward;
        perf.best = n == 0 ? t.reward : std::max(perf.best, t.reward);
        ++n;
    }
    if (n == 0) return std::nullopt;
    perf.average /= static_cast<double>(n);
    return perf;
}

std::string to_string(IdeaClass c) {
    switch (c) {
    case IdeaClass::hyper_parameter: return "hyper_parameter";
    case IdeaClass::algorithmic: return "algorithmic";
    }
    throw std::logic_error("bad IdeaClass");
}

IdeaClass idea_class_from_string(const std::string& s) {
    if (s == "hyper_parameter") return IdeaClass::hyper_parameter;
    if (s == "algorithmic") return IdeaClass::algorithmic;
    throw std::invalid_argument("unknown idea class: " + s);
}

IdeaClass RuleJudge::classify(const Idea& idea) {
    IdeaClass c = spec_.parse_idea(idea.idea_text) ? IdeaClass::hyper_parameter
                                                   : IdeaClass::algorithmic;
    log_decision(idea.id, c);
    return c;
}

std::string ModelJudge::prompt_for(const Idea& idea) {
    return "Classify the research idea as hyper_parameter or algorithmic.\n"
           "Idea: " + idea.idea_text + "\n"
           "Answer with exactly one of the two labels.\n";
}

IdeaClass ModelJudge::classify(const Idea& idea) {
    ModelRequest req;
    req.prompt = prompt_for(idea);
    req.n_samples = 1;
    std::vector<Completion> got;
    try {
        got = endpoint_.generate(req);
    } catch (const EndpointError& e) {
        throw JudgeUnavailableError(std::string("judge endpoint failed: ") + e.what());
    } catch (const ScriptExhaustedError& e) {
        throw JudgeUnavailableError(std::string("judge script exhausted: ") + e.what());
    }
    std::string body = got.at(0).body_text;
    // Trim whitespace; accept exactly one of the two labels.
    auto b = body.find_first_not_of(" \t\r\n");
    auto e = body.find_last_not_of(" \t\r\n");
    std::string label = b == std::string::npos ? "" : body.substr(b, e - b + 1);
    if (label != "hyper_parameter" && label != "algorithmic") {
        throw JudgeUnavailableError("unparseable judge answer: '" + label + "'");
    }
    IdeaClass c = idea_class_from_string(label);
    log_decision(idea.id, c);
    return c;
}

IdeaClass classify_idea(const Idea& idea, IdeaJudge& judge) { return judge.classify(idea); }

std::vector<StratifiedRow> stratified_table(const std::vector<Trajectory>& trajs,
                                            const std::vector<IdeaClass>& classes) {
    if (trajs.size() != classes.size()) {
        throw std::invalid_argument("every trajectory needs exactly one class");
    }
    std::vector<StratifiedRow> rows(2);
    rows[0].idea_class = IdeaClass::hyper_parameter;
    rows[1].idea_class = IdeaClass::algorithmic;
    for (int k = 0; k < 2; ++k) {
        IdeaClass cls = rows[static_cast<std::size_t>(k)].idea_class;
        std::vector<Trajectory> members;
        for (std::size_t i = 0; i < trajs.size(); ++i) {
            if (classes[i] == cls) members.push_back(trajs[i]);
        }
        auto& row = rows[static_cast<std::size_t>(k)];
        row.percent = trajs.empty()
                          ? 0.0
                          : 100.0 * static_cast<double>(members.size()) / trajs.size();
        if (auto perf = avg_best_performance(members)) {
            row.average = perf->average;
            row.best = perf->best;
        }
    }
    return rows;
}

std::vector<int> keyword_convergence(const std::vector<std::vector<std::string>>& ideas_by_epoch,
                                     const std::vector<std::string>& patterns) {
    std::vector<int> counts;
    for (const auto& epoch : ideas_by_epoch) {
        int c = 0;
        for (const auto& idea : epoch) c += text_matches_keyword(idea, patterns);
        counts.push_back(c);
    }
    return counts;
}

StratifiedRates thinking_stratified_execution(const std::vector<Trajectory>& epoch_trajs,
                                              double top_frac) {
    if (top_frac <= 0.0 || top_frac > 1.0) throw std::invalid_argument("top_frac out of range");
    std::size_t need = static_cast<std::size_t>(std::ceil(1.0 / top_frac));
    if (epoch_trajs.size() < need) {
        throw std::invalid_argument("too few trajectories for stratification");
    }
    double min_len = 0.0, max_len = 0.0;
    for (std::size_t i = 0; i < epoch_trajs.size(); ++i) {
        double len = static_cast<double>(epoch_trajs[i].idea.thinking_len);
        if (i == 0) {
            min_len = max_len = len;
        } else {
            min_len = std::min(min_len, len);
            max_len = std::max(max_len, len);
        }
    }
    double band = top_frac * (max_len - min_len);
    int top_n = 0, top_ok = 0, bottom_n = 0, bottom_ok = 0;
    for (const auto& t : epoch_trajs) {
        double len = static_cast<double>(t.idea.thinking_len);
        bool ok = t.status == ExecutionStatus::succeeded;
        if (len >= max_len - band) {
            ++top_n;
            top_ok += ok;
        }
        if (len <= min_len + band) {
            ++bottom_n;
            bottom_ok += ok;
        }
    }
    StratifiedRates rates;
    rates.rate_top = top_n ? static_cast<double>(top_ok) / top_n : 0.0;
    rates.rate_bottom = bottom_n ? static_cast<double>(bottom_ok) / bottom_n : 0.0;
    return rates;
}

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

const char* status_label(ExecutionStatus s) {
    switch (s) {
    case ExecutionStatus::succeeded: return "succeeded";
    case ExecutionStatus::patch_failed: return "patch_failed";
    case ExecutionStatus::run_failed: return "run_failed";
    case ExecutionStatus::timed_out: return "timed_out";
    case ExecutionStatus::guard_violation: return "guard_violation";
    }
    return "unknown";
}

}  // namespace

AnalysisReport build_report(const std::vector<TrajectoryRecord>& records, IdeaJudge& judge,
                            const std::vector<std::string>& patterns) {
    std::vector<Trajectory> trajs;
    trajs.reserve(records.size());
    for (const auto& r : records) trajs.push_back(r.trajectory);

    ordered_json j;
    j["run_id"] = records.empty() ? "" : records.front().run_id;
    j["totals"]["trajectories"] = trajs.size();
    {
        ordered_json by_status;
        for (ExecutionStatus s : {ExecutionStatus::succeeded, ExecutionStatus::patch_failed,
                                  ExecutionStatus::run_failed, ExecutionStatus::timed_out,
                                  ExecutionStatus::guard_violation}) {
            std::size_t n = 0;
            for (const auto& t : trajs) n += t.status == s;
            by_status[status_label(s)] = n;
        }
        j["totals"]["by_status"] = by_status;
    }
    j["completion_rate"] = completion_rate(trajs);

    auto perf = avg_best_performance(trajs);
    j["performance"] = perf ? ordered_json{{"average", perf->average}, {"best", perf->best}}
                            : ordered_json(nullptr);

    j["epoch_best"] = ordered_json::array();
    for (const auto& [epoch, best] : epoch_best(trajs)) {
        j["epoch_best"].push_back({{"epoch", epoch}, {"best", best}});
    }

    std::vector<IdeaClass> classes;
    classes.reserve(trajs.size());
    for (const auto& t : trajs) classes.push_back(classify_idea(t.idea, judge));
    j["stratified"] = ordered_json::array();
    std::vector<StratifiedRow> rows = stratified_table(trajs, classes);
    for (const auto& row : rows) {
        j["stratified"].push_back(
            {{"class", to_string(row.idea_class)},
             {"percent", row.percent},
             {"average", row.average ? ordered_json(*row.average) : ordered_json(nullptr)},
             {"best", row.best ? ordered_json(*row.best) : ordered_json(nullptr)}});
    }

    // Group by epoch in ascending order for the per-epoch diagnostics.
    std::map<std::int64_t, std::vector<Trajectory>> by_epoch;
    for (const auto& t : trajs) by_epoch[t.epoch].push_back(t);

    std::vector<std::vector<std::string>> ideas_by_epoch;
    for (const auto& [epoch, members] : by_epoch) {
        std::vector<std::string> texts;
        for (const auto& t : members) texts.push_back(t.idea.idea_text);
        ideas_by_epoch.push_back(std::move(texts));
    }
    std::vector<int> conv = keyword_convergence(ideas_by_epoch, patterns);
    j["keyword_convergence"] = ordered_json::array();
    {
        std::size_t k = 0;
        for (const auto& [epoch, members] : by_epoch) {
            j["keyword_convergence"].push_back({{"epoch", epoch}, {"count", conv[k++]}});
        }
    }

    j["thinking_stratified"] = ordered_json::array();
    for (const auto& [epoch, members] : by_epoch) {
        if (members.size() < 4) continue;  // ceil(1 / 0.30)
        StratifiedRates rates = thinking_stratified_execution(members);
        j["thinking_stratified"].push_back({{"epoch", epoch},
                                            {"rate_top", rates.rate_top},
                                            {"rate_bottom", rates.rate_bottom}});
    }

    // Human-readable summary.
    std::string md;
    md += "# Run report: " + j["run_id"].get<std::string>() + "\n\n";
    md += "## Execution\n";
    md += "- trajectories: " + std::to_string(trajs.size()) + "\n";
    md += "- completion rate: " + fixed6(completion_rate(trajs)) + "\n\n";
    md += "## Performance (succeeded only)\n";
    if (perf) {
        md += "- average: " + fixed6(perf->average) + "\n";
        md += "- best: " + fixed6(perf->best) + "\n\n";
    } else {
        md += "- no successful executions\n\n";
    }
    md += "## Epoch best\n\n| epoch | best reward |\n|---|---|\n";
    for (const auto& [epoch, best] : epoch_best(trajs)) {
        md += "| " + std::to_string(epoch) + " | " + fixed6(best) + " |\n";
    }
    md += "\n## Idea classes\n\n| class | percent | average | best |\n|---|---|---|---|\n";
    for (const auto& row : rows) {
        md += "| " + to_string(row.idea_class) + " | " + fixed6(row.percent) + " | " +
              (row.average ? fixed6(*row.average) : std::string("-")) + " | " +
              (row.best ? fixed6(*row.best) : std::string("-")) + " |\n";
    }
    md += "\n## Keyword convergence\n\n| epoch | matching ideas |\n|---|---|\n";
    {
        std::size_t k = 0;
        for (const auto& [epoch, members] : by_epoch) {
            md += "| " + std::to_string(epoch) + " | " + std::to_string(conv[k++]) + " |\n";
        }
    }
    md += "\n## Thinking-length stratification\n\n";
    md += "| epoch | top-band rate | bottom-band rate |\n|---|---|---|\n";
    for (const auto& entry : j["thinking_stratified"]) {
        md += "| " + std::to_string(entry["epoch"].get<std::int64_t>()) + " | " +
              fixed6(entry["rate_top"].get<double>()) + " | " +
              fixed6(entry["rate_bottom"].get<double>()) + " |\n";
    }

    return AnalysisReport{std::move(j), std::move(md)};
}

AnalysisReport write_report(const std::string& run_dir, IdeaJudge& judge,
                            const std::vector<std::string>& patterns) {
    std::vector<TrajectoryRecord> records;
    fs::path traj_path = fs::path(run_dir) / "trajectories.jsonl";
    if (fs::exists(traj_path)) records = read_trajectories_jsonl(traj_path.string());

    AnalysisReport report = build_report(records, judge, patterns);
    fs::create_directories(run_dir);
    {
        std::ofstream out(fs::path(run_dir) / "report.json", std::ios::trunc | std::ios::binary);
        out << report.json.dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(run_dir) / "report.md", std::ios::trunc | std::ios::binary);
        out << report.markdown;
    }
    return report;
}

}  // namespace execforge
