#include "execforge/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace execforge {

ordered_json trajectory_record_to_json(const TrajectoryRecord& rec) {
    const Trajectory& t = rec.trajectory;
    ordered_json j;
    j["run_id"] = rec.run_id;
    j["epoch"] = t.epoch;
    j["idea_id"] = t.idea.id;
    j["idea_text"] = t.idea.idea_text;
    j["thinking_text"] = t.idea.thinking_text ? ordered_json(*t.idea.thinking_text)
                                              : ordered_json(nullptr);
    j["source"] = to_string(t.idea.source);
    j["parent_ids"] = t.idea.parent_ids;
    j["status"] = to_string(t.status);
    j["reward"] = t.reward;
    j["metrics"] = ordered_json::array();
    for (const auto& r : t.metrics.records) {
        j["metrics"].push_back({{"step", r.step}, {"name", r.name}, {"value", r.value}});
    }
    j["execution_log_ref"] = rec.execution_log_ref;
    j["timestamps"] = {{"created", t.timestamps.created},
                       {"completed", t.timestamps.completed}};
    return j;
}

TrajectoryRecord trajectory_record_from_json(const ordered_json& j) {
    TrajectoryRecord rec;
    rec.run_id = j.at("run_id").get<std::string>();
    rec.execution_log_ref = j.at("execution_log_ref").get<std::string>();

    std::optional<std::string> thinking;
    if (!j.at("thinking_text").is_null()) thinking = j.at("thinking_text").get<std::string>();
    Idea idea = make_idea(j.at("idea_id").get<std::string>(),
                          j.at("idea_text").get<std::string>(), std::move(thinking),
                          idea_source_from_string(j.at("source").get<std::string>()),
                          j.at("parent_ids").get<std::vector<std::string>>());

    ExecutionStatus status = execution_status_from_string(j.at("status").get<std::string>());
    MetricsLog metrics;
    for (const auto& m : j.at("metrics")) {
        metrics.records.push_back({m.at("step").get<std::int64_t>(),
                                   m.at("name").get<std::string>(),
                                   m.at("value").get<double>()});
    }
    metrics.terminal = status == ExecutionStatus::succeeded;

    Trajectory t = make_trajectory(std::move(idea), j.at("epoch").get<std::int64_t>(), status,
                                   std::move(metrics), j.at("reward").get<double>());
    t.timestamps.created = j.at("timestamps").at("created").get<std::int64_t>();
    t.timestamps.completed = j.at("timestamps").at("completed").get<std::int64_t>();
    rec.trajectory = std::move(t);
    return rec;
}

void write_trajectories_jsonl(const std::string& path,
                              const std::vector<TrajectoryRecord>& records) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trajectories: " + path);
    for (const auto& rec : records) {
        out << trajectory_record_to_json(rec).dump() << "\n";
    }
}

std::vector<TrajectoryRecord> read_trajectories_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read trajectories: " + path);
    std::vector<TrajectoryRecord> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw std::runtime_error("malformed trajectory record at line " +
                                     std::to_string(lineno) + " of " + path);
        }
        out.push_back(trajectory_record_from_json(j));
    }
    return out;
}

}  // namespace execforge
