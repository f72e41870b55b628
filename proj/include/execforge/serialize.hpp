#pragma once

// Trajectory JSONL records: the run log that search writes and analysis
// consumes. One JSON object per line, fields exactly: run_id, epoch,
// idea_id, idea_text, thinking_text, source, parent_ids, status, reward,
// metrics, execution_log_ref, timestamps.

#include <string>
#include <vector>

#include "execforge/domain.hpp"
#include "json.hpp"

namespace execforge {

struct TrajectoryRecord {
    std::string run_id;
    Trajectory trajectory;
    std::string execution_log_ref;  // store key or path; log bodies live elsewhere
};

nlohmann::ordered_json trajectory_record_to_json(const TrajectoryRecord& rec);
TrajectoryRecord trajectory_record_from_json(const nlohmann::ordered_json& j);

void write_trajectories_jsonl(const std::string& path,
                              const std::vector<TrajectoryRecord>& records);
std::vector<TrajectoryRecord> read_trajectories_jsonl(const std::string& path);

}  // namespace execforge
