#include "execforge/scheduler.hpp"

#include <filesystem>
#include <fstream>

#include "execforge/hash.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace execforge {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool fits(const ResourceRequirement& need, const ResourceRequirement& capacity) {
    return need.gpu_count <= capacity.gpu_count && need.cpu_count <= capacity.cpu_count &&
           need.memory_mb <= capacity.memory_mb;
}

}  // namespace

std::vector<JobConfig> poll_once(SchedulerState& state, ArtifactStore& store,
                                 const Environment& env) {
    // Fetch everything before mutating state so a store failure mid-poll
    // leaves cursor and queue intact for the next tick.
    auto [keys, next_cursor] = store.list_new(state.cursor);
    std::vector<std::pair<std::string, std::string>> fetched;  // key, digest
    for (const auto& key : keys) {
        if (!ends_with(key, ".zip")) continue;  // sidecars, logs, results
        fetched.emplace_back(key, sha256_hex(store.get(key)));
    }

    std::vector<JobConfig> fresh;
    for (auto& [key, digest] : fetched) {
        if (state.executed_digests.count(digest)) continue;  // reupload of known content
        state.executed_digests.insert(digest);
        JobConfig job;
        job.codebase_key = key;
        job.codebase_digest = digest;
        job.env_id = env.env_id;
        job.resource_requirement = env.resource_requirement;
        job.time_budget_s = env.time_budget_s;
        job.entrypoint = env.entrypoint;
        state.pending.push_back(job);
        fresh.push_back(std::move(job));
    }
    state.cursor = next_cursor;
    return fresh;
}

std::vector<Assignment> dispatch(SchedulerState& state, std::vector<WorkerSlot>& slots) {
    std::vector<Assignment> out;
    for (auto it = state.pending.begin(); it != state.pending.end();) {
        WorkerSlot* chosen = nullptr;
        for (auto& slot : slots) {
            if (!slot.busy && fits(it->resource_requirement, slot.capacity)) {
                chosen = &slot;
                break;
            }
        }
        if (!chosen) {
            ++it;  // stays pending; later feasible jobs may still dispatch
            continue;
        }
        chosen->busy = true;
        out.push_back({chosen->id, *it});
        it = state.pending.erase(it);
    }
    return out;
}

namespace {

ordered_json job_to_json(const JobConfig& job) {
    ordered_json j;
    j["codebase_key"] = job.codebase_key;
    j["codebase_digest"] = job.codebase_digest;
    j["env_id"] = job.env_id;
    j["resource_requirement"] = {{"gpu_count", job.resource_requirement.gpu_count},
                                 {"cpu_count", job.resource_requirement.cpu_count},
                                 {"memory_mb", job.resource_requirement.memory_mb}};
    j["time_budget_s"] = job.time_budget_s;
    j["entrypoint"] = job.entrypoint;
    return j;
}

JobConfig job_from_json(const ordered_json& j) {
    JobConfig job;
    job.codebase_key = j.at("codebase_key").get<std::string>();
    job.codebase_digest = j.at("codebase_digest").get<std::string>();
    job.env_id = j.at("env_id").get<std::string>();
    const auto& r = j.at("resource_requirement");
    job.resource_requirement.gpu_count = r.at("gpu_count").get<int>();
    job.resource_requirement.cpu_count = r.at("cpu_count").get<int>();
    job.resource_requirement.memory_mb = r.at("memory_mb").get<long>();
    job.time_budget_s = j.at("time_budget_s").get<double>();
    job.entrypoint = j.at("entrypoint").get<std::vector<std::string>>();
    return job;
}

}  // namespace

void save_scheduler_state(const SchedulerState& state, const std::string& path) {
    ordered_json j;
    j["cursor"] = state.cursor;
    j["executed_digests"] = state.executed_digests;  // std::set serializes sorted
    j["pending"] = ordered_json::array();
    for (const auto& job : state.pending) j["pending"].push_back(job_to_json(job));

    fs::path tmp = fs::path(path + ".tmp");
    if (tmp.has_parent_path()) fs::create_directories(tmp.parent_path());
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw StoreError("cannot write scheduler state: " + path);
        out << j.dump(2) << "\n";
    }
    fs::rename(tmp, path);
}

SchedulerState load_scheduler_state(const std::string& path) {
    SchedulerState state;
    std::ifstream in(path);
    if (!in) return state;
    ordered_json j = ordered_json::parse(in);
    state.cursor = j.at("cursor").get<StoreCursor>();
    for (const auto& d : j.at("executed_digests")) state.executed_digests.insert(d.get<std::string>());
    for (const auto& job : j.at("pending")) state.pending.push_back(job_from_json(job));
    return state;
}

}  // namespace execforge
