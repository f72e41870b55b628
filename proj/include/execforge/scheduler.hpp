#pragma once

// Polls the artifact store on a fixed clock, deduplicates codebases by
// content digest, and dispatches job configurations to worker slots.

#include <deque>
#include <set>
#include <string>
#include <vector>

#include "execforge/environments.hpp"
#include "execforge/gateway.hpp"

namespace execforge {

struct JobConfig {
    std::string codebase_key;
    std::string codebase_digest;
    std::string env_id;
    ResourceRequirement resource_requirement;
    double time_budget_s = 60.0;
    std::vector<std::string> entrypoint;
};

struct SchedulerState {
    StoreCursor cursor = 0;
    std::set<std::string> executed_digests;  // enqueued-or-done, never re-enqueued
    std::deque<JobConfig> pending;
};

// Fetches every key past the cursor, enqueues `.zip` codebases with novel
// digests, advances the cursor exactly once. A store failure leaves the
// state untouched for the next tick.
std::vector<JobConfig> poll_once(SchedulerState& state, ArtifactStore& store,
                                 const Environment& env);

struct WorkerSlot {
    int id = 0;
    ResourceRequirement capacity;
    bool busy = false;
};

struct Assignment {
    int slot_id = 0;
    JobConfig job;
};

// FIFO among resource-feasible pending jobs; at most one job per idle slot.
// Infeasible jobs stay pending without blocking feasible ones behind them.
std::vector<Assignment> dispatch(SchedulerState& state, std::vector<WorkerSlot>& slots);

void save_scheduler_state(const SchedulerState& state, const std::string& path);
SchedulerState load_scheduler_state(const std::string& path);  // default if absent

}  // namespace execforge
