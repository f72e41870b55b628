#pragma once

// ExecutionBackend that routes each idea through the full artifact
// pipeline: implementer (diff candidates) -> scheduler (digest-deduplicated
// dispatch) -> worker (isolated process run). Identical patched trees
// execute exactly once; later ideas reuse the cached result by digest.

#include <map>
#include <string>

#include "execforge/implementer.hpp"
#include "execforge/scheduler.hpp"
#include "execforge/search.hpp"
#include "execforge/worker.hpp"

namespace execforge {

class PipelineBackend : public ExecutionBackend {
public:
    // key_prefix namespaces this run's uploads inside the shared store.
    PipelineBackend(Environment env, ModelEndpoint& implementer_endpoint, ArtifactStore& store,
                    MetricsSink& sink, std::string work_root,
                    ImplementerConfig implementer_cfg = {},
                    std::string key_prefix = "codebases/");

    // Implementation failures come back as patch_failed trajectories; the
    // worker owns every status past a successful upload. Gateway failures
    // propagate (they abort the search per its contract).
    ExecutionResultLite run(const Idea& idea, std::uint64_t seed) override;

    const SchedulerState& scheduler_state() const { return state_; }

private:
    Environment env_;
    ModelEndpoint& endpoint_;
    ArtifactStore& store_;
    MetricsSink& sink_;
    std::string work_root_;
    ImplementerConfig implementer_cfg_;
    std::string key_prefix_;

    SchedulerState state_;
    std::vector<WorkerSlot> slots_;
    std::map<std::string, ExecutionResultLite> by_digest_;  // executed cache
};

}  // namespace execforge
