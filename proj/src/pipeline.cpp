#include "execforge/pipeline.hpp"

namespace execforge {

PipelineBackend::PipelineBackend(Environment env, ModelEndpoint& implementer_endpoint,
                                 ArtifactStore& store, MetricsSink& sink,
                                 std::string work_root, ImplementerConfig implementer_cfg,
                                 std::string key_prefix)
    : env_(std::move(env)),
      endpoint_(implementer_endpoint),
      store_(store),
      sink_(sink),
      work_root_(std::move(work_root)),
      implementer_cfg_(implementer_cfg),
      key_prefix_(std::move(key_prefix)) {
    slots_.push_back({0, env_.resource_requirement, false});
}

ExecutionResultLite PipelineBackend::run(const Idea& idea, std::uint64_t) {
    std::string key = key_prefix_ + idea.id + ".zip";
    ImplementResult impl =
        implement_idea(idea, env_.baseline, env_, implementer_cfg_, endpoint_, store_, key);
    if (!impl.success) {
        return {ExecutionStatus::patch_failed, {}, impl.failure_log};
    }
    if (auto it = by_digest_.find(impl.digest); it != by_digest_.end()) return it->second;

    poll_once(state_, store_, env_);
    // Serial drain: one matched-capacity slot empties the pending queue.
    while (!state_.pending.empty()) {
        std::vector<Assignment> assignments = dispatch(state_, slots_);
        if (assignments.empty()) break;  // infeasible job; impossible with matched capacity
        for (const auto& asn : assignments) {
            Worker worker(store_, work_root_);
            ExecutionResult result = worker.execute(asn.job);
            upload_result(result, store_, sink_);
            by_digest_[asn.job.codebase_digest] =
                ExecutionResultLite{result.status, result.metrics, result.execution_log};
        }
        for (auto& slot : slots_) slot.busy = false;
    }

    auto it = by_digest_.find(impl.digest);
    if (it == by_digest_.end()) {
        return {ExecutionStatus::run_failed, {}, "[pipeline] upload never reached a worker"};
    }
    return it->second;
}

}  // namespace execforge
