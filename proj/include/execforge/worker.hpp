#pragma once

// Executes one JobConfig: unpack the artifact into an isolated working
// directory, run the environment entrypoint under a hard time budget,
// parse the metrics contract, upload everything (failures included).

#include <string>

#include "execforge/domain.hpp"
#include "execforge/gateway.hpp"
#include "execforge/scheduler.hpp"

namespace execforge {

struct ResultMetadata {
    std::string idea_id;
    std::string idea_text;
    std::string diff;
    std::string env_id;
    Timestamps timestamps;
};

struct ExecutionResult {
    JobConfig job;
    ExecutionStatus status = ExecutionStatus::run_failed;
    MetricsLog metrics;
    std::string execution_log;
    ResultMetadata metadata;
};

// Parses the metrics-file contract: one {"step","name","value"} JSON object
// per line. Returns false on any malformed line (records parsed so far are
// kept; the caller downgrades the status).
bool parse_metrics_file(const std::string& path, MetricsLog& out, std::string& error);

class Worker {
public:
    // work_root holds the per-job isolated directories.
    Worker(ArtifactStore& store, std::string work_root);

    // Never throws for job-level failures; every failure mode is a status.
    ExecutionResult execute(const JobConfig& job);

private:
    ArtifactStore& store_;
    std::string work_root_;
};

// Metrics to the sink under the job's run id (key minus ".zip"), result
// document to the store under `<key>.result.json`. Idempotent on retry.
void upload_result(const ExecutionResult& result, ArtifactStore& store, MetricsSink& sink);

// Run id used by upload_result for the metrics sink.
std::string result_run_id(const JobConfig& job);

}  // namespace execforge
