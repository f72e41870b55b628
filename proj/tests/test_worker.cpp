#include "doctest.h"

#include <chrono>
#include <cmath>
#include <filesystem>

#include "execforge/hash.hpp"
#include "execforge/worker.hpp"
#include "execforge/zips.hpp"

using namespace execforge;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("execforge_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Minimal process environment: run.sh reads params.txt and emits the
// lattice reward as a metrics record. Pure shell + awk, no interpreter deps.
const char* kLatticeRunSh = R"(#!/bin/sh
pwd
awk -F, '{
  dx0 = $1 - 7; dx1 = $2 - 2; dx2 = $3 - 5; dx3 = $4 - 1
  d2 = dx0*dx0 + dx1*dx1 + dx2*dx2 + dx3*dx3
  r = 0.3 + 0.6 * exp(-d2 / 8)
  printf "{\"step\": 1, \"name\": \"reward\", \"value\": %.17g}\n", r > "metrics.jsonl"
}' params.txt
)";

FileTree lattice_tree(const std::string& params) {
    return {{"run.sh", kLatticeRunSh}, {"params.txt", params + "\n"}};
}

JobConfig make_job(ArtifactStore& store, const std::string& key, const FileTree& tree,
                   std::vector<std::string> entrypoint = {"sh", "run.sh"},
                   double budget_s = 20.0) {
    std::string bytes = zip_pack(tree);
    JobConfig job;
    job.codebase_key = key;
    job.codebase_digest = store.put(key, bytes);
    job.env_id = "lattice_tune";
    job.time_budget_s = budget_s;
    job.entrypoint = std::move(entrypoint);
    return job;
}

}  // namespace

TEST_CASE("worker runs the entrypoint and parses the metrics contract") {
    auto root = fresh_dir("worker_ok");
    MemArtifactStore store;
    Worker worker(store, (root / "work").string());

    JobConfig job = make_job(store, "runs/r/e0/i0.zip", lattice_tree("5,5,5,5"));
    ExecutionResult result = worker.execute(job);
    CHECK(result.status == ExecutionStatus::succeeded);
    CHECK(result.metrics.terminal);
    REQUIRE(result.metrics.records.size() == 1);
    CHECK(result.metrics.records[0].name == "reward");
    // Baseline (5,5,5,5) against optimum (7,2,5,1): 0.3 + 0.6*exp(-29/8).
    CHECK(std::abs(result.metrics.records[0].value - 0.3159895) < 1e-6);

    // Optimum coordinates reach the exact peak.
    JobConfig best = make_job(store, "runs/r/e0/i1.zip", lattice_tree("7,2,5,1"));
    ExecutionResult peak = worker.execute(best);
    CHECK(peak.status == ExecutionStatus::succeeded);
    CHECK(peak.metrics.records[0].value == doctest::Approx(0.9));
    fs::remove_all(root);
}

TEST_CASE("nonzero exit is run_failed with the log captured") {
    auto root = fresh_dir("worker_fail");
    MemArtifactStore store;
    Worker worker(store, (root / "work").string());

    FileTree tree{{"run.sh", "#!/bin/sh\necho boom: missing dependency\nexit 3\n"}};
    ExecutionResult result = worker.execute(make_job(store, "runs/r/f.zip", tree));
    CHECK(result.status == ExecutionStatus::run_failed);
    CHECK_FALSE(result.metrics.terminal);
    CHECK(result.execution_log.find("boom: missing dependency") != std::string::npos);
    CHECK(result.execution_log.find("exited with code 3") != std::string::npos);
    fs::remove_all(root);
}

TEST_CASE("sleep-forever entrypoint with a 1s budget times out") {
    auto root = fresh_dir("worker_timeout");
    MemArtifactStore store;
    Worker worker(store, (root / "work").string());

    FileTree tree{{"run.sh", "#!/bin/sh\nsleep 30\n"}};
    JobConfig job = make_job(store, "runs/r/slow.zip", tree, {"sh", "run.sh"}, 1.0);
    auto t0 = std::chrono::steady_clock::now();
    ExecutionResult result = worker.execute(job);
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(result.status == ExecutionStatus::timed_out);
    CHECK(elapsed <= 1.0 + 1.0);  // budget plus fixed grace
    fs::remove_all(root);
}

TEST_CASE("artifact digest mismatch never executes") {
    auto root = fresh_dir("worker_digest");
    MemArtifactStore store;
    Worker worker(store, (root / "work").string());

    JobConfig job = make_job(store, "runs/r/x.zip", lattice_tree("5,5,5,5"));
    job.codebase_digest = sha256_hex("tampered");
    ExecutionResult result = worker.execute(job);
    CHECK(result.status == ExecutionStatus::run_failed);
    CHECK(result.execution_log.find("digest mismatch") != std::string::npos);
    fs::remove_all(root);
}

TEST_CASE("metrics contract violations downgrade to run_failed") {
    auto root = fresh_dir("worker_metrics");
    MemArtifactStore store;
    Worker worker(store, (root / "work").string());

    // Exit 0 but no metrics file at all.
    FileTree silent{{"run.sh", "#!/bin/sh\ntrue\n"}};
    ExecutionResult r1 = worker.execute(make_job(store, "runs/r/m0.zip", silent));
    CHECK(r1.status == ExecutionStatus::run_failed);

    // A malformed line after a valid one: partial metrics kept, status failed.
    FileTree garbled{{"run.sh",
                      "#!/bin/sh\n"
                      "printf '{\"step\": 1, \"name\": \"reward\", \"value\": 0.5}\\n' > metrics.jsonl\n"
                      "printf 'not json\\n' >> metrics.jsonl\n"}};
    ExecutionResult r2 = worker.execute(make_job(store, "runs/r/m1.zip", garbled));
    CHECK(r2.status == ExecutionStatus::run_failed);
    REQUIRE(r2.metrics.records.size() == 1);
    CHECK(r2.metrics.records[0].value == doctest::Approx(0.5));
    CHECK(r2.execution_log.find("malformed metrics record at line 2") != std::string::npos);

    // Non-monotone steps violate the log invariant.
    FileTree jumbled{{"run.sh",
                      "#!/bin/sh\n"
                      "printf '{\"step\": 5, \"name\": \"reward\", \"value\": 0.5}\\n' > metrics.jsonl\n"
                      "printf '{\"step\": 2, \"name\": \"reward\", \"value\": 0.6}\\n' >> metrics.jsonl\n"}};
    ExecutionResult r3 = worker.execute(make_job(store, "runs/r/m2.zip", jumbled));
    CHECK(r3.status == ExecutionStatus::run_failed);
    fs::remove_all(root);
}

TEST_CASE("executions are isolated in distinct working directories") {
    auto root = fresh_dir("worker_isolation");
    MemArtifactStore store;
    Worker worker(store, (root / "work").string());

    // run.sh prints its own pwd (captured in the execution log); identical
    // jobs must still land in different directories.
    FileTree tree = lattice_tree("5,5,5,5");
    JobConfig a = make_job(store, "runs/r/iso0.zip", tree);
    JobConfig b = a;
    b.codebase_key = "runs/r/iso1.zip";
    store.put(b.codebase_key, zip_pack(tree));

    ExecutionResult ra = worker.execute(a);
    ExecutionResult rb = worker.execute(b);
    REQUIRE(ra.status == ExecutionStatus::succeeded);
    REQUIRE(rb.status == ExecutionStatus::succeeded);
    auto first_line = [](const std::string& log) {
        return log.substr(0, log.find('\n'));
    };
    CHECK(first_line(ra.execution_log) != first_line(rb.execution_log));
    fs::remove_all(root);
}

TEST_CASE("upload_result round-trips metrics and metadata, idempotently") {
    auto root = fresh_dir("worker_upload");
    MemArtifactStore store;
    MemMetricsSink sink;
    Worker worker(store, (root / "work").string());

    // Metadata sidecar travels with the artifact key.
    JobConfig job = make_job(store, "runs/r/e3/i7.zip", lattice_tree("7,2,5,0"));
    store.put("runs/r/e3/i7.zip.meta.json",
              "{\"idea_id\": \"e3-i7\", \"idea_text\": \"set x=(7,2,5,0)\", "
              "\"diff\": \"--- a/params.txt\", \"env_id\": \"lattice_tune\"}");
    ExecutionResult result = worker.execute(job);
    REQUIRE(result.status == ExecutionStatus::succeeded);
    CHECK(result.metadata.idea_id == "e3-i7");
    CHECK(result.metadata.idea_text == "set x=(7,2,5,0)");
    CHECK(result.metadata.env_id == "lattice_tune");

    CHECK(result_run_id(job) == "runs/r/e3/i7");
    upload_result(result, store, sink);
    auto got = sink.read("runs/r/e3/i7");
    REQUIRE(got.size() == 1);
    CHECK(got[0].value == doctest::Approx(result.metrics.records[0].value));
    CHECK(store.contains("runs/r/e3/i7.zip.result.json"));
    std::string doc = store.get("runs/r/e3/i7.zip.result.json");
    CHECK(doc.find("\"succeeded\"") != std::string::npos);
    CHECK(doc.find("set x=(7,2,5,0)") != std::string::npos);

    // Duplicate upload is a no-op: one logical record, same stored bytes.
    upload_result(result, store, sink);
    CHECK(sink.read("runs/r/e3/i7").size() == 1);
    CHECK(store.get("runs/r/e3/i7.zip.result.json") == doc);

    // A failed result is still persisted, log included.
    FileTree broken{{"run.sh", "#!/bin/sh\necho diagnostics\nexit 1\n"}};
    JobConfig bad = make_job(store, "runs/r/e3/i8.zip", broken);
    ExecutionResult failed = worker.execute(bad);
    REQUIRE(failed.status == ExecutionStatus::run_failed);
    upload_result(failed, store, sink);
    std::string fail_doc = store.get("runs/r/e3/i8.zip.result.json");
    CHECK(fail_doc.find("\"run_failed\"") != std::string::npos);
    CHECK(fail_doc.find("diagnostics") != std::string::npos);
    fs::remove_all(root);
}
