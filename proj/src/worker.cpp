#include "execforge/worker.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "execforge/hash.hpp"
#include "execforge/zips.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace execforge {

bool parse_metrics_file(const std::string& path, MetricsLog& out, std::string& error) {
    std::ifstream in(path);
    if (!in) {
        error = "metrics file missing";
        return false;
    }
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("step") || !j.contains("name") ||
            !j.contains("value") || !j["step"].is_number_integer() || !j["name"].is_string() ||
            !j["value"].is_number()) {
            error = "malformed metrics record at line " + std::to_string(lineno);
            return false;
        }
        out.records.push_back({j["step"].get<std::int64_t>(), j["name"].get<std::string>(),
                               j["value"].get<double>()});
    }
    return true;
}

namespace {

std::atomic<std::uint64_t> g_job_counter{0};

// Runs argv in cwd with stdout+stderr captured to log_path; hard-kills the
// whole process group when the budget expires.
struct RunOutcome {
    bool timed_out = false;
    int exit_code = -1;
    bool signaled = false;
};

RunOutcome run_process(const std::vector<std::string>& argv, const fs::path& cwd,
                       const fs::path& log_path, double budget_s) {
    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);

    pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork failed");
    if (pid == 0) {
        setpgid(0, 0);  // own process group so the timeout kill reaps children
        if (chdir(cwd.c_str()) != 0) _exit(127);
        int fd = open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd >= 0) {
            dup2(fd, STDOUT_FILENO);
            dup2(fd, STDERR_FILENO);
            close(fd);
        }
        execvp(cargv[0], cargv.data());
        _exit(127);
    }
    setpgid(pid, pid);  // also from the parent: closes the setpgid/exec race

    RunOutcome out;
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(budget_s));
    int status = 0;
    for (;;) {
        pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0) throw std::runtime_error("waitpid failed");
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            waitpid(pid, &status, 0);
            out.timed_out = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (WIFEXITED(status)) out.exit_code = WEXITSTATUS(status);
    if (WIFSIGNALED(status)) out.signaled = true;
    return out;
}

std::string read_file_if_any(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

Worker::Worker(ArtifactStore& store, std::string work_root)
    : store_(store), work_root_(std::move(work_root)) {
    fs::create_directories(work_root_);
}

ExecutionResult Worker::execute(const JobConfig& job) {
    ExecutionResult result;
    result.job = job;
    result.metadata.env_id = job.env_id;

    // Metadata sidecar travels with the artifact; absence is tolerated.
    if (store_.contains(job.codebase_key + ".meta.json")) {
        json meta = json::parse(store_.get(job.codebase_key + ".meta.json"), nullptr, false);
        if (meta.is_object()) {
            result.metadata.idea_id = meta.value("idea_id", "");
            result.metadata.idea_text = meta.value("idea_text", "");
            result.metadata.diff = meta.value("diff", "");
        }
    }

    std::string zip_bytes;
    try {
        zip_bytes = store_.get(job.codebase_key);
    } catch (const StoreError& e) {
        result.execution_log = std::string("artifact fetch failed: ") + e.what();
        return result;
    }
    if (sha256_hex(zip_bytes) != job.codebase_digest) {
        result.execution_log = "artifact digest mismatch";
        return result;
    }

    FileTree tree;
    try {
        tree = zip_unpack(zip_bytes);
    } catch (const ZipError& e) {
        result.execution_log = std::string("artifact unpack failed: ") + e.what();
        return result;
    }

    // Isolated working directory per execution.
    std::uint64_t n = g_job_counter.fetch_add(1);
    fs::path work = fs::path(work_root_) /
                    ("job_" + job.codebase_digest.substr(0, 12) + "_" + std::to_string(n));
    fs::create_directories(work);
    for (const auto& [path, content] : tree) {
        fs::path p = work / path;
        fs::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
    }

    if (job.entrypoint.empty()) {
        result.execution_log = "no entrypoint configured";
        return result;
    }

    fs::path log_path = work / "execution.log";
    RunOutcome run = run_process(job.entrypoint, work, log_path, job.time_budget_s);
    result.execution_log = read_file_if_any(log_path);

    if (run.timed_out) {
        result.status = ExecutionStatus::timed_out;
        result.execution_log += "\n[worker] time budget exceeded, process group killed";
        return result;
    }

    // Metrics contract: parse whatever exists; failures keep partial records.
    std::string parse_error;
    bool parsed = parse_metrics_file((work / "metrics.jsonl").string(), result.metrics,
                                     parse_error);
    result.metrics.terminal = (run.exit_code == 0);

    if (run.signaled || run.exit_code != 0) {
        result.status = ExecutionStatus::run_failed;
        result.execution_log += "\n[worker] entrypoint exited with code " +
                                std::to_string(run.exit_code);
        return result;
    }
    if (!parsed) {
        result.status = ExecutionStatus::run_failed;
        result.execution_log += "\n[worker] " + parse_error;
        return result;
    }
    if (result.metrics.records.empty()) {
        result.status = ExecutionStatus::run_failed;
        result.execution_log += "\n[worker] no metrics produced";
        return result;
    }
    if (!result.metrics.steps_monotone()) {
        result.status = ExecutionStatus::run_failed;
        result.execution_log += "\n[worker] non-monotone metric steps";
        return result;
    }
    result.status = ExecutionStatus::succeeded;
    return result;
}

std::string result_run_id(const JobConfig& job) {
    std::string id = job.codebase_key;
    if (id.size() > 4 && id.compare(id.size() - 4, 4, ".zip") == 0)
        id = id.substr(0, id.size() - 4);
    return id;
}

namespace {

const char* status_name(ExecutionStatus s) {
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

void upload_result(const ExecutionResult& result, ArtifactStore& store, MetricsSink& sink) {
    sink.log_metrics(result_run_id(result.job), result.metrics.records);

    ordered_json doc;
    doc["status"] = status_name(result.status);
    doc["terminal"] = result.metrics.terminal;
    doc["execution_log"] = result.execution_log;
    doc["metadata"] = {{"idea_id", result.metadata.idea_id},
                       {"idea_text", result.metadata.idea_text},
                       {"diff", result.metadata.diff},
                       {"env_id", result.metadata.env_id},
                       {"created", result.metadata.timestamps.created},
                       {"completed", result.metadata.timestamps.completed}};
    store.put(result.job.codebase_key + ".result.json", doc.dump(2) + "\n");
}

}  // namespace execforge
