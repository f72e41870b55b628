#pragma once

// Abstractions over the three external services: a chat-completion model
// endpoint, an artifact bucket, and a metrics sink. Deterministic in-process
// and filesystem implementations back every desk-scale run; the HTTP model
// client is the only network-facing piece.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "execforge/domain.hpp"

namespace execforge {

struct ModelRequest {
    std::string prompt;
    int n_samples = 1;
    int max_output_tokens = 8192;
    double temperature = 1.0;
    std::vector<std::string> stop_markers;
};

struct Completion {
    std::optional<std::string> thinking_text;
    std::string body_text;
};

struct EndpointError : std::runtime_error {
    explicit EndpointError(const std::string& what, bool retryable = true)
        : std::runtime_error(what), retryable(retryable) {}
    bool retryable;
};

struct ScriptExhaustedError : std::runtime_error {
    explicit ScriptExhaustedError(const std::string& what) : std::runtime_error(what) {}
};

class ModelEndpoint {
public:
    virtual ~ModelEndpoint() = default;
    // Returns exactly req.n_samples completions.
    virtual std::vector<Completion> generate(const ModelRequest& req) = 0;
};

// Deterministic mock: completions are a pure function of (script, prompt,
// sample index). Exact-prompt entries are looked up first; substring
// matchers serve as a fallback. Missing answers raise ScriptExhaustedError.
class ScriptedModel : public ModelEndpoint {
public:
    ScriptedModel() = default;

    void add(const std::string& prompt, std::vector<Completion> completions);
    void add_contains(const std::string& needle, std::vector<Completion> completions);

    static ScriptedModel from_json_file(const std::string& path);

    std::vector<Completion> generate(const ModelRequest& req) override;

private:
    std::map<std::string, std::vector<Completion>> exact_;  // keyed by prompt digest
    std::vector<std::pair<std::string, std::vector<Completion>>> contains_;
};

struct HttpModelConfig {
    std::string url;             // e.g. http://host:port/v1/chat/completions
    std::string model;           // optional model name forwarded in the body
    std::string api_key;         // read from EXECFORGE_API_KEY when empty
    int max_attempts = 3;
    int initial_backoff_ms = 1000;  // doubled per retry
};

// Chat-completion client over HTTP JSON. Transport failures and 5xx are
// retried with exponential backoff, then surface as retryable EndpointError.
class HttpModel : public ModelEndpoint {
public:
    explicit HttpModel(HttpModelConfig cfg);
    std::vector<Completion> generate(const ModelRequest& req) override;

private:
    HttpModelConfig cfg_;
};

// ---------------------------------------------------------------------------
// Artifact store
// ---------------------------------------------------------------------------

struct StoreError : std::runtime_error {
    explicit StoreError(const std::string& what, bool retryable = false)
        : std::runtime_error(what), retryable(retryable) {}
    bool retryable;
};

struct UnknownKeyError : StoreError {
    explicit UnknownKeyError(const std::string& key) : StoreError("unknown key: " + key) {}
};

using StoreCursor = std::uint64_t;

// Append-only keyed blob store with content digests and a poll cursor.
// put is idempotent for identical bytes; re-putting a key with different
// bytes is rejected (keys are unique). list_new returns every key exactly
// once across successive cursors.
class ArtifactStore {
public:
    virtual ~ArtifactStore() = default;
    virtual std::string put(const std::string& key, const std::string& bytes) = 0;  // -> digest
    virtual std::string get(const std::string& key) = 0;
    virtual bool contains(const std::string& key) = 0;
    virtual std::pair<std::vector<std::string>, StoreCursor> list_new(StoreCursor since) = 0;
};

class MemArtifactStore : public ArtifactStore {
public:
    std::string put(const std::string& key, const std::string& bytes) override;
    std::string get(const std::string& key) override;
    bool contains(const std::string& key) override;
    std::pair<std::vector<std::string>, StoreCursor> list_new(StoreCursor since) override;

private:
    std::mutex mu_;
    std::map<std::string, std::string> blobs_;
    std::vector<std::string> order_;
};

// Directory-backed store: blobs under <root>/objects mirroring key paths,
// an append-only key journal providing cursor semantics.
class FsArtifactStore : public ArtifactStore {
public:
    explicit FsArtifactStore(std::string root);

    std::string put(const std::string& key, const std::string& bytes) override;
    std::string get(const std::string& key) override;
    bool contains(const std::string& key) override;
    std::pair<std::vector<std::string>, StoreCursor> list_new(StoreCursor since) override;

    const std::string& root() const { return root_; }

private:
    std::string object_path(const std::string& key) const;
    std::string journal_path() const;

    std::string root_;
    std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Metrics sink
// ---------------------------------------------------------------------------

struct ConflictingDuplicateError : std::runtime_error {
    explicit ConflictingDuplicateError(const std::string& what) : std::runtime_error(what) {}
};

// Append-only, replay-safe metric log per run. Re-logging an identical
// (run_id, step, name, value) record is a no-op; a differing value for the
// same (run_id, step, name) is a conflict.
class MetricsSink {
public:
    virtual ~MetricsSink() = default;
    virtual void log_metrics(const std::string& run_id, const std::vector<MetricRecord>& records) = 0;
    virtual std::vector<MetricRecord> read(const std::string& run_id) = 0;
};

class MemMetricsSink : public MetricsSink {
public:
    void log_metrics(const std::string& run_id, const std::vector<MetricRecord>& records) override;
    std::vector<MetricRecord> read(const std::string& run_id) override;

private:
    std::mutex mu_;
    std::map<std::string, std::vector<MetricRecord>> runs_;
    std::map<std::string, std::map<std::pair<std::int64_t, std::string>, double>> seen_;
};

// One JSONL file per run under <root>/metrics/<run_id>.jsonl.
class FsMetricsSink : public MetricsSink {
public:
    explicit FsMetricsSink(std::string root);
    void log_metrics(const std::string& run_id, const std::vector<MetricRecord>& records) override;
    std::vector<MetricRecord> read(const std::string& run_id) override;

private:
    std::string file_path(const std::string& run_id) const;

    std::string root_;
    std::mutex mu_;
    std::map<std::string, std::map<std::pair<std::int64_t, std::string>, double>> seen_;
    std::set<std::string> loaded_;
};

}  // namespace execforge
