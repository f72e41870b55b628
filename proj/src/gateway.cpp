#include "execforge/gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "execforge/hash.hpp"
#include "httplib.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace execforge {

// ---------------------------------------------------------------------------
// ScriptedModel
// ---------------------------------------------------------------------------

void ScriptedModel::add(const std::string& prompt, std::vector<Completion> completions) {
    exact_[sha256_hex(prompt)] = std::move(completions);
}

void ScriptedModel::add_contains(const std::string& needle, std::vector<Completion> completions) {
    contains_.emplace_back(needle, std::move(completions));
}

namespace {

Completion completion_from_json(const json& j) {
    Completion c;
    if (j.contains("thinking_text") && !j["thinking_text"].is_null())
        c.thinking_text = j["thinking_text"].get<std::string>();
    c.body_text = j.at("body_text").get<std::string>();
    return c;
}

}  // namespace

ScriptedModel ScriptedModel::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open script file: " + path);
    json j = json::parse(in);
    ScriptedModel m;
    for (const auto& entry : j.at("entries")) {
        std::vector<Completion> comps;
        for (const auto& cj : entry.at("completions")) comps.push_back(completion_from_json(cj));
        if (entry.contains("prompt"))
            m.add(entry["prompt"].get<std::string>(), std::move(comps));
        else
            m.add_contains(entry.at("contains").get<std::string>(), std::move(comps));
    }
    return m;
}

std::vector<Completion> ScriptedModel::generate(const ModelRequest& req) {
    const std::vector<Completion>* script = nullptr;
    auto it = exact_.find(sha256_hex(req.prompt));
    if (it != exact_.end()) {
        script = &it->second;
    } else {
        for (const auto& [needle, comps] : contains_) {
            if (req.prompt.find(needle) != std::string::npos) {
                script = &comps;
                break;
            }
        }
    }
    if (!script)
        throw ScriptExhaustedError("no scripted completions for prompt: " +
                                   req.prompt.substr(0, 80));
    if (static_cast<int>(script->size()) < req.n_samples)
        throw ScriptExhaustedError("script has " + std::to_string(script->size()) +
                                   " completions, requested " + std::to_string(req.n_samples));
    return std::vector<Completion>(script->begin(), script->begin() + req.n_samples);
}

// ---------------------------------------------------------------------------
// HttpModel
// ---------------------------------------------------------------------------

HttpModel::HttpModel(HttpModelConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.api_key.empty()) {
        if (const char* env = std::getenv("EXECFORGE_API_KEY")) cfg_.api_key = env;
    }
}

namespace {

// Splits "http://host:port/path" into base and path.
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw EndpointError("malformed url: " + url, false);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::vector<Completion> HttpModel::generate(const ModelRequest& req) {
    auto [base, path] = split_url(cfg_.url);

    json body;
    if (!cfg_.model.empty()) body["model"] = cfg_.model;
    body["messages"] = json::array({json{{"role", "user"}, {"content", req.prompt}}});
    body["n"] = req.n_samples;
    body["max_tokens"] = req.max_output_tokens;
    body["temperature"] = req.temperature;
    if (!req.stop_markers.empty()) body["stop"] = req.stop_markers;

    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    std::string last_error;
    int backoff_ms = cfg_.initial_backoff_ms;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        httplib::Client cli(base);
        cli.set_read_timeout(120, 0);
        auto res = cli.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error: status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw EndpointError("endpoint returned status " + std::to_string(res->status) + ": " +
                                    res->body.substr(0, 200),
                                false);
        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded()) {
            last_error = "unparseable response body";
            continue;
        }
        std::vector<Completion> out;
        for (const auto& choice : reply.at("choices")) {
            Completion c;
            const auto& msg = choice.at("message");
            c.body_text = msg.at("content").get<std::string>();
            if (msg.contains("thinking") && !msg["thinking"].is_null())
                c.thinking_text = msg["thinking"].get<std::string>();
            out.push_back(std::move(c));
        }
        if (static_cast<int>(out.size()) != req.n_samples)
            throw EndpointError("endpoint returned " + std::to_string(out.size()) +
                                    " choices, requested " + std::to_string(req.n_samples),
                                false);
        return out;
    }
    throw EndpointError("generate failed after " + std::to_string(cfg_.max_attempts) +
                        " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// MemArtifactStore
// ---------------------------------------------------------------------------

std::string MemArtifactStore::put(const std::string& key, const std::string& bytes) {
    std::lock_guard lk(mu_);
    auto it = blobs_.find(key);
    if (it != blobs_.end()) {
        if (it->second != bytes)
            throw StoreError("key already holds different bytes: " + key);
        return sha256_hex(bytes);  // idempotent re-put
    }
    blobs_[key] = bytes;
    order_.push_back(key);
    return sha256_hex(bytes);
}

std::string MemArtifactStore::get(const std::string& key) {
    std::lock_guard lk(mu_);
    auto it = blobs_.find(key);
    if (it == blobs_.end()) throw UnknownKeyError(key);
    return it->second;
}

bool MemArtifactStore::contains(const std::string& key) {
    std::lock_guard lk(mu_);
    return blobs_.count(key) > 0;
}

std::pair<std::vector<std::string>, StoreCursor> MemArtifactStore::list_new(StoreCursor since) {
    std::lock_guard lk(mu_);
    if (since > order_.size()) throw StoreError("cursor beyond journal end");
    std::vector<std::string> keys(order_.begin() + static_cast<long>(since), order_.end());
    return {std::move(keys), order_.size()};
}

// ---------------------------------------------------------------------------
// FsArtifactStore
// ---------------------------------------------------------------------------

namespace {

// Keys are relative slash-separated paths; reject anything that could
// escape the object root.
void validate_key(const std::string& key) {
    if (key.empty() || key.front() == '/' || key.find("..") != std::string::npos)
        throw StoreError("invalid key: " + key);
}

std::string read_file_or_throw(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw StoreError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

FsArtifactStore::FsArtifactStore(std::string root) : root_(std::move(root)) {
    fs::create_directories(fs::path(root_) / "objects");
    std::ofstream touch(journal_path(), std::ios::app);
}

std::string FsArtifactStore::object_path(const std::string& key) const {
    return (fs::path(root_) / "objects" / key).string();
}

std::string FsArtifactStore::journal_path() const {
    return (fs::path(root_) / "index.log").string();
}

std::string FsArtifactStore::put(const std::string& key, const std::string& bytes) {
    validate_key(key);
    std::lock_guard lk(mu_);
    fs::path obj(object_path(key));
    if (fs::exists(obj)) {
        if (read_file_or_throw(obj) != bytes)
            throw StoreError("key already holds different bytes: " + key);
        return sha256_hex(bytes);
    }
    fs::create_directories(obj.parent_path());
    // Write-then-rename so a crashed put never leaves a partial object.
    fs::path tmp = obj;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StoreError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw StoreError("short write to " + tmp.string());
    }
    fs::rename(tmp, obj);
    std::ofstream journal(journal_path(), std::ios::app);
    journal << key << "\n";
    journal.flush();
    return sha256_hex(bytes);
}

std::string FsArtifactStore::get(const std::string& key) {
    validate_key(key);
    std::lock_guard lk(mu_);
    fs::path obj(object_path(key));
    if (!fs::exists(obj)) throw UnknownKeyError(key);
    return read_file_or_throw(obj);
}

bool FsArtifactStore::contains(const std::string& key) {
    validate_key(key);
    std::lock_guard lk(mu_);
    return fs::exists(object_path(key));
}

std::pair<std::vector<std::string>, StoreCursor> FsArtifactStore::list_new(StoreCursor since) {
    std::lock_guard lk(mu_);
    std::ifstream in(journal_path());
    if (!in) throw StoreError("cannot open journal");
    std::vector<std::string> keys;
    std::string line;
    StoreCursor pos = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (pos >= since) keys.push_back(line);
        ++pos;
    }
    if (since > pos) throw StoreError("cursor beyond journal end");
    return {std::move(keys), pos};
}

// ---------------------------------------------------------------------------
// Metrics sinks
// ---------------------------------------------------------------------------

namespace {

void check_and_mark(std::map<std::pair<std::int64_t, std::string>, double>& seen,
                    const std::string& run_id, const MetricRecord& r, bool& is_new) {
    auto k = std::make_pair(r.step, r.name);
    auto it = seen.find(k);
    if (it == seen.end()) {
        seen.emplace(k, r.value);
        is_new = true;
        return;
    }
    if (it->second != r.value)
        throw ConflictingDuplicateError("run " + run_id + " step " + std::to_string(r.step) +
                                        " metric " + r.name + " logged with differing values");
    is_new = false;  // exact replay, drop silently
}

}  // namespace

void MemMetricsSink::log_metrics(const std::string& run_id,
                                 const std::vector<MetricRecord>& records) {
    std::lock_guard lk(mu_);
    auto& seen = seen_[run_id];
    auto& out = runs_[run_id];
    for (const auto& r : records) {
        bool is_new = false;
        check_and_mark(seen, run_id, r, is_new);
        if (is_new) out.push_back(r);
    }
}

std::vector<MetricRecord> MemMetricsSink::read(const std::string& run_id) {
    std::lock_guard lk(mu_);
    auto it = runs_.find(run_id);
    return it == runs_.end() ? std::vector<MetricRecord>{} : it->second;
}

FsMetricsSink::FsMetricsSink(std::string root) : root_(std::move(root)) {
    fs::create_directories(fs::path(root_) / "metrics");
}

std::string FsMetricsSink::file_path(const std::string& run_id) const {
    return (fs::path(root_) / "metrics" / (run_id + ".jsonl")).string();
}

void FsMetricsSink::log_metrics(const std::string& run_id,
                                const std::vector<MetricRecord>& records) {
    std::lock_guard lk(mu_);
    // Lazily hydrate dedup state from an existing file (post-restart replay).
    if (!loaded_.count(run_id)) {
        loaded_.insert(run_id);
        std::ifstream in(file_path(run_id));
        std::string line;
        auto& seen = seen_[run_id];
        while (in && std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            seen[{j.at("step").get<std::int64_t>(), j.at("name").get<std::string>()}] =
                j.at("value").get<double>();
        }
    }
    auto& seen = seen_[run_id];
    fs::create_directories(fs::path(file_path(run_id)).parent_path());
    std::ofstream out(file_path(run_id), std::ios::app);
    if (!out) throw StoreError("cannot open metrics file for " + run_id);
    for (const auto& r : records) {
        bool is_new = false;
        check_and_mark(seen, run_id, r, is_new);
        if (!is_new) continue;
        json j;
        j["step"] = r.step;
        j["name"] = r.name;
        j["value"] = r.value;
        out << j.dump() << "\n";
    }
    out.flush();
}

std::vector<MetricRecord> FsMetricsSink::read(const std::string& run_id) {
    std::lock_guard lk(mu_);
    std::ifstream in(file_path(run_id));
    std::vector<MetricRecord> out;
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        out.push_back({j.at("step").get<std::int64_t>(), j.at("name").get<std::string>(),
                       j.at("value").get<double>()});
    }
    return out;
}

}  // namespace execforge
