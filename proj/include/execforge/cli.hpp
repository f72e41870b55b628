#pragma once

// Single-binary front end over the library modules: search, best-of-n,
// rlsim, analyze, scheduler, worker, and implement subcommands. Exit codes:
// 0 success, 1 config error, 2 gateway hard failure.

#include <cstdint>
#include <string>
#include <vector>

namespace execforge {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
    std::string run_id;
    std::string subcommand;
    std::string config_digest;       // sha256 of the config file bytes
    std::string environment_digest;  // sha256 of the env manifest, "" if none
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::int64_t started = 0;    // unix seconds, metadata only
    std::int64_t completed = 0;  // 0 until finalized
};

// Writes <dir>/manifest.json on construction (status "running") and
// rewrites it exactly once on finalize; a second finalize throws.
class RunManifestWriter {
public:
    RunManifestWriter(RunManifest manifest, std::string dir);
    void finalize(const std::string& status);
    const RunManifest& manifest() const { return manifest_; }

private:
    void write(const std::string& status) const;

    RunManifest manifest_;
    std::string dir_;
    bool finalized_ = false;
};

// argv-style entry points; errors are messages on stderr, never traces.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);  // args exclude argv[0]

}  // namespace execforge
