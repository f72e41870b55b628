#pragma once

// Turns one Idea into a patched codebase artifact: k parallel diff
// candidates, strict patching, bounded self-revision from patch logs, and
// canonical-zip upload of the first guard-passing tree.

#include <string>
#include <vector>

#include "execforge/difftext.hpp"
#include "execforge/domain.hpp"
#include "execforge/environments.hpp"
#include "execforge/gateway.hpp"

namespace execforge {

struct ImplementerConfig {
    int k_parallel = 10;
    int max_revisions = 2;
};

// One batched request; exactly k candidate diff texts (possibly malformed).
std::vector<std::string> propose_diffs(const Idea& idea, const FileTree& baseline, int k,
                                       ModelEndpoint& endpoint);

// One corrected candidate; the prompt carries the failed diff and its patch
// log verbatim. patch_log must be nonempty.
std::string revise_diff(const Idea& idea, const FileTree& baseline,
                        const std::string& failed_diff, const std::string& patch_log,
                        ModelEndpoint& endpoint);

struct ImplementResult {
    bool success = false;
    std::string codebase_key;     // artifact key of the winning zip
    std::string digest;           // content digest of the zip bytes
    int winner_index = -1;        // sample index of the winning pipeline
    std::string winning_diff;
    long apply_attempts = 0;      // total apply_patch calls made
    std::string failure_log;      // last patch log per pipeline when all fail
};

// Pipelines advance in lockstep rounds (initial apply, then revisions);
// at each round barrier the lowest successful sample index wins and the
// rest are cancelled. Guard violations count as failed candidates. The
// winning tree is uploaded at artifact_key with a `<key>.meta.json`
// sidecar carrying idea text, diff, and env id.
ImplementResult implement_idea(const Idea& idea, const FileTree& baseline,
                               const Environment& env, const ImplementerConfig& cfg,
                               ModelEndpoint& endpoint, ArtifactStore& store,
                               const std::string& artifact_key);

}  // namespace execforge
