#pragma once

// POSIX unified diff parsing and strict (zero-fuzz) application against an
// in-memory file tree. Application failures are data, not errors: the patch
// log names the offending hunk so a model can revise its generation.

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace execforge {

// path -> file content
using FileTree = std::map<std::string, std::string>;

struct DiffLine {
    char tag = ' ';  // ' ' context, '+' addition, '-' deletion
    std::string text;
    bool no_newline = false;  // "\ No newline at end of file" follows
};

struct Hunk {
    long old_start = 0;
    long old_count = 0;
    long new_start = 0;
    long new_count = 0;
    std::vector<DiffLine> lines;
};

struct FileDiff {
    std::string old_path;  // "/dev/null" for file creation
    std::string new_path;  // "/dev/null" for file deletion
    std::vector<Hunk> hunks;

    // Path the diff applies to / produces, for guard and apply decisions.
    bool creates_file() const { return old_path == "/dev/null"; }
    bool deletes_file() const { return new_path == "/dev/null"; }
};

struct UnifiedDiff {
    std::vector<FileDiff> files;
};

struct DiffParseResult {
    std::optional<UnifiedDiff> diff;  // nullopt on parse failure
    std::string log;                  // parse diagnostics when failed
};

DiffParseResult parse_unified_diff(const std::string& text);

// Every non-/dev/null path a diff touches (old and new sides), deduplicated,
// in first-appearance order.
std::vector<std::string> diff_target_paths(const UnifiedDiff& diff);

struct PatchOutcome {
    bool applied = false;
    std::string patch_log;                  // rejected hunks, context mismatches
    std::optional<FileTree> patched_tree;   // present iff applied
};

// Strict application: exact context match at the stated line numbers, zero
// fuzz, no offset search. All hunks of all files apply atomically; any
// mismatch rejects the whole patch and leaves the baseline untouched.
// An empty diff applies trivially and returns the tree unchanged.
PatchOutcome apply_patch(const FileTree& baseline, const std::string& diff_text);
PatchOutcome apply_patch(const FileTree& baseline, const UnifiedDiff& diff);

}  // namespace execforge
