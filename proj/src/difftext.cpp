#include "execforge/difftext.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace execforge {

namespace {

std::vector<std::string> split_lines(const std::string& text, bool& trailing_newline) {
    std::vector<std::string> lines;
    trailing_newline = true;
    if (text.empty()) return lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(start));
            trailing_newline = false;
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string join_lines(const std::vector<std::string>& lines, bool trailing_newline) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        out += lines[i];
        if (i + 1 < lines.size() || trailing_newline) out += '\n';
    }
    return out;
}

// "--- a/path\t2024-01-01" -> "path". Git's a/ b/ prefixes are stripped.
std::string parse_header_path(const std::string& line, std::size_t marker_len) {
    std::string rest = line.substr(marker_len);
    std::size_t tab = rest.find('\t');
    if (tab != std::string::npos) rest = rest.substr(0, tab);
    while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\r')) rest.pop_back();
    if (rest == "/dev/null") return rest;
    if (rest.size() > 2 && (rest.compare(0, 2, "a/") == 0 || rest.compare(0, 2, "b/") == 0)) {
        return rest.substr(2);
    }
    return rest;
}

bool parse_long(std::string_view s, long& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

// "@@ -l[,c] +l[,c] @@..." -> ranges
bool parse_hunk_header(const std::string& line, Hunk& h) {
    if (line.rfind("@@ -", 0) != 0) return false;
    std::size_t plus = line.find(" +", 4);
    if (plus == std::string::npos) return false;
    std::size_t close = line.find(" @@", plus + 2);
    if (close == std::string::npos) return false;

    auto parse_range = [](std::string_view s, long& start, long& count) {
        std::size_t comma = s.find(',');
        count = 1;
        if (comma == std::string_view::npos) return parse_long(s, start);
        return parse_long(s.substr(0, comma), start) && parse_long(s.substr(comma + 1), count);
    };
    std::string_view old_range(line.data() + 4, plus - 4);
    std::string_view new_range(line.data() + plus + 2, close - plus - 2);
    return parse_range(old_range, h.old_start, h.old_count) &&
           parse_range(new_range, h.new_start, h.new_count);
}

bool is_noise_line(const std::string& line) {
    return line.rfind("diff ", 0) == 0 || line.rfind("index ", 0) == 0 ||
           line.rfind("new file mode", 0) == 0 || line.rfind("deleted file mode", 0) == 0 ||
           line.rfind("old mode", 0) == 0 || line.rfind("new mode", 0) == 0 ||
           line.rfind("similarity index", 0) == 0 || line.rfind("rename from", 0) == 0 ||
           line.rfind("rename to", 0) == 0;
}

}  // namespace

DiffParseResult parse_unified_diff(const std::string& text) {
    bool ignored;
    std::vector<std::string> lines = split_lines(text, ignored);
    for (auto& l : lines) {
        if (!l.empty() && l.back() == '\r') l.pop_back();
    }

    UnifiedDiff diff;
    std::size_t i = 0;
    auto fail = [&](const std::string& msg) {
        std::ostringstream log;
        log << "parse error at line " << (i + 1) << ": " << msg;
        return DiffParseResult{std::nullopt, log.str()};
    };

    while (i < lines.size()) {
        if (lines[i].rfind("--- ", 0) != 0) {
            if (lines[i].rfind("Binary files", 0) == 0) return fail("binary diff not supported");
            if (!lines[i].empty() && !is_noise_line(lines[i]))
                return fail("stray content outside a diff section: '" + lines[i] + "'");
            ++i;  // git noise or blank lines between file sections
            continue;
        }
        FileDiff fd;
        fd.old_path = parse_header_path(lines[i], 4);
        ++i;
        if (i >= lines.size() || lines[i].rfind("+++ ", 0) != 0) {
            return fail("expected '+++' after '---'");
        }
        fd.new_path = parse_header_path(lines[i], 4);
        ++i;
        if (fd.old_path.empty() || fd.new_path.empty()) return fail("empty diff path");

        while (i < lines.size() && lines[i].rfind("@@", 0) == 0) {
            Hunk h;
            if (!parse_hunk_header(lines[i], h)) return fail("malformed hunk header");
            if (h.old_count < 0 || h.new_count < 0 || h.old_start < 0 || h.new_start < 0) {
                return fail("negative hunk range");
            }
            ++i;
            long seen_old = 0;
            long seen_new = 0;
            while (i < lines.size() && (seen_old < h.old_count || seen_new < h.new_count)) {
                const std::string& l = lines[i];
                if (l.rfind("\\ No newline", 0) == 0) {
                    if (h.lines.empty()) return fail("newline marker without preceding line");
                    h.lines.back().no_newline = true;
                    ++i;
                    continue;
                }
                DiffLine dl;
                if (l.empty()) {
                    dl.tag = ' ';  // some tools emit bare empty lines for empty context
                } else if (l[0] == ' ' || l[0] == '+' || l[0] == '-') {
                    dl.tag = l[0];
                    dl.text = l.substr(1);
                } else {
                    return fail("unexpected line inside hunk: '" + l + "'");
                }
                if (dl.tag != '+') ++seen_old;
                if (dl.tag != '-') ++seen_new;
                h.lines.push_back(std::move(dl));
                ++i;
            }
            if (seen_old != h.old_count || seen_new != h.new_count) {
                return fail("hunk body shorter than declared ranges");
            }
            if (i < lines.size() && lines[i].rfind("\\ No newline", 0) == 0) {
                if (!h.lines.empty()) h.lines.back().no_newline = true;
                ++i;
            }
            h.lines.shrink_to_fit();
            fd.hunks.push_back(std::move(h));
        }
        if (fd.hunks.empty()) return fail("file section without hunks");
        // Hunks must be strictly ascending to apply against original offsets.
        for (std::size_t k = 1; k < fd.hunks.size(); ++k) {
            long prev_end = fd.hunks[k - 1].old_start + std::max(fd.hunks[k - 1].old_count, 1L);
            if (fd.hunks[k].old_start < prev_end) return fail("overlapping or unordered hunks");
        }
        diff.files.push_back(std::move(fd));
    }
    return DiffParseResult{std::move(diff), ""};
}

std::vector<std::string> diff_target_paths(const UnifiedDiff& diff) {
    std::vector<std::string> paths;
    auto add = [&](const std::string& p) {
        if (p == "/dev/null" || p.empty()) return;
        if (std::find(paths.begin(), paths.end(), p) == paths.end()) paths.push_back(p);
    };
    for (const auto& fd : diff.files) {
        add(fd.old_path);
        add(fd.new_path);
    }
    return paths;
}

namespace {

struct FileApplyResult {
    bool ok = false;
    std::string content;
    std::string log;
};

FileApplyResult apply_file_diff(const FileDiff& fd, const std::string& display_path,
                                const std::string& original) {
    FileApplyResult res;
    bool trailing_newline;
    std::vector<std::string> old_lines = split_lines(original, trailing_newline);

    std::vector<std::string> out;
    bool out_trailing_newline = true;
    long cursor = 0;  // 0-based index into old_lines, next line to copy
    std::ostringstream log;

    for (std::size_t hi = 0; hi < fd.hunks.size(); ++hi) {
        const Hunk& h = fd.hunks[hi];
        // old_start is 1-based; an old_count of 0 means "insert after line old_start".
        long match_at = h.old_count == 0 ? h.old_start : h.old_start - 1;
        if (match_at < cursor || match_at > static_cast<long>(old_lines.size())) {
            log << display_path << " hunk #" << (hi + 1) << ": range -" << h.old_start << ","
                << h.old_count << " outside file (" << old_lines.size() << " lines)";
            res.log = log.str();
            return res;
        }
        for (long j = cursor; j < match_at; ++j) out.push_back(old_lines[j]);
        cursor = match_at;

        for (std::size_t li = 0; li < h.lines.size(); ++li) {
            const DiffLine& dl = h.lines[li];
            if (dl.tag == '+') {
                out.push_back(dl.text);
                if (dl.no_newline) out_trailing_newline = false;
                continue;
            }
            // context or deletion: must match the original exactly (zero fuzz)
            if (cursor >= static_cast<long>(old_lines.size())) {
                log << display_path << " hunk #" << (hi + 1) << ": expected '" << dl.text
                    << "' at line " << (cursor + 1) << ", but file ends";
                res.log = log.str();
                return res;
            }
            if (old_lines[cursor] != dl.text) {
                log << display_path << " hunk #" << (hi + 1) << ": context mismatch at line "
                    << (cursor + 1) << ": expected '" << dl.text << "', found '"
                    << old_lines[cursor] << "'";
                res.log = log.str();
                return res;
            }
            if (dl.no_newline && (trailing_newline || cursor + 1 != static_cast<long>(old_lines.size()))) {
                log << display_path << " hunk #" << (hi + 1)
                    << ": newline-at-eof marker disagrees with file";
                res.log = log.str();
                return res;
            }
            if (dl.tag == ' ') {
                out.push_back(dl.text);
                if (dl.no_newline) out_trailing_newline = false;
            }
            ++cursor;
        }
    }
    for (long j = cursor; j < static_cast<long>(old_lines.size()); ++j) out.push_back(old_lines[j]);
    // Untouched tail keeps the original EOF convention.
    if (cursor < static_cast<long>(old_lines.size())) out_trailing_newline = trailing_newline;

    res.ok = true;
    res.content = join_lines(out, out_trailing_newline);
    return res;
}

}  // namespace

PatchOutcome apply_patch(const FileTree& baseline, const UnifiedDiff& diff) {
    PatchOutcome outcome;
    FileTree tree = baseline;

    for (const auto& fd : diff.files) {
        const std::string source_path = fd.creates_file() ? fd.new_path : fd.old_path;
        const std::string target_path = fd.deletes_file() ? fd.old_path : fd.new_path;

        std::string original;
        if (fd.creates_file()) {
            if (tree.count(target_path)) {
                outcome.patch_log = target_path + ": patch creates a file that already exists";
                return outcome;
            }
        } else {
            auto it = tree.find(source_path);
            if (it == tree.end()) {
                outcome.patch_log = source_path + ": file not found in baseline";
                return outcome;
            }
            original = it->second;
        }

        FileApplyResult r = apply_file_diff(fd, target_path, original);
        if (!r.ok) {
            outcome.patch_log = r.log;
            return outcome;
        }

        if (fd.deletes_file()) {
            if (!r.content.empty()) {
                outcome.patch_log = target_path + ": deletion patch leaves content behind";
                return outcome;
            }
            tree.erase(target_path);
        } else {
            if (!fd.creates_file() && source_path != target_path) tree.erase(source_path);
            tree[target_path] = std::move(r.content);
        }
    }

    outcome.applied = true;
    outcome.patched_tree = std::move(tree);
    return outcome;
}

PatchOutcome apply_patch(const FileTree& baseline, const std::string& diff_text) {
    DiffParseResult parsed = parse_unified_diff(diff_text);
    if (!parsed.diff) {
        PatchOutcome outcome;
        outcome.patch_log = parsed.log;
        return outcome;
    }
    return apply_patch(baseline, *parsed.diff);
}

}  // namespace execforge
