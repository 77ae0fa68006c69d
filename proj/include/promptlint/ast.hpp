#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace promptlint {

enum class node_kind {
    document,
    section,
    paragraph,
    directive,
    list,
    list_item,
    code_block,
    metadata,
};

std::string_view to_string(node_kind kind);
node_kind node_kind_from_string(std::string_view name);

struct node {
    node_kind kind = node_kind::document;
    int heading_level = 0;  // 0 when absent; >=1 only for sections
    std::string text;       // raw content; empty for pure containers
    int depth = 0;
    int sibling_index = 0;
    int start_line = 0;  // 1-based inclusive; (0, 0) for an empty document
    int end_line = 0;
    std::vector<node> children;
    std::uint64_t structural_hash = 0;
    std::uint64_t content_hash = 0;
};

struct parse_diagnostic {
    int line = 0;
    std::string message;
};

struct parse_options {
    /// Whole-word priority markers that turn a paragraph or list item into
    /// a directive. Matching is case-sensitive by default.
    std::vector<std::string> directive_markers;
    bool markers_case_sensitive = true;

    static parse_options defaults();
};

struct parse_result {
    node root;
    std::vector<parse_diagnostic> warnings;
};

/// Parse markdown-ish prompt text into a document tree. Sections nest by
/// heading level (ATX `#` headings plus setext underlines), fenced code
/// regions become single code_block nodes, bullet and numbered runs become
/// lists, key:value lines before the first heading become metadata, and a
/// paragraph or list item containing a priority marker becomes a directive.
/// Throws encoding_error on invalid UTF-8. An unterminated fence parses to
/// end of document and attaches a warning.
parse_result parse(std::string_view text);
parse_result parse(std::string_view text, const parse_options& opts);

struct structural_profile {
    std::int64_t node_count = 0;
    int max_depth = 0;
    std::int64_t section_count = 0;
    std::int64_t top_level_directive_count = 0;
    std::int64_t count_per_kind[8] = {0, 0, 0, 0, 0, 0, 0, 0};

    std::int64_t count_of(node_kind kind) const {
        return count_per_kind[static_cast<int>(kind)];
    }
};

structural_profile profile(const node& document);

/// Preorder walk; visit(node, path of sibling indices from the root).
template <typename F>
void walk(const node& n, F&& visit) {
    std::vector<int> path;
    auto rec = [&](auto&& self, const node& cur) -> void {
        visit(cur, path);
        for (const node& child : cur.children) {
            path.push_back(child.sibling_index);
            self(self, child);
            path.pop_back();
        }
    };
    rec(rec, n);
}

/// Node at `path` (sibling indices from the root), or nullptr.
const node* node_at(const node& root, const std::vector<int>& path);

/// Every non-blank source line must be owned by exactly one node, where a
/// node owns the lines of its span not covered by its children. Returns
/// human-readable violations; empty means the invariant holds.
std::vector<std::string> check_line_coverage(const node& root,
                                             std::string_view source);

inline constexpr std::string_view ast_format_version = "promptlint-ast/1+fnv1a64";

/// JSON serialization of a parse, including both hashes and the format
/// version. deserialize_ast rejects unknown format versions.
std::string serialize_ast(const node& root);
node deserialize_ast(std::string_view json_text);

}  // namespace promptlint
