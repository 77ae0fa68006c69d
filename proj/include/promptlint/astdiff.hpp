#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "promptlint/annotate.hpp"
#include "promptlint/ast.hpp"

namespace promptlint {

enum class change_kind { added, removed, modified, moved, unchanged };

std::string_view to_string(change_kind kind);
change_kind change_kind_from_string(std::string_view name);

struct change_entry {
    change_kind kind = change_kind::unchanged;
    std::optional<std::vector<int>> old_path;
    std::optional<std::vector<int>> new_path;
};

struct change_set {
    std::vector<change_entry> entries;
    std::map<change_kind, std::int64_t> summary;

    std::int64_t count(change_kind kind) const {
        auto it = summary.find(kind);
        return it == summary.end() ? 0 : it->second;
    }
};

/// Classify every node of both versions. A node keeps its classification
/// from exactly one of:
///   unchanged - same structural hash, same normalized own text;
///   moved     - subtree content found at a different structural position,
///               matched greedily in document order, each node at most once;
///   modified  - same structural hash, text differs, content not relocated;
///   removed/added - everything left over.
/// Entries are in old-document order, then new-document order for added.
change_set diff(const node& old_root, const node& new_root);

std::string serialize_change_set(const change_set& cs);

/// Channels touched by any non-unchanged node when sessions 2..n are each
/// diffed against the first. Empty set means full invariance.
/// Throws contract_error for fewer than 2 sessions.
std::set<channel> session_variance(const std::vector<annotated_document>& sessions);

}  // namespace promptlint
