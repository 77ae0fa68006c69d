#include "promptlint/astdiff.hpp"

#include <unordered_map>

#include "nlohmann/json.hpp"
#include "promptlint/errors.hpp"
#include "promptlint/textutil.hpp"

namespace promptlint {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view change_names[] = {"added", "removed", "modified",
                                             "moved", "unchanged"};

struct flat_node {
    const node* n;
    std::vector<int> path;
    std::string own_text;  // normalized
};

std::vector<flat_node> flatten(const node& root) {
    std::vector<flat_node> out;
    walk(root, [&](const node& n, const std::vector<int>& path) {
        out.push_back({&n, path, normalize_whitespace(n.text)});
    });
    return out;
}

}  // namespace

std::string_view to_string(change_kind kind) {
    return change_names[static_cast<int>(kind)];
}

change_kind change_kind_from_string(std::string_view name) {
    for (int i = 0; i < 5; ++i) {
        if (change_names[i] == name) return static_cast<change_kind>(i);
    }
    throw validation_error("unknown change kind: '" + std::string(name) + "'");
}

change_set diff(const node& old_root, const node& new_root) {
    std::vector<flat_node> old_nodes = flatten(old_root);
    std::vector<flat_node> new_nodes = flatten(new_root);

    const std::size_t n_old = old_nodes.size();
    const std::size_t n_new = new_nodes.size();
    std::vector<int> old_match(n_old, -1);  // index into new_nodes
    std::vector<int> new_match(n_new, -1);
    std::vector<change_kind> old_kind(n_old, change_kind::removed);

    // Structural positions are unique within one version, so the structural
    // hash indexes at most one node per side.
    std::unordered_map<std::uint64_t, std::size_t> new_by_structure;
    new_by_structure.reserve(n_new);
    for (std::size_t j = 0; j < n_new; ++j) {
        new_by_structure.emplace(new_nodes[j].n->structural_hash, j);
    }

    // Pass 1: unchanged - same structural position, same own text.
    for (std::size_t i = 0; i < n_old; ++i) {
        auto it = new_by_structure.find(old_nodes[i].n->structural_hash);
        if (it == new_by_structure.end()) continue;
        std::size_t j = it->second;
        if (new_match[j] != -1) continue;
        if (old_nodes[i].own_text == new_nodes[j].own_text) {
            old_match[i] = static_cast<int>(j);
            new_match[j] = static_cast<int>(i);
            old_kind[i] = change_kind::unchanged;
        }
    }

    // Pass 2: moved - unmatched subtree content found at a new structural
    // position, greedily in document order, each node at most once.
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> new_by_content;
    for (std::size_t j = 0; j < n_new; ++j) {
        if (new_match[j] == -1) {
            new_by_content[new_nodes[j].n->content_hash].push_back(j);
        }
    }
    std::unordered_map<std::uint64_t, std::size_t> new_by_content_cursor;
    for (std::size_t i = 0; i < n_old; ++i) {
        if (old_match[i] != -1) continue;
        auto it = new_by_content.find(old_nodes[i].n->content_hash);
        if (it == new_by_content.end()) continue;
        std::size_t& cursor = new_by_content_cursor[old_nodes[i].n->content_hash];
        while (cursor < it->second.size() && new_match[it->second[cursor]] != -1) {
            ++cursor;
        }
        if (cursor >= it->second.size()) continue;
        std::size_t j = it->second[cursor];
        if (new_nodes[j].n->structural_hash == old_nodes[i].n->structural_hash) {
            // Same position and same content but a different own text
            // distribution within the subtree; treat as modified below.
            continue;
        }
        old_match[i] = static_cast<int>(j);
        new_match[j] = static_cast<int>(i);
        old_kind[i] = change_kind::moved;
        ++cursor;
    }

    // Pass 3: modified - structural pair left over on both sides.
    for (std::size_t i = 0; i < n_old; ++i) {
        if (old_match[i] != -1) continue;
        auto it = new_by_structure.find(old_nodes[i].n->structural_hash);
        if (it == new_by_structure.end()) continue;
        std::size_t j = it->second;
        if (new_match[j] != -1) continue;
        old_match[i] = static_cast<int>(j);
        new_match[j] = static_cast<int>(i);
        old_kind[i] = change_kind::modified;
    }

    // Everything else: removed on the old side, added on the new side.
    change_set cs;
    cs.summary = {{change_kind::added, 0},
                  {change_kind::removed, 0},
                  {change_kind::modified, 0},
                  {change_kind::moved, 0},
                  {change_kind::unchanged, 0}};
    for (std::size_t i = 0; i < n_old; ++i) {
        change_entry entry;
        entry.kind = old_match[i] == -1 ? change_kind::removed : old_kind[i];
        entry.old_path = old_nodes[i].path;
        if (old_match[i] != -1) {
            entry.new_path = new_nodes[static_cast<std::size_t>(old_match[i])].path;
        }
        cs.summary[entry.kind] += 1;
        cs.entries.push_back(std::move(entry));
    }
    for (std::size_t j = 0; j < n_new; ++j) {
        if (new_match[j] != -1) continue;
        change_entry entry;
        entry.kind = change_kind::added;
        entry.new_path = new_nodes[j].path;
        cs.summary[entry.kind] += 1;
        cs.entries.push_back(std::move(entry));
    }
    return cs;
}

std::string serialize_change_set(const change_set& cs) {
    json j;
    j["format"] = "promptlint-diff/1";
    json summary;
    for (const auto& [kind, count] : cs.summary) {
        summary[std::string(to_string(kind))] = count;
    }
    j["summary"] = std::move(summary);
    j["entries"] = json::array();
    for (const change_entry& e : cs.entries) {
        json entry;
        entry["kind"] = std::string(to_string(e.kind));
        if (e.old_path) entry["old_path"] = *e.old_path;
        if (e.new_path) entry["new_path"] = *e.new_path;
        j["entries"].push_back(std::move(entry));
    }
    return j.dump(2) + "\n";
}

std::set<channel> session_variance(const std::vector<annotated_document>& sessions) {
    if (sessions.size() < 2) {
        throw contract_error("session variance needs at least 2 sessions");
    }
    std::set<channel> varying;
    const annotated_document& base = sessions.front();
    for (std::size_t s = 1; s < sessions.size(); ++s) {
        const annotated_document& other = sessions[s];
        change_set cs = diff(base.root, other.root);
        for (const change_entry& e : cs.entries) {
            if (e.kind == change_kind::unchanged) continue;
            if (e.old_path && !e.old_path->empty()) {
                auto it = base.annotations.find(*e.old_path);
                if (it != base.annotations.end()) {
                    varying.insert(it->second.node_channel);
                }
            }
            if (e.new_path && !e.new_path->empty()) {
                auto it = other.annotations.find(*e.new_path);
                if (it != other.annotations.end()) {
                    varying.insert(it->second.node_channel);
                }
            }
        }
    }
    return varying;
}

}  // namespace promptlint
