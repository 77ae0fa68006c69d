#include "promptlint/annotate.hpp"

#include <array>
#include <optional>

#include "nlohmann/json.hpp"
#include "promptlint/errors.hpp"
#include "promptlint/textutil.hpp"

namespace promptlint {

namespace {

using json = nlohmann::ordered_json;

constexpr std::array<std::string_view, 10> role_names = {
    "identity", "policy",        "safety",      "tool_usage", "workflow",
    "format",   "memory_policy", "environment", "meta",       "unclassified",
};

constexpr std::array<std::string_view, 4> channel_names = {
    "behavior",
    "tool_schema",
    "memory",
    "environment",
};

}  // namespace

std::string_view to_string(role r) { return role_names[static_cast<int>(r)]; }

role role_from_string(std::string_view name) {
    for (std::size_t i = 0; i < role_names.size(); ++i) {
        if (role_names[i] == name) return static_cast<role>(i);
    }
    throw validation_error("unknown role: '" + std::string(name) + "'");
}

std::string_view to_string(channel c) {
    return channel_names[static_cast<int>(c)];
}

channel channel_from_string(std::string_view name) {
    for (std::size_t i = 0; i < channel_names.size(); ++i) {
        if (channel_names[i] == name) return static_cast<channel>(i);
    }
    throw validation_error("unknown channel: '" + std::string(name) + "'");
}

channel channel_of(role r) {
    switch (r) {
        case role::tool_usage: return channel::tool_schema;
        case role::memory_policy: return channel::memory;
        case role::environment: return channel::environment;
        default: return channel::behavior;
    }
}

std::string_view to_string(annotation_provenance p) {
    switch (p) {
        case annotation_provenance::keyword: return "keyword";
        case annotation_provenance::heading: return "heading";
        default: return "default";
    }
}

role_lexicon role_lexicon::defaults() {
    role_lexicon lex;
    auto add = [&](role r, std::vector<std::string> headings,
                   std::vector<std::string> keywords) {
        lex.entries.push_back({r, std::move(headings), std::move(keywords), true});
    };
    add(role::identity, {"identity", "who you are", "persona"},
        {"you are an", "your name is"});
    add(role::policy, {"policy", "policies", "rules", "guidelines", "conventions"},
        {"policy"});
    add(role::safety, {"safety", "security"},
        {"destructive", "malicious", "secrets", "credentials"});
    add(role::tool_usage, {"tool usage", "tools", "tool use", "available tools"},
        {"todowrite", "invoke the tool", "tool call"});
    add(role::workflow, {"workflow", "doing tasks", "task management", "process"},
        {"workflow"});
    add(role::format, {"format", "output style", "code style", "tone", "style"},
        {"output format", "markdown formatting"});
    add(role::memory_policy, {"memory", "auto memory", "memory policy"},
        {"memory file", "remember across sessions"});
    add(role::environment, {"environment", "environment info"},
        {"cwd", "working directory", "platform", "os version", "git status"});
    add(role::meta, {"meta", "about this document", "notes to the reader"},
        {"this document"});
    return lex;
}

role_lexicon load_lexicon(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) {
        throw config_error("malformed lexicon JSON");
    }
    role_lexicon lex;
    for (const json& entry : j.at("roles")) {
        role_lexicon_entry e;
        e.target = role_from_string(entry.at("role").get<std::string>());
        for (const json& p : entry.value("headings", json::array())) {
            e.heading_patterns.push_back(p.get<std::string>());
        }
        for (const json& p : entry.value("keywords", json::array())) {
            e.keyword_patterns.push_back(p.get<std::string>());
        }
        e.case_insensitive = entry.value("case_insensitive", true);
        lex.entries.push_back(std::move(e));
    }
    return lex;
}

std::string serialize_lexicon(const role_lexicon& lex) {
    json j;
    j["roles"] = json::array();
    for (const role_lexicon_entry& e : lex.entries) {
        json entry;
        entry["role"] = std::string(to_string(e.target));
        entry["headings"] = e.heading_patterns;
        entry["keywords"] = e.keyword_patterns;
        entry["case_insensitive"] = e.case_insensitive;
        j["roles"].push_back(std::move(entry));
    }
    return j.dump(2) + "\n";
}

const annotation& annotated_document::at(const std::vector<int>& path) const {
    auto it = annotations.find(path);
    if (it == annotations.end()) {
        throw contract_error("no annotation at the requested path");
    }
    return it->second;
}

namespace {

bool heading_matches(const role_lexicon_entry& e, const std::string& heading) {
    return contains_any_phrase(heading, e.heading_patterns, e.case_insensitive);
}

bool keywords_match(const role_lexicon_entry& e, const std::string& text) {
    return contains_any_phrase(text, e.keyword_patterns, e.case_insensitive);
}

}  // namespace

annotated_document annotate(const node& document) {
    return annotate(document, role_lexicon::defaults());
}

annotated_document annotate(const node& document, const role_lexicon& lex) {
    annotated_document doc;
    doc.root = document;

    // heading_role[i]: role of the nearest enclosing role-bearing section at
    // the current point of the walk, maintained as a stack.
    std::vector<std::optional<role>> section_stack;

    auto rec = [&](auto&& self, const node& n, std::vector<int>& path) -> void {
        std::optional<role> own_heading_role;
        if (n.kind == node_kind::section) {
            for (const role_lexicon_entry& e : lex.entries) {
                if (heading_matches(e, n.text)) {
                    own_heading_role = e.target;
                    break;
                }
            }
        }

        std::optional<role> heading_role = own_heading_role;
        if (!heading_role) {
            for (auto it = section_stack.rbegin(); it != section_stack.rend(); ++it) {
                if (it->has_value()) {
                    heading_role = **it;
                    break;
                }
            }
        }

        annotation a;
        if (heading_role) {
            a.node_role = *heading_role;
            a.provenance = annotation_provenance::heading;
        } else {
            a.node_role = role::unclassified;
            a.provenance = annotation_provenance::fallback;
            for (const role_lexicon_entry& e : lex.entries) {
                if (!n.text.empty() && keywords_match(e, n.text)) {
                    a.node_role = e.target;
                    a.provenance = annotation_provenance::keyword;
                    break;
                }
            }
        }
        a.node_channel = channel_of(a.node_role);
        doc.annotations.emplace(path, a);

        bool pushed = false;
        if (n.kind == node_kind::section) {
            section_stack.push_back(own_heading_role);
            pushed = true;
        }
        for (const node& child : n.children) {
            path.push_back(child.sibling_index);
            self(self, child, path);
            path.pop_back();
        }
        if (pushed) section_stack.pop_back();
    };

    std::vector<int> path;
    rec(rec, document, path);
    return doc;
}

channel_distribution_result channel_distribution(const annotated_document& doc) {
    channel_distribution_result result;
    result.fractions = {{channel::behavior, 0.0},
                        {channel::tool_schema, 0.0},
                        {channel::memory, 0.0},
                        {channel::environment, 0.0}};
    std::int64_t unclassified = 0;
    for (const auto& [path, a] : doc.annotations) {
        if (path.empty()) continue;  // the document node itself
        result.node_count += 1;
        result.fractions[a.node_channel] += 1.0;
        if (a.node_role == role::unclassified) unclassified += 1;
    }
    if (result.node_count == 0) {
        throw contract_error("channel distribution is undefined for an empty document");
    }
    for (auto& [c, f] : result.fractions) {
        f /= static_cast<double>(result.node_count);
    }
    result.unclassified_fraction =
        static_cast<double>(unclassified) / static_cast<double>(result.node_count);
    return result;
}

}  // namespace promptlint
