#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "promptlint/ast.hpp"

namespace promptlint {

enum class role {
    identity,
    policy,
    safety,
    tool_usage,
    workflow,
    format,
    memory_policy,
    environment,
    meta,
    unclassified,
};

enum class channel {
    behavior,
    tool_schema,
    memory,
    environment,
};

std::string_view to_string(role r);
role role_from_string(std::string_view name);
std::string_view to_string(channel c);
channel channel_from_string(std::string_view name);

/// Fixed total map: tool_usage -> tool_schema, memory_policy -> memory,
/// environment -> environment, everything else -> behavior.
channel channel_of(role r);

enum class annotation_provenance { keyword, heading, fallback };

std::string_view to_string(annotation_provenance p);

struct annotation {
    role node_role = role::unclassified;
    channel node_channel = channel::behavior;
    annotation_provenance provenance = annotation_provenance::fallback;
};

struct role_lexicon_entry {
    role target = role::unclassified;
    std::vector<std::string> heading_patterns;
    std::vector<std::string> keyword_patterns;
    bool case_insensitive = true;
};

struct role_lexicon {
    std::vector<role_lexicon_entry> entries;

    static role_lexicon defaults();
};

/// Load a lexicon config: {"roles": [{"role": ..., "headings": [...],
/// "keywords": [...], "case_insensitive": bool}]}.
role_lexicon load_lexicon(std::string_view json_text);
std::string serialize_lexicon(const role_lexicon& lex);

struct annotated_document {
    node root;
    /// One annotation per node, keyed by the path of sibling indices.
    std::map<std::vector<int>, annotation> annotations;

    const annotation& at(const std::vector<int>& path) const;
};

/// Assign a role and channel to every node. Precedence: nearest ancestor
/// section (a section counts as its own ancestor) whose heading matches a
/// role's heading lexicon, then node-local keyword match, then unclassified.
annotated_document annotate(const node& document);
annotated_document annotate(const node& document, const role_lexicon& lex);

struct channel_distribution_result {
    std::map<channel, double> fractions;  // over non-document nodes, sums to 1
    double unclassified_fraction = 0.0;   // reported separately
    std::int64_t node_count = 0;          // non-document nodes
};

/// Throws contract_error when the document has no non-document nodes.
channel_distribution_result channel_distribution(const annotated_document& doc);

}  // namespace promptlint
