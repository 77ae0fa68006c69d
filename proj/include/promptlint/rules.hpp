#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptlint/blocks.hpp"
#include "promptlint/gateway.hpp"

namespace promptlint {

enum class detection_mode { structural, llm, hybrid };
enum class impact_severity { critical, major, minor };  // critical > major > minor

std::string_view to_string(detection_mode m);
detection_mode detection_mode_from_string(std::string_view name);
std::string_view to_string(impact_severity s);
impact_severity impact_severity_from_string(std::string_view name);

struct rule {
    std::string id;
    std::string interference_type;
    detection_mode mode = detection_mode::structural;
    /// Prefilter: when non-empty, the unordered pair of modalities must
    /// equal this set; scope overlap is required when the flag is set.
    std::vector<block_modality> required_modalities;
    bool require_scope_overlap = true;
    std::string prompt_template;  // required for llm/hybrid
    impact_severity max_severity = impact_severity::minor;
};

/// The five built-in rules: mandate_prohibition (hybrid), scope_overlap_redundancy
/// (llm), priority_marker_ambiguity (structural), implicit_dependency (llm),
/// verbatim_duplication (structural).
std::vector<rule> builtin_rules();

/// Rule definition file: {"format": "promptlint-rules/1", "rules": [...]}.
std::vector<rule> load_rules(std::string_view json_text);
std::string serialize_rules(const std::vector<rule>& rules);

inline constexpr std::string_view rules_format_version = "promptlint-rules/1";

struct interference_pattern {
    std::string rule_id;
    std::string block_a;
    std::string block_b;
    impact_severity severity = impact_severity::minor;
    std::string rationale;
    bool statically_detectable = false;
    std::string detection_provenance;  // structural | llm
};

/// Upper-bound arithmetic over ordered pairs including self-pairs: n^2 * r.
std::int64_t full_search_space(std::int64_t block_count, std::int64_t rule_count);

/// Ordered pairs (a before b in document order, a != b) passing the rule's
/// modality and scope constraints; sorted by (a.id, b.id).
std::vector<std::pair<const block*, const block*>> prefilter(
    const block_set& blocks, const rule& r);

struct pattern_options {
    std::size_t duplication_min_length = 40;
    std::vector<std::string> priority_markers;  // defaults to the parse lexicon
    std::size_t shared_token_min_length = 4;
};

/// Structural predicates. Throws contract_error when rule.mode == llm.
/// For hybrid rules this returns the unconfirmed critical candidate.
std::optional<interference_pattern> eval_structural(
    const rule& r, const block& a, const block& b,
    const pattern_options& opts = {});

/// Renders the rule template and parses the mandated verdict. Absent when
/// the verdict says no interference. One re-ask retry on malformed output;
/// a second failure throws parse_error with the raw text.
std::optional<interference_pattern> eval_llm(const rule& r, const block& a,
                                             const block& b, llm_gateway& gateway,
                                             const std::string& model_id);

/// The prompt eval_llm sends; exposed for replay tooling.
std::string render_rule_prompt(const rule& r, const block& a, const block& b);

struct run_report {
    std::map<std::string, std::int64_t> pairs_per_rule;
    std::int64_t evaluations = 0;
    std::int64_t llm_calls = 0;
    std::vector<std::string> errors;
};

struct directed_result {
    std::vector<interference_pattern> patterns;  // severity desc, rule_id, ids
    run_report report;
};

struct run_options {
    std::string model_id = "lint-judge";
    int jobs = 1;
};

/// Evaluate every prefiltered pair of every rule exactly once. gateway may
/// be null for structural-only rule sets; an llm/hybrid evaluation with a
/// null gateway records an error for that pair. Per-pair evaluation errors
/// never abort the run.
directed_result run_directed(const block_set& blocks, const std::vector<rule>& rules,
                             llm_gateway* gateway, const run_options& opts = {});

std::string serialize_patterns(const std::vector<interference_pattern>& patterns,
                               const run_report& report);

}  // namespace promptlint
