#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "promptlint/gateway.hpp"

namespace promptlint {

enum class scour_severity { curious, notable, concerning, alarming };

std::string_view to_string(scour_severity s);
scour_severity scour_severity_from_string(std::string_view name);

struct scour_finding {
    std::string id;
    int pass_index = 0;  // 1-based
    std::string model_id;
    std::string category;  // freeform, the model's own words
    scour_severity severity = scour_severity::curious;
    std::string title;
    std::string description;
    std::optional<std::pair<int, int>> location;  // line span in the target
};

struct pass_report {
    int pass_index = 0;
    std::string model_id;
    std::vector<scour_finding> findings;
    std::vector<std::string> unexplored;
    bool should_send_another = true;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

enum class campaign_status { converged, roster_exhausted, max_passes, aborted };

std::string_view to_string(campaign_status s);
campaign_status campaign_status_from_string(std::string_view name);

struct campaign {
    std::string target_id;
    std::vector<std::string> roster;
    int threshold_k = 3;
    std::vector<pass_report> passes;
    campaign_status status = campaign_status::max_passes;

    std::int64_t total_findings() const;
};

/// First-pass exploration prompt with the target embedded and the
/// structured-output contract appended. Throws contract_error on an
/// empty target.
std::string render_first_prompt(std::string_view target_text);

/// Follow-up prompt carrying the full map of prior passes: every finding
/// (title, category, severity) and every unexplored note, plus the
/// diminishing-returns instruction block. Throws contract_error when
/// prior is empty.
std::string render_followup_prompt(std::string_view target_text,
                                   const std::vector<pass_report>& prior);

/// Extract the fenced structured block from a model response. Severities
/// outside the four-level scale or a missing continue vote throw
/// parse_error with the raw text attached. Finding ids default to
/// "p<pass>-f<index>" when the model omits them.
pass_report parse_pass_response(std::string_view raw, int pass_index,
                                const std::string& model_id);

/// True iff the last k passes exist and all voted not to continue.
bool check_convergence(const std::vector<pass_report>& passes, int k);

struct campaign_options {
    std::string target_id = "target";
    int k = 3;
    int max_passes = 0;  // 0 means the roster length
    int gateway_retries = 1;
    std::string state_file;  // append-only JSONL log; empty disables
};

/// Strictly sequential passes; pass i uses roster[i-1]; each pass receives
/// the full map of all prior passes. Terminates on convergence, roster
/// exhaustion, or max_passes. Gateway failure after the configured retries,
/// or unparseable output after one re-ask, aborts with partial results.
campaign run_campaign(std::string_view target_text,
                      const std::vector<std::string>& roster,
                      llm_gateway& gateway, const campaign_options& opts);

inline constexpr std::string_view campaign_format_version = "promptlint-campaign/1";

std::string serialize_campaign(const campaign& c);
campaign deserialize_campaign(std::string_view json_text);

}  // namespace promptlint
