#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptlint/gateway.hpp"
#include "promptlint/rules.hpp"
#include "promptlint/scour.hpp"

namespace promptlint {

struct severity_distribution_row {
    std::string level;
    std::int64_t count = 0;
    int percent = 0;
};

struct severity_distribution {
    std::string scale;  // "epistemic" | "impact"
    std::vector<severity_distribution_row> rows;  // scale order
    std::int64_t total = 0;
};

/// Counts per level in scale order with integer percentages by largest
/// remainder (exactly 100 for non-empty input). The scale is inferred from
/// the severity vocabulary; mixing the epistemic and impact scales throws
/// scale_mismatch_error. Unknown severities throw validation_error.
severity_distribution compute_severity_distribution(
    const std::vector<std::string>& severities);

severity_distribution severity_distribution_of(
    const std::vector<scour_finding>& findings);
severity_distribution severity_distribution_of(
    const std::vector<interference_pattern>& patterns);

struct convergence_row {
    int pass_index = 0;
    std::string model_id;
    std::int64_t new_findings = 0;
    std::int64_t cumulative = 0;
    bool continue_vote = false;
};

/// One row per pass; cumulative is the running sum of new findings.
std::vector<convergence_row> convergence_table(const campaign& c);

struct coverage_matrix {
    std::vector<std::string> models;      // sorted ascending
    std::vector<std::string> categories;  // sorted ascending
    std::vector<std::vector<std::int64_t>> cells;  // [model][category]

    std::int64_t cell(std::string_view model, std::string_view category) const;
    std::int64_t row_sum(std::string_view model) const;
};

coverage_matrix compute_coverage_matrix(const std::vector<scour_finding>& findings);

struct cost_breakdown_result {
    ledger_totals_result totals;
    std::optional<micros> cost_per_finding;  // absent when finding_count == 0
};

/// Per-model totals in descending order plus cost per finding rounded to
/// 3 decimals. cost_per_finding is absent for finding_count 0 and 0 for an
/// empty ledger.
cost_breakdown_result cost_breakdown(const std::vector<cost_record>& records,
                                     std::int64_t finding_count);

inline constexpr std::string_view report_format_version = "promptlint-report/1";

/// Machine formats (JSON with a schema version field).
std::string serialize_severity_distribution(const severity_distribution& dist);
std::string serialize_convergence_table(const std::vector<convergence_row>& rows);
std::string serialize_coverage_matrix(const coverage_matrix& matrix);
std::string serialize_cost_breakdown(const cost_breakdown_result& breakdown);

/// Human formats (aligned plain-text tables).
std::string render_severity_distribution(const severity_distribution& dist);
std::string render_convergence_table(const std::vector<convergence_row>& rows);
std::string render_coverage_matrix(const coverage_matrix& matrix);
std::string render_cost_breakdown(const cost_breakdown_result& breakdown);

}  // namespace promptlint
