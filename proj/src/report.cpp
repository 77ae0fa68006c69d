#include "promptlint/report.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "nlohmann/json.hpp"
#include "promptlint/errors.hpp"

namespace promptlint {

namespace {

using json = nlohmann::ordered_json;

const std::vector<std::string> epistemic_levels = {"curious", "notable",
                                                   "concerning", "alarming"};
const std::vector<std::string> impact_levels = {"critical", "major", "minor"};

int level_index(const std::vector<std::string>& levels, const std::string& name) {
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] == name) return static_cast<int>(i);
    }
    return -1;
}

}  // namespace

severity_distribution compute_severity_distribution(
    const std::vector<std::string>& severities) {
    severity_distribution dist;
    dist.scale = "epistemic";
    const std::vector<std::string>* levels = &epistemic_levels;

    bool scale_known = false;
    for (const std::string& s : severities) {
        bool epistemic = level_index(epistemic_levels, s) >= 0;
        bool impact = level_index(impact_levels, s) >= 0;
        if (!epistemic && !impact) {
            throw validation_error("unknown severity level: '" + s + "'");
        }
        std::string scale = epistemic ? "epistemic" : "impact";
        if (!scale_known) {
            dist.scale = scale;
            levels = epistemic ? &epistemic_levels : &impact_levels;
            scale_known = true;
        } else if (dist.scale != scale) {
            throw scale_mismatch_error(
                "severity '" + s + "' is on the " + scale +
                " scale but the distribution is on the " + dist.scale + " scale");
        }
    }

    std::vector<std::int64_t> counts(levels->size(), 0);
    for (const std::string& s : severities) {
        counts[static_cast<std::size_t>(level_index(*levels, s))] += 1;
    }
    dist.total = static_cast<std::int64_t>(severities.size());

    // Integer percents by largest remainder so the column sums to 100.
    std::vector<int> percent(levels->size(), 0);
    if (dist.total > 0) {
        std::vector<std::int64_t> remainder(levels->size(), 0);
        int assigned = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            percent[i] = static_cast<int>(100 * counts[i] / dist.total);
            remainder[i] = 100 * counts[i] % dist.total;
            assigned += percent[i];
        }
        std::vector<std::size_t> order(levels->size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
            if (counts[a] != counts[b]) return counts[a] > counts[b];
            return a < b;
        });
        for (std::size_t i = 0; assigned < 100; ++i) {
            percent[order[i]] += 1;
            assigned += 1;
        }
    }

    for (std::size_t i = 0; i < levels->size(); ++i) {
        dist.rows.push_back({(*levels)[i], counts[i], percent[i]});
    }
    return dist;
}

severity_distribution severity_distribution_of(
    const std::vector<scour_finding>& findings) {
    std::vector<std::string> severities;
    severities.reserve(findings.size());
    for (const scour_finding& f : findings) {
        severities.emplace_back(to_string(f.severity));
    }
    return compute_severity_distribution(severities);
}

severity_distribution severity_distribution_of(
    const std::vector<interference_pattern>& patterns) {
    std::vector<std::string> severities;
    severities.reserve(patterns.size());
    for (const interference_pattern& p : patterns) {
        severities.emplace_back(to_string(p.severity));
    }
    return compute_severity_distribution(severities);
}

std::vector<convergence_row> convergence_table(const campaign& c) {
    std::vector<convergence_row> rows;
    std::int64_t cumulative = 0;
    for (const pass_report& p : c.passes) {
        convergence_row row;
        row.pass_index = p.pass_index;
        row.model_id = p.model_id;
        row.new_findings = static_cast<std::int64_t>(p.findings.size());
        cumulative += row.new_findings;
        row.cumulative = cumulative;
        row.continue_vote = p.should_send_another;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::int64_t coverage_matrix::cell(std::string_view model,
                                   std::string_view category) const {
    for (std::size_t m = 0; m < models.size(); ++m) {
        if (models[m] != model) continue;
        for (std::size_t c = 0; c < categories.size(); ++c) {
            if (categories[c] == category) return cells[m][c];
        }
    }
    return 0;
}

std::int64_t coverage_matrix::row_sum(std::string_view model) const {
    for (std::size_t m = 0; m < models.size(); ++m) {
        if (models[m] != model) continue;
        std::int64_t sum = 0;
        for (std::int64_t v : cells[m]) sum += v;
        return sum;
    }
    return 0;
}

coverage_matrix compute_coverage_matrix(
    const std::vector<scour_finding>& findings) {
    coverage_matrix matrix;
    for (const scour_finding& f : findings) {
        matrix.models.push_back(f.model_id);
        matrix.categories.push_back(f.category);
    }
    std::sort(matrix.models.begin(), matrix.models.end());
    matrix.models.erase(std::unique(matrix.models.begin(), matrix.models.end()),
                        matrix.models.end());
    std::sort(matrix.categories.begin(), matrix.categories.end());
    matrix.categories.erase(
        std::unique(matrix.categories.begin(), matrix.categories.end()),
        matrix.categories.end());

    matrix.cells.assign(matrix.models.size(),
                        std::vector<std::int64_t>(matrix.categories.size(), 0));
    for (const scour_finding& f : findings) {
        std::size_t m = static_cast<std::size_t>(
            std::lower_bound(matrix.models.begin(), matrix.models.end(),
                             f.model_id) -
            matrix.models.begin());
        std::size_t c = static_cast<std::size_t>(
            std::lower_bound(matrix.categories.begin(), matrix.categories.end(),
                             f.category) -
            matrix.categories.begin());
        matrix.cells[m][c] += 1;
    }
    return matrix;
}

cost_breakdown_result cost_breakdown(const std::vector<cost_record>& records,
                                     std::int64_t finding_count) {
    cost_breakdown_result result;
    result.totals = ledger_totals(records);
    if (finding_count > 0) {
        micros per = (result.totals.grand_total + finding_count / 2) /
                     finding_count;
        result.cost_per_finding = round_money(per, 3);
    }
    return result;
}

std::string serialize_severity_distribution(const severity_distribution& dist) {
    json j;
    j["format"] = std::string(report_format_version);
    j["kind"] = "severity_distribution";
    j["scale"] = dist.scale;
    j["total"] = dist.total;
    j["rows"] = json::array();
    for (const severity_distribution_row& row : dist.rows) {
        j["rows"].push_back(
            {{"level", row.level}, {"count", row.count}, {"percent", row.percent}});
    }
    return j.dump(2) + "\n";
}

std::string serialize_convergence_table(const std::vector<convergence_row>& rows) {
    json j;
    j["format"] = std::string(report_format_version);
    j["kind"] = "convergence_table";
    j["rows"] = json::array();
    for (const convergence_row& row : rows) {
        j["rows"].push_back({{"pass_index", row.pass_index},
                             {"model_id", row.model_id},
                             {"new_findings", row.new_findings},
                             {"cumulative", row.cumulative},
                             {"continue_vote", row.continue_vote}});
    }
    return j.dump(2) + "\n";
}

std::string serialize_coverage_matrix(const coverage_matrix& matrix) {
    json j;
    j["format"] = std::string(report_format_version);
    j["kind"] = "coverage_matrix";
    j["models"] = matrix.models;
    j["categories"] = matrix.categories;
    j["cells"] = matrix.cells;
    return j.dump(2) + "\n";
}

std::string serialize_cost_breakdown(const cost_breakdown_result& breakdown) {
    json j;
    j["format"] = std::string(report_format_version);
    j["kind"] = "cost_breakdown";
    j["per_model"] = json::array();
    for (const model_total& t : breakdown.totals.per_model) {
        j["per_model"].push_back({{"model_id", t.model_id},
                                  {"calls", t.calls},
                                  {"prompt_tokens", t.prompt_tokens},
                                  {"completion_tokens", t.completion_tokens},
                                  {"total", format_money_exact(t.total)}});
    }
    j["grand_total"] = format_money_exact(breakdown.totals.grand_total);
    j["total_calls"] = breakdown.totals.total_calls;
    if (breakdown.cost_per_finding) {
        j["cost_per_finding"] = format_money_exact(*breakdown.cost_per_finding);
    }
    return j.dump(2) + "\n";
}

namespace {

/// Left-aligned first column, right-aligned numeric columns.
std::string pad_left(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::size_t width_of(const std::vector<std::string>& column) {
    std::size_t w = 0;
    for (const std::string& s : column) w = std::max(w, s.size());
    return w;
}

std::string render_columns(const std::vector<std::vector<std::string>>& columns,
                           std::size_t rows) {
    std::vector<std::size_t> widths;
    widths.reserve(columns.size());
    for (const auto& column : columns) widths.push_back(width_of(column));
    std::ostringstream out;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (c > 0) out << "  ";
            const std::string& cell = columns[c][r];
            out << (c == 0 ? pad_right(cell, widths[c]) : pad_left(cell, widths[c]));
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace

std::string render_severity_distribution(const severity_distribution& dist) {
    std::vector<std::vector<std::string>> columns(3);
    columns[0] = {"level"};
    columns[1] = {"count"};
    columns[2] = {"percent"};
    for (const severity_distribution_row& row : dist.rows) {
        columns[0].push_back(row.level);
        columns[1].push_back(std::to_string(row.count));
        columns[2].push_back(std::to_string(row.percent) + "%");
    }
    std::ostringstream out;
    out << "severity distribution (" << dist.scale << " scale, " << dist.total
        << " total)\n";
    out << render_columns(columns, dist.rows.size() + 1);
    return out.str();
}

std::string render_convergence_table(const std::vector<convergence_row>& rows) {
    std::vector<std::vector<std::string>> columns(5);
    columns[0] = {"pass"};
    columns[1] = {"model"};
    columns[2] = {"new"};
    columns[3] = {"cumulative"};
    columns[4] = {"continue"};
    for (const convergence_row& row : rows) {
        columns[0].push_back(std::to_string(row.pass_index));
        columns[1].push_back(row.model_id);
        columns[2].push_back(std::to_string(row.new_findings));
        columns[3].push_back(std::to_string(row.cumulative));
        columns[4].push_back(row.continue_vote ? "yes" : "no");
    }
    // Pass numbers read better right-aligned; swap the first two columns so
    // the model id anchors the row.
    std::vector<std::vector<std::string>> layout = {columns[1], columns[0],
                                                    columns[2], columns[3],
                                                    columns[4]};
    return render_columns(layout, rows.size() + 1);
}

std::string render_coverage_matrix(const coverage_matrix& matrix) {
    std::vector<std::vector<std::string>> columns(matrix.categories.size() + 2);
    columns[0] = {"model"};
    for (std::size_t c = 0; c < matrix.categories.size(); ++c) {
        columns[c + 1] = {matrix.categories[c]};
    }
    columns.back() = {"total"};
    for (std::size_t m = 0; m < matrix.models.size(); ++m) {
        columns[0].push_back(matrix.models[m]);
        std::int64_t sum = 0;
        for (std::size_t c = 0; c < matrix.categories.size(); ++c) {
            columns[c + 1].push_back(std::to_string(matrix.cells[m][c]));
            sum += matrix.cells[m][c];
        }
        columns.back().push_back(std::to_string(sum));
    }
    return render_columns(columns, matrix.models.size() + 1);
}

std::string render_cost_breakdown(const cost_breakdown_result& breakdown) {
    std::vector<std::vector<std::string>> columns(5);
    columns[0] = {"model"};
    columns[1] = {"calls"};
    columns[2] = {"prompt"};
    columns[3] = {"completion"};
    columns[4] = {"cost"};
    for (const model_total& t : breakdown.totals.per_model) {
        columns[0].push_back(t.model_id);
        columns[1].push_back(std::to_string(t.calls));
        columns[2].push_back(std::to_string(t.prompt_tokens));
        columns[3].push_back(std::to_string(t.completion_tokens));
        columns[4].push_back(format_money(t.total));
    }
    columns[0].push_back("total");
    columns[1].push_back(std::to_string(breakdown.totals.total_calls));
    std::int64_t prompt_sum = 0;
    std::int64_t completion_sum = 0;
    for (const model_total& t : breakdown.totals.per_model) {
        prompt_sum += t.prompt_tokens;
        completion_sum += t.completion_tokens;
    }
    columns[2].push_back(std::to_string(prompt_sum));
    columns[3].push_back(std::to_string(completion_sum));
    columns[4].push_back(format_money(breakdown.totals.grand_total));

    std::ostringstream out;
    out << render_columns(columns, breakdown.totals.per_model.size() + 2);
    if (breakdown.cost_per_finding) {
        out << "cost per finding: " << format_money(*breakdown.cost_per_finding)
            << "\n";
    }
    return out.str();
}

}  // namespace promptlint
