#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "fixture_support.hpp"
#include "promptlint/errors.hpp"
#include "promptlint/gateway.hpp"
#include "promptlint/report.hpp"
#include "promptlint/rules.hpp"
#include "promptlint/scour.hpp"

using namespace promptlint;
using fixture_support::fixture_path;
using fixture_support::read_file;
using fixture_support::scratch_dir;

namespace {

std::vector<std::string> repeat_levels(
    const std::vector<std::pair<std::string, int>>& spec) {
    std::vector<std::string> out;
    for (const auto& [level, count] : spec) {
        for (int i = 0; i < count; ++i) out.push_back(level);
    }
    return out;
}

std::vector<int> percents(const severity_distribution& dist) {
    std::vector<int> out;
    for (const auto& row : dist.rows) out.push_back(row.percent);
    return out;
}

std::vector<std::int64_t> counts(const severity_distribution& dist) {
    std::vector<std::int64_t> out;
    for (const auto& row : dist.rows) out.push_back(row.count);
    return out;
}

campaign replay_campaign(const fixture_support::campaign_spec& spec,
                         const std::string& target_fixture) {
    std::string dir = scratch_dir("report-replay");
    std::string target = read_file(fixture_path(target_fixture));
    fixture_support::make_campaign_store(dir, spec, target);
    cost_ledger ledger;
    replay_gateway gw(dir, ledger);
    campaign_options opts;
    opts.k = spec.k;
    return run_campaign(target, spec.roster, gw, opts);
}

std::vector<scour_finding> all_findings(const campaign& c) {
    std::vector<scour_finding> out;
    for (const pass_report& p : c.passes) {
        out.insert(out.end(), p.findings.begin(), p.findings.end());
    }
    return out;
}

scour_finding mk_finding(const std::string& model, const std::string& category) {
    scour_finding f;
    f.model_id = model;
    f.category = category;
    f.severity = scour_severity::notable;
    return f;
}

}  // namespace

TEST_CASE("integer percents follow largest remainder") {
    SUBCASE("a near-uniform epistemic mix") {
        severity_distribution dist =
            compute_severity_distribution(repeat_levels({{"curious", 34},
                                                         {"notable", 36},
                                                         {"concerning", 34},
                                                         {"alarming", 12}}));
        CHECK(dist.scale == "epistemic");
        CHECK(dist.total == 116);
        CHECK(counts(dist) == std::vector<std::int64_t>{34, 36, 34, 12});
        CHECK(percents(dist) == std::vector<int>{29, 31, 29, 11});
    }
    SUBCASE("a notable-heavy mix") {
        severity_distribution dist = compute_severity_distribution(
            repeat_levels({{"curious", 3}, {"notable", 7}, {"concerning", 5}}));
        CHECK(counts(dist) == std::vector<std::int64_t>{3, 7, 5, 0});
        CHECK(percents(dist) == std::vector<int>{20, 47, 33, 0});
    }
    SUBCASE("a mix whose floors leave two points to assign") {
        severity_distribution dist =
            compute_severity_distribution(repeat_levels({{"curious", 4},
                                                         {"notable", 9},
                                                         {"concerning", 6},
                                                         {"alarming", 2}}));
        CHECK(counts(dist) == std::vector<std::int64_t>{4, 9, 6, 2});
        CHECK(percents(dist) == std::vector<int>{19, 43, 29, 9});
    }
    SUBCASE("remainder ties break toward the front of the scale") {
        severity_distribution dist = compute_severity_distribution(
            repeat_levels({{"critical", 1}, {"major", 1}, {"minor", 1}}));
        CHECK(dist.scale == "impact");
        CHECK(percents(dist) == std::vector<int>{34, 33, 33});
    }
    SUBCASE("percents of a non-empty input always sum to 100") {
        for (int a = 0; a <= 6; ++a) {
            for (int b = 0; b <= 6; ++b) {
                for (int c = 0; c <= 6; ++c) {
                    if (a + b + c == 0) continue;
                    severity_distribution dist = compute_severity_distribution(
                        repeat_levels({{"critical", a}, {"major", b},
                                       {"minor", c}}));
                    int sum = 0;
                    for (int p : percents(dist)) sum += p;
                    CHECK(sum == 100);
                }
            }
        }
    }
}

TEST_CASE("the scale is inferred and enforced") {
    severity_distribution impact =
        compute_severity_distribution({"minor", "minor", "critical"});
    CHECK(impact.scale == "impact");
    REQUIRE(impact.rows.size() == 3);
    CHECK(impact.rows[0].level == "critical");
    CHECK(impact.rows[1].level == "major");
    CHECK(impact.rows[2].level == "minor");

    CHECK_THROWS_AS(compute_severity_distribution({"minor", "curious"}),
                    scale_mismatch_error);
    CHECK_THROWS_AS(compute_severity_distribution({"curious", "minor"}),
                    scale_mismatch_error);
    CHECK_THROWS_AS(compute_severity_distribution({"harmless"}), validation_error);

    severity_distribution empty = compute_severity_distribution({});
    CHECK(empty.scale == "epistemic");
    CHECK(empty.total == 0);
    REQUIRE(empty.rows.size() == 4);
    for (const auto& row : empty.rows) {
        CHECK(row.count == 0);
        CHECK(row.percent == 0);
    }
}

TEST_CASE("distributions lift out of findings and patterns") {
    std::vector<scour_finding> findings(3);
    findings[0].severity = scour_severity::alarming;
    findings[1].severity = scour_severity::alarming;
    findings[2].severity = scour_severity::curious;
    severity_distribution dist = severity_distribution_of(findings);
    CHECK(dist.scale == "epistemic");
    CHECK(counts(dist) == std::vector<std::int64_t>{1, 0, 0, 2});

    std::vector<interference_pattern> patterns(21);
    for (int i = 0; i < 4; ++i) patterns[i].severity = impact_severity::critical;
    for (int i = 4; i < 7; ++i) patterns[i].severity = impact_severity::major;
    for (int i = 7; i < 21; ++i) patterns[i].severity = impact_severity::minor;
    severity_distribution pd = severity_distribution_of(patterns);
    CHECK(pd.scale == "impact");
    CHECK(counts(pd) == std::vector<std::int64_t>{4, 3, 14});
    CHECK(percents(pd) == std::vector<int>{19, 14, 67});
}

TEST_CASE("the convergence table tracks a long campaign") {
    campaign c = replay_campaign(fixture_support::campaign_a(),
                                 "prompts/target_a.md");
    REQUIRE(c.status == campaign_status::converged);
    std::vector<convergence_row> rows = convergence_table(c);
    REQUIRE(rows.size() == 10);

    CHECK(rows[0].pass_index == 1);
    CHECK(rows[0].model_id == "claude-opus-4.6");
    CHECK(rows[0].new_findings == 21);
    CHECK(rows[0].cumulative == 21);
    CHECK(rows[0].continue_vote);

    CHECK(rows[6].pass_index == 7);
    CHECK(rows[6].model_id == "minimax-m2.5");
    CHECK(rows[6].new_findings == 20);
    CHECK(rows[6].cumulative == 91);
    CHECK(rows[6].continue_vote);

    CHECK(rows[9].cumulative == 116);
    CHECK_FALSE(rows[9].continue_vote);

    std::vector<std::int64_t> want = {21, 9, 14, 12, 10, 5, 20, 3, 14, 8};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].new_findings == want[i]);
    }
}

TEST_CASE("the coverage matrix is sorted on both axes") {
    std::vector<scour_finding> findings = {
        mk_finding("zeta", "security"),   mk_finding("alpha", "tooling"),
        mk_finding("alpha", "security"),  mk_finding("alpha", "security"),
        mk_finding("mid", "consistency"), mk_finding("zeta", "tooling"),
    };
    coverage_matrix matrix = compute_coverage_matrix(findings);
    CHECK(matrix.models == std::vector<std::string>{"alpha", "mid", "zeta"});
    CHECK(matrix.categories ==
          std::vector<std::string>{"consistency", "security", "tooling"});
    CHECK(matrix.cell("alpha", "security") == 2);
    CHECK(matrix.cell("alpha", "tooling") == 1);
    CHECK(matrix.cell("mid", "consistency") == 1);
    CHECK(matrix.cell("mid", "security") == 0);
    CHECK(matrix.cell("nobody", "security") == 0);
    CHECK(matrix.cell("alpha", "novel") == 0);
    CHECK(matrix.row_sum("alpha") == 3);
    CHECK(matrix.row_sum("zeta") == 2);
    CHECK(matrix.row_sum("nobody") == 0);

    coverage_matrix empty = compute_coverage_matrix({});
    CHECK(empty.models.empty());
    CHECK(empty.categories.empty());
    CHECK(empty.cell("x", "y") == 0);
}

TEST_CASE("cost breakdown divides the ledger over the findings") {
    std::vector<cost_record> records = fixture_support::cross_vendor_ledger();

    SUBCASE("the cross vendor ledger at 152 findings") {
        cost_breakdown_result r = cost_breakdown(records, 152);
        CHECK(r.totals.grand_total == 263000);
        CHECK(r.totals.total_calls == 26);
        REQUIRE(!r.totals.per_model.empty());
        CHECK(r.totals.per_model[0].model_id == "kimi-k2.5");
        CHECK(r.totals.per_model[0].total == 54000);
        REQUIRE(r.cost_per_finding.has_value());
        CHECK(*r.cost_per_finding == 2000);
    }
    SUBCASE("an empty ledger still prices findings at zero") {
        cost_breakdown_result r = cost_breakdown({}, 152);
        CHECK(r.totals.grand_total == 0);
        CHECK(r.totals.per_model.empty());
        REQUIRE(r.cost_per_finding.has_value());
        CHECK(*r.cost_per_finding == 0);
    }
    SUBCASE("no findings means no per-finding price") {
        cost_breakdown_result r = cost_breakdown(records, 0);
        CHECK(r.totals.grand_total == 263000);
        CHECK_FALSE(r.cost_per_finding.has_value());
    }
}

TEST_CASE("serialized reports carry the format and kind") {
    severity_distribution dist =
        compute_severity_distribution({"minor", "major", "major"});
    std::string sd = serialize_severity_distribution(dist);
    CHECK(sd.find("promptlint-report/1") != std::string::npos);
    CHECK(sd.find("\"kind\": \"severity_distribution\"") != std::string::npos);
    CHECK(sd.find("\"scale\": \"impact\"") != std::string::npos);

    campaign c = replay_campaign(fixture_support::campaign_c(),
                                 "prompts/target_c.md");
    std::string ct = serialize_convergence_table(convergence_table(c));
    CHECK(ct.find("\"kind\": \"convergence_table\"") != std::string::npos);
    CHECK(ct.find("\"cumulative\": 21") != std::string::npos);

    coverage_matrix matrix = compute_coverage_matrix(all_findings(c));
    std::string cm = serialize_coverage_matrix(matrix);
    CHECK(cm.find("\"kind\": \"coverage_matrix\"") != std::string::npos);
    CHECK(cm.find("\"models\"") != std::string::npos);

    cost_breakdown_result r =
        cost_breakdown(fixture_support::cross_vendor_ledger(), 152);
    std::string cb = serialize_cost_breakdown(r);
    CHECK(cb.find("\"kind\": \"cost_breakdown\"") != std::string::npos);
    CHECK(cb.find("\"grand_total\": \"$0.263\"") != std::string::npos);
    CHECK(cb.find("\"cost_per_finding\": \"$0.002\"") != std::string::npos);

    cost_breakdown_result no_findings =
        cost_breakdown(fixture_support::cross_vendor_ledger(), 0);
    CHECK(serialize_cost_breakdown(no_findings).find("cost_per_finding") ==
          std::string::npos);
}

TEST_CASE("rendered reports read as aligned tables") {
    severity_distribution dist =
        compute_severity_distribution(repeat_levels({{"curious", 34},
                                                     {"notable", 36},
                                                     {"concerning", 34},
                                                     {"alarming", 12}}));
    std::string sd = render_severity_distribution(dist);
    CHECK(sd.find("severity distribution (epistemic scale, 116 total)") !=
          std::string::npos);
    CHECK(sd.find("31%") != std::string::npos);

    campaign c = replay_campaign(fixture_support::campaign_a(),
                                 "prompts/target_a.md");
    std::string ct = render_convergence_table(convergence_table(c));
    CHECK(ct.find("minimax-m2.5") != std::string::npos);
    CHECK(ct.find("cumulative") != std::string::npos);

    std::string cm = render_coverage_matrix(compute_coverage_matrix(
        {mk_finding("m1", "security"), mk_finding("m2", "tooling")}));
    CHECK(cm.find("model") != std::string::npos);
    CHECK(cm.find("total") != std::string::npos);

    cost_breakdown_result r =
        cost_breakdown(fixture_support::cross_vendor_ledger(), 152);
    std::string cb = render_cost_breakdown(r);
    CHECK(cb.find("kimi-k2.5") != std::string::npos);
    CHECK(cb.find("cost per finding: $0.002") != std::string::npos);
    CHECK(cb.find("$0.263") != std::string::npos);
}
