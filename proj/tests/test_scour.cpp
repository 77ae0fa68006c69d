#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fixture_support.hpp"
#include "promptlint/errors.hpp"
#include "promptlint/gateway.hpp"
#include "promptlint/scour.hpp"

using namespace promptlint;
using fixture_support::fixture_path;
using fixture_support::read_file;
using fixture_support::scratch_dir;

namespace {

std::string fenced(const std::string& body) {
    return "Notes first.\n\n```json\n" + body + "\n```\n";
}

std::string pass_reply(int findings, bool vote) {
    std::string body = "{\"findings\": [";
    for (int i = 0; i < findings; ++i) {
        if (i) body += ", ";
        body += R"({"category": "structure", "severity": "notable",
                    "title": "finding )" +
                std::to_string(i + 1) + "\"}";
    }
    body += "], \"unexplored\": [], \"should_send_another\": ";
    body += vote ? "true" : "false";
    body += "}";
    return fenced(body);
}

pass_report mk_pass(int index, bool vote) {
    pass_report p;
    p.pass_index = index;
    p.model_id = "m" + std::to_string(index);
    p.should_send_another = vote;
    return p;
}

}  // namespace

TEST_CASE("scour severity names round trip") {
    for (scour_severity s : {scour_severity::curious, scour_severity::notable,
                             scour_severity::concerning, scour_severity::alarming}) {
        CHECK(scour_severity_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(scour_severity_from_string("critical"), validation_error);
    for (campaign_status s :
         {campaign_status::converged, campaign_status::roster_exhausted,
          campaign_status::max_passes, campaign_status::aborted}) {
        CHECK(campaign_status_from_string(to_string(s)) == s);
    }
}

TEST_CASE("the first prompt embeds the target and the contract") {
    std::string target = read_file(fixture_path("prompts/target_b.md"));
    std::string prompt = render_first_prompt(target);
    CHECK(prompt.find("terse code review assistant") != std::string::npos);
    CHECK(prompt.find("should_send_another") != std::string::npos);
    CHECK(prompt.find("unexplored") != std::string::npos);
    CHECK_THROWS_AS(render_first_prompt(""), contract_error);
}

TEST_CASE("follow-up prompts carry the full prior map") {
    std::vector<pass_report> prior;
    pass_report p1 = mk_pass(1, true);
    scour_finding f;
    f.id = "p1-f1";
    f.category = "tooling";
    f.severity = scour_severity::concerning;
    f.title = "ambiguous tool precedence";
    p1.findings.push_back(f);
    p1.unexplored.push_back("the memory section");
    prior.push_back(p1);

    std::string prompt = render_followup_prompt("target body", prior);
    CHECK(prompt.find("target body") != std::string::npos);
    CHECK(prompt.find("ambiguous tool precedence") != std::string::npos);
    CHECK(prompt.find("the memory section") != std::string::npos);
    CHECK(prompt.find("concerning") != std::string::npos);
    CHECK_THROWS_AS(render_followup_prompt("x", {}), contract_error);
}

TEST_CASE("pass responses parse the documented schema") {
    SUBCASE("defaults fill in") {
        std::string raw = fenced(
            R"({"findings": [{"severity": "curious"},
                             {"id": "named", "category": "security",
                              "severity": "alarming", "title": "t",
                              "description": "d", "location": [3, 9]}],
                "unexplored": ["dark corner"],
                "should_send_another": true})");
        pass_report p = parse_pass_response(raw, 2, "mx");
        CHECK(p.pass_index == 2);
        CHECK(p.model_id == "mx");
        REQUIRE(p.findings.size() == 2);
        CHECK(p.findings[0].id == "p2-f1");
        CHECK(p.findings[0].category == "uncategorized");
        CHECK_FALSE(p.findings[0].location.has_value());
        CHECK(p.findings[1].id == "named");
        CHECK(p.findings[1].severity == scour_severity::alarming);
        REQUIRE(p.findings[1].location.has_value());
        CHECK(p.findings[1].location->first == 3);
        CHECK(p.findings[1].location->second == 9);
        CHECK(p.unexplored == std::vector<std::string>{"dark corner"});
        CHECK(p.should_send_another);
    }
    SUBCASE("string votes are tolerated") {
        pass_report p = parse_pass_response(
            fenced(R"({"findings": [], "should_send_another": "False"})"), 1, "m");
        CHECK_FALSE(p.should_send_another);
        CHECK_THROWS_AS(
            parse_pass_response(
                fenced(R"({"findings": [], "should_send_another": "maybe"})"), 1,
                "m"),
            parse_error);
    }
    SUBCASE("severities outside the scale are rejected with the raw text") {
        std::string raw = fenced(
            R"({"findings": [{"severity": "major"}], "should_send_another": true})");
        try {
            parse_pass_response(raw, 1, "m");
            FAIL("expected parse_error");
        } catch (const parse_error& e) {
            CHECK(e.raw() == raw);
            CHECK(std::string(e.what()).find("severity") != std::string::npos);
        }
    }
    SUBCASE("missing severity is rejected") {
        CHECK_THROWS_AS(
            parse_pass_response(
                fenced(R"({"findings": [{"title": "x"}],
                           "should_send_another": true})"),
                1, "m"),
            parse_error);
    }
    SUBCASE("malformed locations are rejected") {
        CHECK_THROWS_AS(
            parse_pass_response(
                fenced(R"({"findings": [{"severity": "curious",
                                         "location": [1, 2, 3]}],
                           "should_send_another": true})"),
                1, "m"),
            parse_error);
        CHECK_THROWS_AS(
            parse_pass_response(
                fenced(R"({"findings": [{"severity": "curious",
                                         "location": ["a", "b"]}],
                           "should_send_another": true})"),
                1, "m"),
            parse_error);
    }
    SUBCASE("the continue vote is mandatory") {
        CHECK_THROWS_AS(parse_pass_response(fenced(R"({"findings": []})"), 1, "m"),
                        parse_error);
    }
    SUBCASE("prose without a fenced block is rejected") {
        CHECK_THROWS_AS(parse_pass_response("no structure here", 1, "m"),
                        parse_error);
    }
}

TEST_CASE("convergence is k consecutive stop votes") {
    std::vector<pass_report> passes;
    CHECK_THROWS_AS(check_convergence(passes, 0), contract_error);
    CHECK_FALSE(check_convergence(passes, 1));

    passes.push_back(mk_pass(1, false));
    CHECK(check_convergence(passes, 1));
    CHECK_FALSE(check_convergence(passes, 2));

    passes.push_back(mk_pass(2, true));
    passes.push_back(mk_pass(3, false));
    passes.push_back(mk_pass(4, false));
    CHECK(check_convergence(passes, 2));
    CHECK_FALSE(check_convergence(passes, 3));
}

TEST_CASE("campaigns run passes, retry transport, and re-ask parses") {
    campaign_options opts;
    opts.k = 1;

    SUBCASE("a two pass converged campaign") {
        cost_ledger ledger;
        mock_gateway gw({{false, pass_reply(3, true), 100, 20, -1},
                         {false, pass_reply(1, false), 150, 25, -1}},
                        ledger);
        campaign c = run_campaign("prompt text", {"m1", "m2", "m3"}, gw, opts);
        CHECK(c.status == campaign_status::converged);
        REQUIRE(c.passes.size() == 2);
        CHECK(c.passes[0].model_id == "m1");
        CHECK(c.passes[0].findings.size() == 3);
        CHECK(c.passes[1].model_id == "m2");
        CHECK(c.total_findings() == 4);
        CHECK(gw.remaining() == 0);
    }

    SUBCASE("token tallies accumulate across a re-ask") {
        cost_ledger ledger;
        mock_gateway gw({{false, "not parseable", 100, 10, -1},
                         {false, pass_reply(2, false), 40, 30, -1}},
                        ledger);
        campaign c = run_campaign("prompt", {"m1"}, gw, opts);
        CHECK(c.status == campaign_status::converged);
        REQUIRE(c.passes.size() == 1);
        CHECK(c.passes[0].prompt_tokens == 140);
        CHECK(c.passes[0].completion_tokens == 40);
        CHECK(ledger.size() == 2);
    }

    SUBCASE("transport failures retry with linked records") {
        cost_ledger ledger;
        mock_gateway gw({{true, "", 10, 0, -1},
                         {false, pass_reply(1, false), 90, 15, -1}},
                        ledger);
        campaign c = run_campaign("prompt", {"m1"}, gw, opts);
        CHECK(c.status == campaign_status::converged);
        auto records = ledger.snapshot();
        REQUIRE(records.size() == 2);
        CHECK_FALSE(records[0].ok);
        CHECK(records[1].retry_of == records[0].call_id);
    }

    SUBCASE("an exhausted retry budget aborts with partial results") {
        cost_ledger ledger;
        mock_gateway gw({{false, pass_reply(2, true), 10, 5, -1},
                         {true, "", 0, 0, -1}, {true, "", 0, 0, -1}},
                        ledger);
        campaign_options tight = opts;
        tight.gateway_retries = 1;
        campaign c = run_campaign("prompt", {"m1", "m2"}, gw, tight);
        CHECK(c.status == campaign_status::aborted);
        CHECK(c.passes.size() == 1);
        CHECK(c.total_findings() == 2);
    }

    SUBCASE("two unparseable replies abort the campaign") {
        cost_ledger ledger;
        mock_gateway gw({{false, "junk", 1, 1, -1}, {false, "more junk", 1, 1, -1}},
                        ledger);
        campaign c = run_campaign("prompt", {"m1"}, gw, opts);
        CHECK(c.status == campaign_status::aborted);
        CHECK(c.passes.empty());
    }

    SUBCASE("max passes caps the run") {
        cost_ledger ledger;
        mock_gateway gw({{false, pass_reply(1, true), 1, 1, -1}}, ledger);
        campaign_options capped = opts;
        capped.max_passes = 1;
        campaign c = run_campaign("prompt", {"m1", "m2"}, gw, capped);
        CHECK(c.status == campaign_status::max_passes);
        CHECK(c.passes.size() == 1);
    }

    SUBCASE("an eager roster runs out before convergence") {
        cost_ledger ledger;
        mock_gateway gw({{false, pass_reply(1, true), 1, 1, -1},
                         {false, pass_reply(1, true), 1, 1, -1}},
                        ledger);
        campaign_options wide = opts;
        wide.k = 3;
        campaign c = run_campaign("prompt", {"m1", "m2"}, gw, wide);
        CHECK(c.status == campaign_status::roster_exhausted);
        CHECK(c.passes.size() == 2);
    }

    SUBCASE("an empty roster is out of contract") {
        cost_ledger ledger;
        mock_gateway gw({}, ledger);
        CHECK_THROWS_AS(run_campaign("prompt", {}, gw, opts), contract_error);
    }
}

TEST_CASE("the state file is an append-only pass log") {
    std::string state = scratch_dir("scour-state") + "/campaign.jsonl";
    cost_ledger ledger;
    mock_gateway gw({{false, pass_reply(2, true), 1, 1, -1},
                     {false, pass_reply(1, false), 1, 1, -1}},
                    ledger);
    campaign_options opts;
    opts.k = 1;
    opts.state_file = state;
    opts.target_id = "demo";
    campaign c = run_campaign("prompt", {"m1", "m2"}, gw, opts);
    CHECK(c.status == campaign_status::converged);

    std::ifstream in(state);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    REQUIRE(lines.size() == 4);  // header, two passes, footer
    CHECK(lines[0].find("promptlint-campaign/1") != std::string::npos);
    CHECK(lines[0].find("demo") != std::string::npos);
    CHECK(lines[1].find("\"pass_index\":1") != std::string::npos);
    CHECK(lines[2].find("\"model_id\":\"m2\"") != std::string::npos);
    CHECK(lines[3].find("converged") != std::string::npos);
    CHECK(lines[3].find("\"total_findings\":3") != std::string::npos);
}

TEST_CASE("campaign serialization round trips") {
    std::string dir = scratch_dir("scour-replay");
    fixture_support::campaign_spec spec = fixture_support::campaign_b();
    std::string target = read_file(fixture_path("prompts/target_b.md"));
    fixture_support::make_campaign_store(dir, spec, target);

    cost_ledger ledger;
    replay_gateway gw(dir, ledger);
    campaign_options opts;
    opts.k = spec.k;
    campaign c = run_campaign(target, spec.roster, gw, opts);
    CHECK(c.status == campaign_status::converged);
    REQUIRE(c.passes.size() == 2);
    CHECK(c.passes[0].findings.size() == 10);
    CHECK(c.passes[1].findings.size() == 5);
    CHECK(c.total_findings() == 15);
    CHECK(!c.passes[0].unexplored.empty());

    std::string text = serialize_campaign(c);
    campaign back = deserialize_campaign(text);
    CHECK(back.target_id == c.target_id);
    CHECK(back.roster == c.roster);
    CHECK(back.threshold_k == c.threshold_k);
    CHECK(back.status == c.status);
    REQUIRE(back.passes.size() == c.passes.size());
    for (std::size_t i = 0; i < c.passes.size(); ++i) {
        CHECK(back.passes[i].model_id == c.passes[i].model_id);
        CHECK(back.passes[i].findings.size() == c.passes[i].findings.size());
        CHECK(back.passes[i].should_send_another ==
              c.passes[i].should_send_another);
        CHECK(back.passes[i].prompt_tokens == c.passes[i].prompt_tokens);
    }
    for (std::size_t i = 0; i < c.passes[0].findings.size(); ++i) {
        CHECK(back.passes[0].findings[i].id == c.passes[0].findings[i].id);
        CHECK(back.passes[0].findings[i].severity ==
              c.passes[0].findings[i].severity);
        CHECK(back.passes[0].findings[i].location ==
              c.passes[0].findings[i].location);
    }
    CHECK(serialize_campaign(back) == text);

    CHECK_THROWS_AS(deserialize_campaign("{\"format\": \"promptlint-campaign/9\"}"),
                    validation_error);
}
