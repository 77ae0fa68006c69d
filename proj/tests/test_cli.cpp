#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fixture_support.hpp"
#include "nlohmann/json.hpp"
#include "promptlint/ast.hpp"
#include "promptlint/blocks.hpp"
#include "promptlint/cli.hpp"
#include "promptlint/gateway.hpp"

using namespace promptlint;
using fixture_support::fixture_path;
using fixture_support::read_file;
using fixture_support::scratch_dir;
using fixture_support::write_file;

namespace {

struct cli_result {
    int code = 0;
    std::string out;
    std::string err;
};

cli_result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    cli_result r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::size_t count_of(const std::string& haystack, const std::string& needle) {
    std::size_t count = 0;
    for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        count += 1;
    }
    return count;
}

void write_replay_entry(const std::string& dir, const chat_request& request,
                        const std::string& text) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json file;
    file["model_id"] = request.model_id;
    file["text"] = text;
    file["prompt_tokens"] = 400;
    file["completion_tokens"] = 60;
    write_file(dir + "/" + request_digest(request) + ".json", file.dump(2) + "\n");
}

}  // namespace

TEST_CASE("dispatch, help, and bad invocations") {
    cli_result none = run({});
    CHECK(none.code == 1);
    CHECK(!none.err.empty());

    cli_result help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("promptlint") != std::string::npos);
    CHECK(help.out.find("scour") != std::string::npos);

    CHECK(run({"bogus-subcommand"}).code == 1);
    CHECK(run({"parse"}).code == 1);  // missing required positional
}

TEST_CASE("parse prints the tree and serializes it") {
    std::string dir = scratch_dir("cli-parse");
    cli_result r = run({"parse", fixture_path("prompts/flat.md"),
                        "--out", dir + "/ast.json"});
    CHECK(r.code == 0);
    CHECK(r.err.empty());
    CHECK(r.out.find("document") != std::string::npos);
    CHECK(r.out.find("directive") != std::string::npos);
    CHECK(r.out.find("IMPORTANT:") != std::string::npos);
    CHECK(read_file(dir + "/ast.json").find("promptlint-ast/1+fnv1a64") !=
          std::string::npos);

    write_file(dir + "/broken.md", "intro\n\n```\nnever closed\n");
    cli_result warned = run({"parse", dir + "/broken.md"});
    CHECK(warned.code == 0);
    CHECK(warned.err.find("warning: line 3") != std::string::npos);

    cli_result missing = run({"parse", dir + "/absent.md"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("error:") != std::string::npos);
}

TEST_CASE("profile prints the structural counters") {
    cli_result flat = run({"profile", fixture_path("prompts/flat.md")});
    CHECK(flat.code == 0);
    CHECK(flat.out.find("nodes                 14") != std::string::npos);
    CHECK(flat.out.find("top-level directives  7") != std::string::npos);

    std::string dir = scratch_dir("cli-profile");
    cli_result sectioned = run({"profile", fixture_path("prompts/sectioned.md"),
                                "--out", dir + "/profile.json"});
    CHECK(sectioned.code == 0);
    CHECK(sectioned.out.find("sections              2") != std::string::npos);
    std::string written = read_file(dir + "/profile.json");
    CHECK(written.find("promptlint-profile/1") != std::string::npos);
    CHECK(written.find("\"section_count\": 2") != std::string::npos);
}

TEST_CASE("annotate reports roles and the channel mix") {
    std::string dir = scratch_dir("cli-annotate");
    cli_result r = run({"annotate", fixture_path("prompts/sectioned.md"),
                        "--out", dir + "/ann.json"});
    CHECK(r.code == 0);
    CHECK(r.out.find("tool_usage/tool_schema (heading)") != std::string::npos);
    CHECK(r.out.find("format/behavior") != std::string::npos);
    CHECK(r.out.find("tool_schema 63%") != std::string::npos);
    CHECK(r.out.find("; unclassified 13%") != std::string::npos);
    std::string written = read_file(dir + "/ann.json");
    CHECK(written.find("promptlint-annotations/1") != std::string::npos);
    CHECK(written.find("\"unclassified\"") != std::string::npos);

    write_file(dir + "/lexicon.json",
               serialize_lexicon(role_lexicon::defaults()));
    cli_result with_lexicon = run({"annotate", fixture_path("prompts/sectioned.md"),
                                   "--lexicon", dir + "/lexicon.json"});
    CHECK(with_lexicon.code == 0);
    CHECK(with_lexicon.out == r.out);
}

TEST_CASE("diff flags the edited directive between sessions") {
    std::string dir = scratch_dir("cli-diff");
    cli_result r = run({"diff", fixture_path("prompts/session_a.md"),
                        fixture_path("prompts/session_c.md"),
                        "--out", dir + "/diff.json"});
    CHECK(r.code == 0);
    CHECK(r.out.find("modified 1, moved 0, unchanged 6") != std::string::npos);
    CHECK(r.out.find("  modified old=2.0 new=2.0") != std::string::npos);
    CHECK(read_file(dir + "/diff.json").find("promptlint-diff/1") !=
          std::string::npos);

    cli_result env = run({"diff", fixture_path("prompts/session_a.md"),
                          fixture_path("prompts/session_b.md")});
    CHECK(env.code == 0);
    CHECK(env.out.find("modified 1") != std::string::npos);
    CHECK(env.out.find("  modified old=0 new=0") != std::string::npos);

    cli_result same = run({"diff", fixture_path("prompts/session_a.md"),
                           fixture_path("prompts/session_a.md")});
    CHECK(same.code == 0);
    CHECK(same.out.find("added 0, removed 0, modified 0, moved 0, unchanged 7") !=
          std::string::npos);
}

TEST_CASE("blocks validates an annotation file") {
    cli_result r = run({"blocks", fixture_path("blocks/blocks56.json")});
    CHECK(r.code == 0);
    CHECK(r.out.find("56 blocks from source 'coding-agent'") != std::string::npos);
    CHECK(r.out.find("tiers:") != std::string::npos);
    CHECK(r.out.find("modalities:") != std::string::npos);

    cli_result neither = run({"blocks"});
    CHECK(neither.code == 1);
    CHECK(neither.err.find("give a blocks file or --from") != std::string::npos);

    cli_result both = run({"blocks", fixture_path("blocks/blocks56.json"),
                           "--from", fixture_path("prompts/flat.md")});
    CHECK(both.code == 1);

    cli_result no_gateway =
        run({"blocks", "--from", fixture_path("prompts/flat.md"),
             "--model", "decomp-model"});
    CHECK(no_gateway.code == 1);
    CHECK(no_gateway.err.find("needs --replay or --live") != std::string::npos);

    std::string dir = scratch_dir("cli-blocks-nomodel");
    cli_result no_model = run({"blocks", "--from", fixture_path("prompts/flat.md"),
                               "--replay", dir});
    CHECK(no_model.code == 1);
    CHECK(no_model.err.find("needs --model") != std::string::npos);
}

TEST_CASE("blocks decomposes a prompt over a replay store") {
    std::string dir = scratch_dir("cli-blocks-replay");
    write_file(dir + "/prompt.md", "# Safety\n\nNEVER delete files.\n");

    parse_result pr = parse(read_file(dir + "/prompt.md"));
    chat_request request;
    request.model_id = "decomp-model";
    request.messages = {{"user", render_decompose_prompt(pr.root)}};

    SUBCASE("a well formed reply round trips") {
        std::string reply =
            "Here is the decomposition.\n\n```json\n"
            R"({"blocks": [{"id": "s1", "tier": "system", "category": "safety",
                            "modality": "prohibition", "scope": ["filesystem"],
                            "span": [3, 3], "text": "NEVER delete files."}]})"
            "\n```\n";
        write_replay_entry(dir + "/store", request, reply);
        cli_result r = run({"blocks", "--from", dir + "/prompt.md",
                            "--model", "decomp-model",
                            "--replay", dir + "/store",
                            "--out", dir + "/blocks.json",
                            "--ledger-out", dir + "/ledger.json"});
        CHECK(r.code == 0);
        CHECK(r.out.find("1 blocks from source 'llm-decomposition'") !=
              std::string::npos);
        CHECK(r.out.find("prohibition 1") != std::string::npos);
        CHECK(r.out.find("1 model calls") != std::string::npos);
        CHECK(read_file(dir + "/blocks.json").find("promptlint-blocks/1") !=
              std::string::npos);
        CHECK(read_file(dir + "/ledger.json").find("promptlint-ledger/1") !=
              std::string::npos);
    }
    SUBCASE("a persistent junk reply exits through the gateway path") {
        write_replay_entry(dir + "/junk", request, "not a decomposition");
        chat_request reask = request;
        reask.messages.push_back({"assistant", "not a decomposition"});
        reask.messages.push_back(
            {"user",
             "That response was not valid. Reply again with only the fenced "
             "json block, matching the requested schema exactly."});
        write_replay_entry(dir + "/junk", reask, "still not a decomposition");
        cli_result r = run({"blocks", "--from", dir + "/prompt.md",
                            "--model", "decomp-model",
                            "--replay", dir + "/junk"});
        CHECK(r.code == 2);
        CHECK(r.err.find("block decomposition failed after retry") !=
              std::string::npos);
    }
    SUBCASE("a missing store entry exits through the gateway path") {
        std::string empty = scratch_dir("cli-blocks-empty");
        cli_result r = run({"blocks", "--from", dir + "/prompt.md",
                            "--model", "decomp-model", "--replay", empty});
        CHECK(r.code == 2);
        CHECK(r.err.find("no recorded response") != std::string::npos);
    }
}

TEST_CASE("lint reproduces the directed analysis from a replay store") {
    std::string store = scratch_dir("cli-lint-store");
    fixture_support::make_lint_store(store);
    std::string dir = scratch_dir("cli-lint-out");

    cli_result r = run({"lint", "--blocks", fixture_path("blocks/blocks56.json"),
                        "--replay", store,
                        "--out", dir + "/patterns.json",
                        "--ledger-out", dir + "/ledger.json"});
    CHECK(r.code == 0);
    CHECK(r.err.empty());
    CHECK(r.out.find("21 patterns: 4 critical, 3 major, 14 minor") !=
          std::string::npos);
    CHECK(r.out.find("evaluated 174 pairs with 88 model calls") !=
          std::string::npos);
    CHECK(r.out.find("88 model calls,") != std::string::npos);
    CHECK(r.out.find("critical  mandate_prohibition") != std::string::npos);

    std::string patterns = read_file(dir + "/patterns.json");
    CHECK(patterns.find("promptlint-patterns/1") != std::string::npos);
    CHECK(patterns.find("\"evaluations\": 174") != std::string::npos);
    CHECK(read_file(dir + "/ledger.json").find("promptlint-ledger/1") !=
          std::string::npos);
}

TEST_CASE("lint without a gateway stays structural") {
    cli_result r = run({"lint", "--blocks", fixture_path("blocks/blocks56.json")});
    CHECK(r.code == 0);
    CHECK(r.out.find("2 patterns: 0 critical, 0 major, 2 minor") !=
          std::string::npos);
    CHECK(r.out.find("evaluated 174 pairs with 0 model calls") !=
          std::string::npos);
    CHECK(count_of(r.err, "error:") == 88);
    CHECK(r.err.find("needs a gateway") != std::string::npos);
}

TEST_CASE("scour replays a campaign end to end") {
    std::string store = scratch_dir("cli-scour-store");
    fixture_support::campaign_spec spec = fixture_support::campaign_b();
    fixture_support::make_campaign_store(
        store, spec, read_file(fixture_path("prompts/target_b.md")));
    std::string dir = scratch_dir("cli-scour-out");

    cli_result r = run({"scour", fixture_path("prompts/target_b.md"),
                        "--models", "deepseek-v3.2, grok-4.1",
                        "--k", "1",
                        "--replay", store,
                        "--state", dir + "/state.jsonl",
                        "--out", dir + "/campaign.json",
                        "--ledger-out", dir + "/ledger.json"});
    CHECK(r.code == 0);
    CHECK(r.out.find("status: converged, 15 findings") != std::string::npos);
    CHECK(r.out.find("deepseek-v3.2") != std::string::npos);
    CHECK(r.out.find("2 model calls,") != std::string::npos);

    std::ifstream state(dir + "/state.jsonl");
    std::size_t lines = 0;
    for (std::string line; std::getline(state, line);) lines += 1;
    CHECK(lines == 4);

    std::string campaign_json = read_file(dir + "/campaign.json");
    CHECK(campaign_json.find("promptlint-campaign/1") != std::string::npos);
    CHECK(campaign_json.find("target_b") != std::string::npos);

    SUBCASE("reports aggregate the saved campaign") {
        cli_result severity =
            run({"report", "severity", "--campaign", dir + "/campaign.json"});
        CHECK(severity.code == 0);
        CHECK(severity.out.find(
                  "severity distribution (epistemic scale, 15 total)") !=
              std::string::npos);

        cli_result convergence =
            run({"report", "convergence", "--campaign", dir + "/campaign.json"});
        CHECK(convergence.code == 0);
        CHECK(convergence.out.find("grok-4.1") != std::string::npos);
        CHECK(convergence.out.find("cumulative") != std::string::npos);

        cli_result coverage =
            run({"report", "coverage", "--campaign", dir + "/campaign.json"});
        CHECK(coverage.code == 0);
        CHECK(coverage.out.find("model") != std::string::npos);
        CHECK(coverage.out.find("total") != std::string::npos);
    }
    SUBCASE("report argument validation") {
        CHECK(run({"report", "bogus", "--campaign", dir + "/campaign.json"})
                  .code == 1);
        cli_result no_input = run({"report", "severity"});
        CHECK(no_input.code == 1);
        CHECK(no_input.err.find("needs --campaign") != std::string::npos);
    }
}

TEST_CASE("scour argument and gateway failures") {
    cli_result no_gateway = run({"scour", fixture_path("prompts/target_b.md"),
                                 "--models", "m1"});
    CHECK(no_gateway.code == 1);
    CHECK(no_gateway.err.find("scour needs --replay or --live") !=
          std::string::npos);

    std::string empty = scratch_dir("cli-scour-empty");
    cli_result conflict = run({"scour", fixture_path("prompts/target_b.md"),
                               "--models", "m1", "--replay", empty, "--live"});
    CHECK(conflict.code == 1);
    CHECK(conflict.err.find("choose one of --replay and --live") !=
          std::string::npos);

    cli_result no_models = run({"scour", fixture_path("prompts/target_b.md"),
                                "--replay", empty});
    CHECK(no_models.code == 1);
    CHECK(no_models.err.find("no models") != std::string::npos);

    cli_result miss = run({"scour", fixture_path("prompts/target_b.md"),
                           "--models", "m1", "--replay", empty});
    CHECK(miss.code == 2);
    CHECK(miss.err.find("no recorded response") != std::string::npos);
}

TEST_CASE("report severity reads a patterns file") {
    std::string store = scratch_dir("cli-report-store");
    fixture_support::make_lint_store(store);
    std::string dir = scratch_dir("cli-report-out");
    CHECK(run({"lint", "--blocks", fixture_path("blocks/blocks56.json"),
               "--replay", store, "--out", dir + "/patterns.json"})
              .code == 0);

    cli_result r = run({"report", "severity", "--patterns",
                        dir + "/patterns.json",
                        "--out", dir + "/severity.json"});
    CHECK(r.code == 0);
    CHECK(r.out.find("severity distribution (impact scale, 21 total)") !=
          std::string::npos);
    CHECK(read_file(dir + "/severity.json").find("\"count\": 14") !=
          std::string::npos);
}

TEST_CASE("cost prices a saved ledger") {
    std::string dir = scratch_dir("cli-cost");
    cli_result r = run({"cost", "--ledger", fixture_path("ledger/cross_vendor.json"),
                        "--findings", "152",
                        "--out", dir + "/cost.json"});
    CHECK(r.code == 0);
    CHECK(r.out.find("kimi-k2.5") != std::string::npos);
    CHECK(r.out.find("$0.263") != std::string::npos);
    CHECK(r.out.find("cost per finding: $0.002") != std::string::npos);
    std::string written = read_file(dir + "/cost.json");
    CHECK(written.find("\"kind\": \"cost_breakdown\"") != std::string::npos);
    CHECK(written.find("\"cost_per_finding\": \"$0.002\"") != std::string::npos);

    cli_result no_findings =
        run({"cost", "--ledger", fixture_path("ledger/cross_vendor.json")});
    CHECK(no_findings.code == 0);
    CHECK(no_findings.out.find("cost per finding") == std::string::npos);

    CHECK(run({"cost", "--ledger", dir + "/absent.json"}).code == 1);
}

TEST_CASE("config files feed defaults and validate eagerly") {
    cli_result good = run({"--config", fixture_path("config/promptlint.json"),
                           "parse", fixture_path("prompts/flat.md")});
    CHECK(good.code == 0);

    std::string dir = scratch_dir("cli-config");
    write_file(dir + "/bad_k.json", "{\"scour_k\": 0}\n");
    cli_result bad_k = run({"--config", dir + "/bad_k.json",
                            "parse", fixture_path("prompts/flat.md")});
    CHECK(bad_k.code == 1);
    CHECK(bad_k.err.find("scour_k must be >= 1") != std::string::npos);

    write_file(dir + "/bad_path.json",
               "{\"rules_path\": \"" + dir + "/nope.json\"}\n");
    cli_result bad_path = run({"--config", dir + "/bad_path.json",
                               "parse", fixture_path("prompts/flat.md")});
    CHECK(bad_path.code == 1);
    CHECK(bad_path.err.find("missing path") != std::string::npos);

    write_file(dir + "/garbage.json", "not json at all\n");
    cli_result garbage = run({"--config", dir + "/garbage.json",
                              "parse", fixture_path("prompts/flat.md")});
    CHECK(garbage.code == 1);
    CHECK(garbage.err.find("malformed config JSON") != std::string::npos);

    cli_result absent = run({"--config", dir + "/absent.json",
                             "parse", fixture_path("prompts/flat.md")});
    CHECK(absent.code == 1);
    CHECK(absent.err.find("cannot read file") != std::string::npos);
}
