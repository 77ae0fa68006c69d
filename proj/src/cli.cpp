#include "promptlint/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"
#include "promptlint/ast.hpp"
#include "promptlint/astdiff.hpp"
#include "promptlint/blocks.hpp"
#include "promptlint/errors.hpp"
#include "promptlint/report.hpp"
#include "promptlint/rules.hpp"
#include "promptlint/textutil.hpp"

namespace promptlint {

namespace {

using json = nlohmann::ordered_json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot read file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot write file: " + path);
    out << content;
}

std::string path_str(const std::vector<int>& path) {
    if (path.empty()) return "/";
    std::string s;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i > 0) s += '.';
        s += std::to_string(path[i]);
    }
    return s;
}

std::string text_head(const std::string& text, std::size_t max_len = 48) {
    std::string t = normalize_whitespace(text);
    if (t.size() > max_len) {
        t.resize(max_len - 3);
        t += "...";
    }
    return t;
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream in(csv);
    while (std::getline(in, item, ',')) {
        std::string trimmed = normalize_whitespace(item);
        if (!trimmed.empty()) out.push_back(trimmed);
    }
    return out;
}

}  // namespace

cli_config load_config(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const error& e) {
        throw config_error(e.what());
    }
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw config_error("malformed config JSON in " + path);
    }

    cli_config cfg;
    std::string roster_path = j.value("roster_path", "");
    try {
        if (j.contains("models")) {
            cfg.roster = load_roster(text);
        } else if (!roster_path.empty()) {
            if (!std::filesystem::exists(roster_path)) {
                throw config_error("config references a missing path: " +
                                   roster_path);
            }
            cfg.roster = load_roster(read_file(roster_path));
        }
    } catch (const config_error&) {
        throw;
    } catch (const error& e) {
        throw config_error("config roster: " + std::string(e.what()));
    }

    cfg.scour_k = j.value("scour_k", 3);
    if (cfg.scour_k < 1) throw config_error("scour_k must be >= 1");
    cfg.scour_max_passes = j.value("scour_max_passes", 0);
    cfg.rules_path = j.value("rules_path", "");
    cfg.lexicon_path = j.value("lexicon_path", "");
    cfg.replay_dir = j.value("replay_dir", "");
    cfg.api_key_env = j.value("api_key_env", std::string("OPENROUTER_API_KEY"));
    if (cfg.api_key_env.empty()) {
        throw config_error("api_key_env must not be empty");
    }
    for (const std::string& p : {cfg.rules_path, cfg.lexicon_path, cfg.replay_dir}) {
        if (!p.empty() && !std::filesystem::exists(p)) {
            throw config_error("config references a missing path: " + p);
        }
    }
    return cfg;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
    CLI::App app{"static analysis toolkit for agent system prompts", "promptlint"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "config file (roster, defaults)");

    cli_config config;
    bool config_loaded = false;
    auto ensure_config = [&]() {
        if (!config_path.empty() && !config_loaded) {
            config = load_config(config_path);
            config_loaded = true;
        }
    };

    int exit_code = 0;
    cost_ledger ledger;
    std::unique_ptr<llm_gateway> gateway_holder;

    // Flag dir wins over the config store; live mode is always explicit.
    auto make_gateway = [&](const std::string& replay_dir,
                            bool live) -> llm_gateway* {
        std::string dir = replay_dir.empty() ? config.replay_dir : replay_dir;
        if (live && !replay_dir.empty()) {
            throw validation_error("choose one of --replay and --live");
        }
        if (live) {
            live_gateway_options options;
            options.api_key_env = config.api_key_env;
            gateway_holder =
                std::make_unique<live_gateway>(config.roster, ledger, options);
            return gateway_holder.get();
        }
        if (!dir.empty()) {
            gateway_holder = std::make_unique<replay_gateway>(dir, ledger);
            return gateway_holder.get();
        }
        return nullptr;
    };

    auto print_cost_line = [&]() {
        if (ledger.size() == 0) return;
        ledger_totals_result totals = ledger_totals(ledger.snapshot());
        out << totals.total_calls << " model calls, "
            << format_money(totals.grand_total) << " total\n";
    };

    auto maybe_write_ledger = [&](const std::string& path) {
        if (!path.empty()) write_file(path, serialize_ledger(ledger.snapshot()));
    };

    // parse
    auto* cmd_parse = app.add_subcommand("parse", "parse a prompt into a typed tree");
    std::string parse_in, parse_out;
    cmd_parse->add_option("file", parse_in, "prompt file")->required();
    cmd_parse->add_option("--out", parse_out, "write the tree as JSON");
    cmd_parse->callback([&] {
        ensure_config();
        parse_result pr = parse(read_file(parse_in));
        for (const parse_diagnostic& w : pr.warnings) {
            err << "warning: line " << w.line << ": " << w.message << "\n";
        }
        walk(pr.root, [&](const node& n, const std::vector<int>&) {
            out << std::string(static_cast<std::size_t>(n.depth) * 2, ' ')
                << to_string(n.kind);
            if (n.kind == node_kind::section) out << " h" << n.heading_level;
            out << " [" << n.start_line << "-" << n.end_line << "]";
            std::string head = text_head(n.text);
            if (!head.empty()) out << " " << head;
            out << "\n";
        });
        if (!parse_out.empty()) write_file(parse_out, serialize_ast(pr.root));
    });

    // profile
    auto* cmd_profile = app.add_subcommand("profile", "structural profile of a prompt");
    std::string profile_in, profile_out;
    cmd_profile->add_option("file", profile_in, "prompt file")->required();
    cmd_profile->add_option("--out", profile_out, "write the profile as JSON");
    cmd_profile->callback([&] {
        ensure_config();
        parse_result pr = parse(read_file(profile_in));
        structural_profile p = profile(pr.root);
        out << "nodes                 " << p.node_count << "\n";
        out << "max depth             " << p.max_depth << "\n";
        out << "sections              " << p.section_count << "\n";
        out << "top-level directives  " << p.top_level_directive_count << "\n";
        for (int k = 0; k < 8; ++k) {
            node_kind kind = static_cast<node_kind>(k);
            std::string name(to_string(kind));
            out << name << std::string(22 - name.size(), ' ')
                << p.count_of(kind) << "\n";
        }
        if (!profile_out.empty()) {
            json j;
            j["format"] = "promptlint-profile/1";
            j["node_count"] = p.node_count;
            j["max_depth"] = p.max_depth;
            j["section_count"] = p.section_count;
            j["top_level_directive_count"] = p.top_level_directive_count;
            json per_kind;
            for (int k = 0; k < 8; ++k) {
                node_kind kind = static_cast<node_kind>(k);
                per_kind[std::string(to_string(kind))] = p.count_of(kind);
            }
            j["count_per_kind"] = std::move(per_kind);
            write_file(profile_out, j.dump(2) + "\n");
        }
    });

    // annotate
    auto* cmd_annotate =
        app.add_subcommand("annotate", "classify nodes into roles and channels");
    std::string annotate_in, annotate_out, annotate_lexicon;
    cmd_annotate->add_option("file", annotate_in, "prompt file")->required();
    cmd_annotate->add_option("--lexicon", annotate_lexicon, "role lexicon JSON");
    cmd_annotate->add_option("--out", annotate_out, "write annotations as JSON");
    cmd_annotate->callback([&] {
        ensure_config();
        parse_result pr = parse(read_file(annotate_in));
        role_lexicon lex = role_lexicon::defaults();
        std::string lex_path =
            annotate_lexicon.empty() ? config.lexicon_path : annotate_lexicon;
        if (!lex_path.empty()) lex = load_lexicon(read_file(lex_path));
        annotated_document ad = annotate(pr.root, lex);

        for (const auto& [path, ann] : ad.annotations) {
            if (path.empty()) continue;
            out << path_str(path) << "  " << to_string(ann.node_role) << "/"
                << to_string(ann.node_channel) << " (" << to_string(ann.provenance)
                << ")\n";
        }
        channel_distribution_result dist = channel_distribution(ad);
        out << "channels:";
        for (const auto& [ch, fraction] : dist.fractions) {
            out << " " << to_string(ch) << " "
                << static_cast<int>(std::llround(fraction * 100)) << "%";
        }
        out << "; unclassified "
            << static_cast<int>(std::llround(dist.unclassified_fraction * 100))
            << "%\n";

        if (!annotate_out.empty()) {
            json j;
            j["format"] = "promptlint-annotations/1";
            j["annotations"] = json::array();
            for (const auto& [path, ann] : ad.annotations) {
                json ja;
                ja["path"] = path;
                ja["role"] = std::string(to_string(ann.node_role));
                ja["channel"] = std::string(to_string(ann.node_channel));
                ja["provenance"] = std::string(to_string(ann.provenance));
                j["annotations"].push_back(std::move(ja));
            }
            json jd;
            for (const auto& [ch, fraction] : dist.fractions) {
                jd[std::string(to_string(ch))] = fraction;
            }
            jd["unclassified"] = dist.unclassified_fraction;
            j["distribution"] = std::move(jd);
            write_file(annotate_out, j.dump(2) + "\n");
        }
    });

    // diff
    auto* cmd_diff = app.add_subcommand("diff", "compare two prompt versions");
    std::string diff_old, diff_new, diff_out;
    cmd_diff->add_option("old", diff_old, "old prompt file")->required();
    cmd_diff->add_option("new", diff_new, "new prompt file")->required();
    cmd_diff->add_option("--out", diff_out, "write the change set as JSON");
    cmd_diff->callback([&] {
        ensure_config();
        parse_result old_doc = parse(read_file(diff_old));
        parse_result new_doc = parse(read_file(diff_new));
        change_set changes = diff(old_doc.root, new_doc.root);
        const change_kind order[] = {change_kind::added, change_kind::removed,
                                     change_kind::modified, change_kind::moved,
                                     change_kind::unchanged};
        for (change_kind k : order) {
            out << to_string(k) << " " << changes.count(k)
                << (k == change_kind::unchanged ? "\n" : ", ");
        }
        for (const change_entry& e : changes.entries) {
            if (e.kind == change_kind::unchanged) continue;
            out << "  " << to_string(e.kind);
            if (e.old_path) out << " old=" << path_str(*e.old_path);
            if (e.new_path) out << " new=" << path_str(*e.new_path);
            out << "\n";
        }
        if (!diff_out.empty()) write_file(diff_out, serialize_change_set(changes));
    });

    // blocks
    auto* cmd_blocks =
        app.add_subcommand("blocks", "validate or decompose a block annotation");
    std::string blocks_in, blocks_from, blocks_out, blocks_replay, blocks_model;
    bool blocks_live = false;
    std::string blocks_ledger_out;
    cmd_blocks->add_option("file", blocks_in, "block annotation JSON");
    cmd_blocks->add_option("--from", blocks_from,
                           "decompose this prompt file with a model");
    cmd_blocks->add_option("--model", blocks_model, "model id for decomposition");
    cmd_blocks->add_option("--replay", blocks_replay, "replay store directory");
    cmd_blocks->add_flag("--live", blocks_live, "allow live model calls");
    cmd_blocks->add_option("--out", blocks_out, "write the block set as JSON");
    cmd_blocks->add_option("--ledger-out", blocks_ledger_out,
                           "write the call ledger as JSON");
    cmd_blocks->callback([&] {
        ensure_config();
        if (blocks_in.empty() == blocks_from.empty()) {
            throw validation_error("give a blocks file or --from <prompt>");
        }
        block_set bs;
        if (!blocks_from.empty()) {
            llm_gateway* gw = make_gateway(blocks_replay, blocks_live);
            if (gw == nullptr) {
                throw validation_error("decomposition needs --replay or --live");
            }
            if (blocks_model.empty()) {
                throw validation_error("decomposition needs --model");
            }
            parse_result pr = parse(read_file(blocks_from));
            bs = decompose_with_llm(pr.root, *gw, blocks_model);
        } else {
            bs = load_blocks(read_file(blocks_in));
        }
        std::map<std::string, int> tiers, modalities;
        for (const block& b : bs.blocks) {
            tiers[std::string(to_string(b.tier))] += 1;
            modalities[std::string(to_string(b.modality))] += 1;
        }
        out << bs.blocks.size() << " blocks from source '" << bs.source_id << "'\n";
        out << "tiers:";
        for (const auto& [name, count] : tiers) out << " " << name << " " << count;
        out << "\nmodalities:";
        for (const auto& [name, count] : modalities) {
            out << " " << name << " " << count;
        }
        out << "\n";
        if (!blocks_out.empty()) write_file(blocks_out, serialize_blocks(bs));
        maybe_write_ledger(blocks_ledger_out);
        print_cost_line();
    });

    // lint
    auto* cmd_lint =
        app.add_subcommand("lint", "run directed interference rules over blocks");
    std::string lint_blocks, lint_rules, lint_replay, lint_model = "lint-judge";
    std::string lint_out, lint_ledger_out;
    bool lint_live = false;
    int lint_jobs = 1;
    cmd_lint->add_option("--blocks", lint_blocks, "block annotation JSON")
        ->required();
    cmd_lint->add_option("--rules", lint_rules, "'builtin' or a rules JSON file");
    cmd_lint->add_option("--model", lint_model, "judge model id");
    cmd_lint->add_option("--jobs", lint_jobs, "parallel evaluation ceiling");
    cmd_lint->add_option("--replay", lint_replay, "replay store directory");
    cmd_lint->add_flag("--live", lint_live, "allow live model calls");
    cmd_lint->add_option("--out", lint_out, "write patterns as JSON");
    cmd_lint->add_option("--ledger-out", lint_ledger_out,
                         "write the call ledger as JSON");
    cmd_lint->callback([&] {
        ensure_config();
        block_set bs = load_blocks(read_file(lint_blocks));
        std::string rules_spec =
            lint_rules.empty()
                ? (config.rules_path.empty() ? "builtin" : config.rules_path)
                : lint_rules;
        std::vector<rule> rules = rules_spec == "builtin"
                                      ? builtin_rules()
                                      : load_rules(read_file(rules_spec));
        llm_gateway* gw = make_gateway(lint_replay, lint_live);
        run_options ro;
        ro.model_id = lint_model;
        ro.jobs = lint_jobs;
        directed_result res = run_directed(bs, rules, gw, ro);

        for (const interference_pattern& p : res.patterns) {
            out << to_string(p.severity) << "  " << p.rule_id << "  " << p.block_a
                << " x " << p.block_b << (p.statically_detectable ? "  [static]" : "")
                << "\n";
            if (!p.rationale.empty()) out << "    " << p.rationale << "\n";
        }
        std::int64_t tally[3] = {0, 0, 0};
        for (const interference_pattern& p : res.patterns) {
            tally[static_cast<int>(p.severity)] += 1;
        }
        out << res.patterns.size() << " patterns: " << tally[0] << " critical, "
            << tally[1] << " major, " << tally[2] << " minor\n";
        out << "evaluated " << res.report.evaluations << " pairs with "
            << res.report.llm_calls << " model calls\n";
        for (const std::string& e : res.report.errors) err << "error: " << e << "\n";
        if (!lint_out.empty()) {
            write_file(lint_out, serialize_patterns(res.patterns, res.report));
        }
        maybe_write_ledger(lint_ledger_out);
        print_cost_line();
    });

    // scour
    auto* cmd_scour =
        app.add_subcommand("scour", "undirected multi-model exploration campaign");
    std::string scour_target, scour_models, scour_replay, scour_state, scour_out;
    std::string scour_target_id, scour_ledger_out;
    bool scour_live = false;
    int scour_k = -1, scour_max = -1;
    cmd_scour->add_option("target", scour_target, "prompt file to explore")
        ->required();
    cmd_scour->add_option("--models", scour_models,
                          "comma-separated model ids (default: config roster)");
    cmd_scour->add_option("--k", scour_k, "consecutive no-votes to converge");
    cmd_scour->add_option("--max-passes", scour_max, "pass ceiling (0 = roster)");
    cmd_scour->add_option("--target-id", scour_target_id, "campaign target id");
    cmd_scour->add_option("--state", scour_state, "append-only JSONL state file");
    cmd_scour->add_option("--replay", scour_replay, "replay store directory");
    cmd_scour->add_flag("--live", scour_live, "allow live model calls");
    cmd_scour->add_option("--out", scour_out, "write the campaign as JSON");
    cmd_scour->add_option("--ledger-out", scour_ledger_out,
                          "write the call ledger as JSON");
    cmd_scour->callback([&] {
        ensure_config();
        std::vector<std::string> roster_ids = split_csv(scour_models);
        if (roster_ids.empty()) {
            for (const model_spec& m : config.roster.models) {
                roster_ids.push_back(m.model_id);
            }
        }
        if (roster_ids.empty()) {
            throw validation_error("no models: give --models or a config roster");
        }
        llm_gateway* gw = make_gateway(scour_replay, scour_live);
        if (gw == nullptr) {
            throw validation_error("scour needs --replay or --live");
        }
        campaign_options copts;
        copts.target_id =
            scour_target_id.empty()
                ? std::filesystem::path(scour_target).stem().string()
                : scour_target_id;
        copts.k = scour_k >= 1 ? scour_k : config.scour_k;
        copts.max_passes = scour_max >= 0 ? scour_max : config.scour_max_passes;
        copts.state_file = scour_state;
        campaign c = run_campaign(read_file(scour_target), roster_ids, *gw, copts);

        out << render_convergence_table(convergence_table(c));
        out << "status: " << to_string(c.status) << ", " << c.total_findings()
            << " findings\n";
        if (!scour_out.empty()) write_file(scour_out, serialize_campaign(c));
        maybe_write_ledger(scour_ledger_out);
        print_cost_line();
        if (c.status == campaign_status::aborted) exit_code = 2;
    });

    // report
    auto* cmd_report =
        app.add_subcommand("report", "aggregate campaign or lint results");
    std::string report_kind, report_campaign, report_patterns, report_out;
    cmd_report
        ->add_option("kind", report_kind, "severity | convergence | coverage")
        ->required();
    cmd_report->add_option("--campaign", report_campaign, "campaign JSON file");
    cmd_report->add_option("--patterns", report_patterns, "patterns JSON file");
    cmd_report->add_option("--out", report_out, "write the report as JSON");
    cmd_report->callback([&] {
        ensure_config();
        auto load_campaign_file = [&]() {
            if (report_campaign.empty()) {
                throw validation_error("report " + report_kind +
                                       " needs --campaign");
            }
            return deserialize_campaign(read_file(report_campaign));
        };
        if (report_kind == "severity") {
            severity_distribution dist;
            if (!report_patterns.empty()) {
                json j = json::parse(read_file(report_patterns), nullptr, false);
                if (j.is_discarded()) {
                    throw parse_error("malformed patterns JSON", report_patterns);
                }
                std::vector<std::string> severities;
                for (const json& jp : j.value("patterns", json::array())) {
                    severities.push_back(jp.at("severity").get<std::string>());
                }
                dist = compute_severity_distribution(severities);
            } else {
                campaign c = load_campaign_file();
                std::vector<scour_finding> findings;
                for (const pass_report& p : c.passes) {
                    findings.insert(findings.end(), p.findings.begin(),
                                    p.findings.end());
                }
                dist = severity_distribution_of(findings);
            }
            out << render_severity_distribution(dist);
            if (!report_out.empty()) {
                write_file(report_out, serialize_severity_distribution(dist));
            }
        } else if (report_kind == "convergence") {
            campaign c = load_campaign_file();
            std::vector<convergence_row> rows = convergence_table(c);
            out << render_convergence_table(rows);
            if (!report_out.empty()) {
                write_file(report_out, serialize_convergence_table(rows));
            }
        } else if (report_kind == "coverage") {
            campaign c = load_campaign_file();
            std::vector<scour_finding> findings;
            for (const pass_report& p : c.passes) {
                findings.insert(findings.end(), p.findings.begin(),
                                p.findings.end());
            }
            coverage_matrix matrix = compute_coverage_matrix(findings);
            out << render_coverage_matrix(matrix);
            if (!report_out.empty()) {
                write_file(report_out, serialize_coverage_matrix(matrix));
            }
        } else {
            throw validation_error("unknown report kind: '" + report_kind + "'");
        }
    });

    // cost
    auto* cmd_cost = app.add_subcommand("cost", "cost breakdown over a call ledger");
    std::string cost_ledger_path, cost_out;
    std::int64_t cost_findings = 0;
    cmd_cost->add_option("--ledger", cost_ledger_path, "ledger JSON file")
        ->required();
    cmd_cost->add_option("--findings", cost_findings,
                         "finding count for cost-per-finding");
    cmd_cost->add_option("--out", cost_out, "write the breakdown as JSON");
    cmd_cost->callback([&] {
        ensure_config();
        std::vector<cost_record> records = load_ledger(read_file(cost_ledger_path));
        cost_breakdown_result breakdown = cost_breakdown(records, cost_findings);
        out << render_cost_breakdown(breakdown);
        if (!cost_out.empty()) {
            write_file(cost_out, serialize_cost_breakdown(breakdown));
        }
    });

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("promptlint");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n\n" << app.help();
        return 1;
    } catch (const transport_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const replay_miss_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const decomposition_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}

}  // namespace promptlint
