#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "promptlint/annotate.hpp"
#include "promptlint/ast.hpp"
#include "promptlint/astdiff.hpp"
#include "promptlint/blocks.hpp"
#include "promptlint/errors.hpp"
#include "promptlint/gateway.hpp"
#include "promptlint/report.hpp"
#include "promptlint/rules.hpp"
#include "promptlint/scour.hpp"

namespace py = pybind11;
using json = nlohmann::ordered_json;

namespace {

py::object json_to_py(const json& j) {
    switch (j.type()) {
        case json::value_t::null:
            return py::none();
        case json::value_t::boolean:
            return py::bool_(j.get<bool>());
        case json::value_t::number_integer:
            return py::int_(j.get<std::int64_t>());
        case json::value_t::number_unsigned:
            return py::int_(j.get<std::uint64_t>());
        case json::value_t::number_float:
            return py::float_(j.get<double>());
        case json::value_t::string:
            return py::str(j.get<std::string>());
        case json::value_t::array: {
            py::list list;
            for (const json& item : j) list.append(json_to_py(item));
            return list;
        }
        case json::value_t::object: {
            py::dict dict;
            for (const auto& [key, value] : j.items()) {
                dict[py::str(key)] = json_to_py(value);
            }
            return dict;
        }
        default:
            return py::none();
    }
}

py::object from_serialized(const std::string& text) {
    return json_to_py(json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_promptlint, m) {
    m.doc() = "static analysis toolkit for agent system prompts";
    m.attr("__version__") = "0.1.0";

    py::register_exception<promptlint::error>(m, "PromptlintError");

    m.def(
        "parse",
        [](const std::string& text) {
            promptlint::parse_result result = promptlint::parse(text);
            json j;
            j["ast"] = json::parse(promptlint::serialize_ast(result.root));
            j["warnings"] = json::array();
            for (const promptlint::parse_diagnostic& w : result.warnings) {
                j["warnings"].push_back(
                    {{"line", w.line}, {"message", w.message}});
            }
            return json_to_py(j);
        },
        py::arg("text"), "Parse a prompt into its typed tree plus warnings.");

    m.def(
        "profile",
        [](const std::string& text) {
            promptlint::parse_result result = promptlint::parse(text);
            promptlint::structural_profile p = promptlint::profile(result.root);
            json j;
            j["node_count"] = p.node_count;
            j["max_depth"] = p.max_depth;
            j["section_count"] = p.section_count;
            j["top_level_directive_count"] = p.top_level_directive_count;
            json per_kind;
            for (int k = 0; k < 8; ++k) {
                promptlint::node_kind kind = static_cast<promptlint::node_kind>(k);
                per_kind[std::string(promptlint::to_string(kind))] =
                    p.count_of(kind);
            }
            j["count_per_kind"] = std::move(per_kind);
            return json_to_py(j);
        },
        py::arg("text"), "Structural profile of a prompt.");

    m.def(
        "annotate",
        [](const std::string& text, const std::optional<std::string>& lexicon) {
            promptlint::parse_result result = promptlint::parse(text);
            promptlint::role_lexicon lex =
                lexicon ? promptlint::load_lexicon(*lexicon)
                        : promptlint::role_lexicon::defaults();
            promptlint::annotated_document ad =
                promptlint::annotate(result.root, lex);
            json j;
            j["annotations"] = json::array();
            for (const auto& [path, ann] : ad.annotations) {
                json ja;
                ja["path"] = path;
                ja["role"] = std::string(promptlint::to_string(ann.node_role));
                ja["channel"] =
                    std::string(promptlint::to_string(ann.node_channel));
                ja["provenance"] =
                    std::string(promptlint::to_string(ann.provenance));
                j["annotations"].push_back(std::move(ja));
            }
            promptlint::channel_distribution_result dist =
                promptlint::channel_distribution(ad);
            json jd;
            for (const auto& [ch, fraction] : dist.fractions) {
                jd[std::string(promptlint::to_string(ch))] = fraction;
            }
            jd["unclassified"] = dist.unclassified_fraction;
            j["distribution"] = std::move(jd);
            return json_to_py(j);
        },
        py::arg("text"), py::arg("lexicon") = std::nullopt,
        "Role and channel annotations with the channel distribution.");

    m.def(
        "diff",
        [](const std::string& old_text, const std::string& new_text) {
            promptlint::parse_result old_doc = promptlint::parse(old_text);
            promptlint::parse_result new_doc = promptlint::parse(new_text);
            promptlint::change_set changes =
                promptlint::diff(old_doc.root, new_doc.root);
            return from_serialized(promptlint::serialize_change_set(changes));
        },
        py::arg("old_text"), py::arg("new_text"),
        "Hash-anchored change set between two prompt versions.");

    m.def(
        "session_variance",
        [](const std::vector<std::string>& texts) {
            std::vector<promptlint::annotated_document> sessions;
            sessions.reserve(texts.size());
            for (const std::string& text : texts) {
                promptlint::parse_result result = promptlint::parse(text);
                sessions.push_back(promptlint::annotate(result.root));
            }
            std::vector<std::string> out;
            for (promptlint::channel ch : promptlint::session_variance(sessions)) {
                out.emplace_back(promptlint::to_string(ch));
            }
            return out;
        },
        py::arg("texts"),
        "Channels that vary across session captures of one prompt version.");

    m.def(
        "load_blocks",
        [](const std::string& json_text) {
            promptlint::block_set set = promptlint::load_blocks(json_text);
            return from_serialized(promptlint::serialize_blocks(set));
        },
        py::arg("json_text"), "Validate and normalize a block annotation.");

    m.def(
        "lint",
        [](const std::string& blocks_json,
           const std::optional<std::string>& rules_json,
           const std::optional<std::string>& replay_dir, const std::string& model,
           int jobs) {
            promptlint::block_set blocks = promptlint::load_blocks(blocks_json);
            std::vector<promptlint::rule> rules =
                rules_json ? promptlint::load_rules(*rules_json)
                           : promptlint::builtin_rules();
            promptlint::cost_ledger ledger;
            std::unique_ptr<promptlint::replay_gateway> gateway;
            if (replay_dir) {
                gateway = std::make_unique<promptlint::replay_gateway>(*replay_dir,
                                                                       ledger);
            }
            promptlint::run_options opts;
            opts.model_id = model;
            opts.jobs = jobs;
            promptlint::directed_result result =
                promptlint::run_directed(blocks, rules, gateway.get(), opts);
            return from_serialized(
                promptlint::serialize_patterns(result.patterns, result.report));
        },
        py::arg("blocks_json"), py::arg("rules_json") = std::nullopt,
        py::arg("replay_dir") = std::nullopt, py::arg("model") = "lint-judge",
        py::arg("jobs") = 1,
        "Directed rule evaluation over a block annotation; replay-only.");

    m.def(
        "scour",
        [](const std::string& target_text, const std::vector<std::string>& models,
           const std::string& replay_dir, int k, int max_passes,
           const std::string& target_id) {
            promptlint::cost_ledger ledger;
            promptlint::replay_gateway gateway(replay_dir, ledger);
            promptlint::campaign_options opts;
            opts.target_id = target_id;
            opts.k = k;
            opts.max_passes = max_passes;
            promptlint::campaign c =
                promptlint::run_campaign(target_text, models, gateway, opts);
            return from_serialized(promptlint::serialize_campaign(c));
        },
        py::arg("target_text"), py::arg("models"), py::arg("replay_dir"),
        py::arg("k") = 3, py::arg("max_passes") = 0,
        py::arg("target_id") = "target",
        "Replay a scouring campaign from a recorded store.");

    m.def(
        "severity_distribution",
        [](const std::vector<std::string>& severities) {
            return from_serialized(promptlint::serialize_severity_distribution(
                promptlint::compute_severity_distribution(severities)));
        },
        py::arg("severities"),
        "Counts and largest-remainder percentages per severity level.");

    m.def(
        "cost_breakdown",
        [](const std::string& ledger_json, std::int64_t findings) {
            std::vector<promptlint::cost_record> records =
                promptlint::load_ledger(ledger_json);
            return from_serialized(promptlint::serialize_cost_breakdown(
                promptlint::cost_breakdown(records, findings)));
        },
        py::arg("ledger_json"), py::arg("findings") = 0,
        "Per-model cost totals and cost per finding from a ledger file.");

    m.def("full_search_space", &promptlint::full_search_space,
          py::arg("block_count"), py::arg("rule_count"),
          "Unfiltered pair-evaluation count: blocks^2 * rules.");
}
