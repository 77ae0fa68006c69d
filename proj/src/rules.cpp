#include "promptlint/rules.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "nlohmann/json.hpp"
#include "promptlint/ast.hpp"
#include "promptlint/errors.hpp"
#include "promptlint/textutil.hpp"

namespace promptlint {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view mode_names[] = {"structural", "llm", "hybrid"};
constexpr std::string_view severity_names[] = {"critical", "major", "minor"};

const char* verdict_contract =
    "Answer with a single fenced json block:\n"
    "```json\n"
    "{\"interferes\": true, \"severity\": \"critical|major|minor\", "
    "\"rationale\": \"...\", \"statically_detectable\": true}\n"
    "```\n"
    "Set \"interferes\" to false when the blocks coexist without conflict.\n"
    "\"statically_detectable\" means a reviewer could find this without "
    "running any model, from the block texts alone.\n";

std::string describe_block(const char* label, const block& b) {
    std::string out = label;
    out += " (id " + b.id + ", tier " + std::string(to_string(b.tier)) +
           ", modality " + std::string(to_string(b.modality)) + ", scope ";
    for (std::size_t i = 0; i < b.scope.size(); ++i) {
        if (i > 0) out += ", ";
        out += b.scope[i];
    }
    out += "):\n" + b.text + "\n";
    return out;
}

}  // namespace

std::string_view to_string(detection_mode m) {
    return mode_names[static_cast<int>(m)];
}

detection_mode detection_mode_from_string(std::string_view name) {
    for (int i = 0; i < 3; ++i) {
        if (mode_names[i] == name) return static_cast<detection_mode>(i);
    }
    throw validation_error("unknown detection mode: '" + std::string(name) + "'");
}

std::string_view to_string(impact_severity s) {
    return severity_names[static_cast<int>(s)];
}

impact_severity impact_severity_from_string(std::string_view name) {
    for (int i = 0; i < 3; ++i) {
        if (severity_names[i] == name) return static_cast<impact_severity>(i);
    }
    throw validation_error("unknown impact severity: '" + std::string(name) + "'");
}

std::vector<rule> builtin_rules() {
    std::vector<rule> rules;

    rule mp;
    mp.id = "mandate_prohibition";
    mp.interference_type = "direct_contradiction";
    mp.mode = detection_mode::hybrid;
    mp.required_modalities = {block_modality::mandate, block_modality::prohibition};
    mp.require_scope_overlap = true;
    mp.max_severity = impact_severity::critical;
    mp.prompt_template =
        "Two blocks from one system prompt give a mandate and a prohibition "
        "over overlapping scope. Decide whether an agent following both to "
        "the letter is forced into a contradiction.\n\n"
        "{{a_block}}\n{{b_block}}\n"
        "Shared scope: {{overlap}}\n\n";
    mp.prompt_template += verdict_contract;
    rules.push_back(std::move(mp));

    rule so;
    so.id = "scope_overlap_redundancy";
    so.interference_type = "scope_overlap";
    so.mode = detection_mode::llm;
    so.require_scope_overlap = true;
    so.max_severity = impact_severity::major;
    so.prompt_template =
        "Two blocks from one system prompt govern overlapping scope. Decide "
        "whether they interfere: restating each other, pulling in different "
        "directions, or leaving precedence unclear when both apply.\n\n"
        "{{a_block}}\n{{b_block}}\n"
        "Shared scope: {{overlap}}\n\n";
    so.prompt_template += verdict_contract;
    rules.push_back(std::move(so));

    rule pm;
    pm.id = "priority_marker_ambiguity";
    pm.interference_type = "priority_ambiguity";
    pm.mode = detection_mode::structural;
    pm.require_scope_overlap = true;
    pm.max_severity = impact_severity::minor;
    rules.push_back(std::move(pm));

    rule dep;
    dep.id = "implicit_dependency";
    dep.interference_type = "implicit_dependency";
    dep.mode = detection_mode::llm;
    dep.require_scope_overlap = true;
    dep.max_severity = impact_severity::major;
    dep.prompt_template =
        "Two blocks from one system prompt share scope. Decide whether one "
        "silently depends on the other: following the first correctly "
        "requires knowing the second, but nothing links them.\n\n"
        "{{a_block}}\n{{b_block}}\n"
        "Shared scope: {{overlap}}\n\n";
    dep.prompt_template += verdict_contract;
    rules.push_back(std::move(dep));

    rule dup;
    dup.id = "verbatim_duplication";
    dup.interference_type = "verbatim_duplication";
    dup.mode = detection_mode::structural;
    dup.require_scope_overlap = true;
    dup.max_severity = impact_severity::minor;
    rules.push_back(std::move(dup));

    return rules;
}

std::vector<rule> load_rules(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) {
        throw parse_error("malformed rules JSON", std::string(json_text));
    }
    if (j.value("format", "") != rules_format_version) {
        throw validation_error("unsupported rules format version: '" +
                               j.value("format", "") + "'");
    }
    std::vector<rule> rules;
    for (const json& jr : j.at("rules")) {
        rule r;
        r.id = jr.at("id").get<std::string>();
        r.interference_type = jr.value("interference_type", r.id);
        r.mode = detection_mode_from_string(jr.at("mode").get<std::string>());
        for (const json& m : jr.value("required_modalities", json::array())) {
            r.required_modalities.push_back(
                modality_from_string(m.get<std::string>()));
        }
        r.require_scope_overlap = jr.value("require_scope_overlap", true);
        r.prompt_template = jr.value("prompt_template", "");
        r.max_severity =
            impact_severity_from_string(jr.value("max_severity", "minor"));
        if (r.mode != detection_mode::structural && r.prompt_template.empty()) {
            throw validation_error("rule '" + r.id + "' needs a prompt template");
        }
        rules.push_back(std::move(r));
    }
    return rules;
}

std::string serialize_rules(const std::vector<rule>& rules) {
    json j;
    j["format"] = std::string(rules_format_version);
    j["rules"] = json::array();
    for (const rule& r : rules) {
        json jr;
        jr["id"] = r.id;
        jr["interference_type"] = r.interference_type;
        jr["mode"] = std::string(to_string(r.mode));
        json mods = json::array();
        for (block_modality m : r.required_modalities) {
            mods.push_back(std::string(to_string(m)));
        }
        jr["required_modalities"] = std::move(mods);
        jr["require_scope_overlap"] = r.require_scope_overlap;
        if (!r.prompt_template.empty()) jr["prompt_template"] = r.prompt_template;
        jr["max_severity"] = std::string(to_string(r.max_severity));
        j["rules"].push_back(std::move(jr));
    }
    return j.dump(2) + "\n";
}

std::int64_t full_search_space(std::int64_t block_count, std::int64_t rule_count) {
    return block_count * block_count * rule_count;
}

std::vector<std::pair<const block*, const block*>> prefilter(
    const block_set& blocks, const rule& r) {
    std::vector<std::pair<const block*, const block*>> pairs;
    for (std::size_t i = 0; i < blocks.blocks.size(); ++i) {
        for (std::size_t j = i + 1; j < blocks.blocks.size(); ++j) {
            const block& a = blocks.blocks[i];
            const block& b = blocks.blocks[j];
            if (!r.required_modalities.empty()) {
                std::vector<block_modality> have = {a.modality, b.modality};
                std::vector<block_modality> want = r.required_modalities;
                std::sort(have.begin(), have.end());
                std::sort(want.begin(), want.end());
                if (have != want) continue;
            }
            if (r.require_scope_overlap && scope_overlap(a, b).empty()) continue;
            pairs.emplace_back(&a, &b);
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
        if (x.first->id != y.first->id) return x.first->id < y.first->id;
        return x.second->id < y.second->id;
    });
    return pairs;
}

namespace {

bool defensive_pair_ok(const rule& r, const block& a, const block& b) {
    if (!r.required_modalities.empty()) {
        std::vector<block_modality> have = {a.modality, b.modality};
        std::vector<block_modality> want = r.required_modalities;
        std::sort(have.begin(), have.end());
        std::sort(want.begin(), want.end());
        if (have != want) return false;
    }
    return !r.require_scope_overlap || !scope_overlap(a, b).empty();
}

std::vector<std::string> default_markers() {
    return parse_options::defaults().directive_markers;
}

bool shares_capitalized_token(const block& a, const block& b, std::size_t min_len) {
    std::vector<std::string> ta = capitalized_tokens(a.text, min_len);
    std::vector<std::string> tb = capitalized_tokens(b.text, min_len);
    std::sort(tb.begin(), tb.end());
    for (const std::string& tok : ta) {
        if (std::binary_search(tb.begin(), tb.end(), tok)) return true;
    }
    return false;
}

}  // namespace

std::optional<interference_pattern> eval_structural(const rule& r, const block& a,
                                                    const block& b,
                                                    const pattern_options& opts) {
    if (r.mode == detection_mode::llm) {
        throw contract_error("eval_structural called on an llm-mode rule '" +
                             r.id + "'");
    }
    if (!defensive_pair_ok(r, a, b)) return std::nullopt;

    auto make = [&](impact_severity sev, std::string rationale) {
        interference_pattern p;
        p.rule_id = r.id;
        p.block_a = a.id;
        p.block_b = b.id;
        p.severity = sev;
        p.rationale = std::move(rationale);
        p.statically_detectable = true;
        p.detection_provenance = "structural";
        return p;
    };

    const std::string& type =
        r.interference_type.empty() ? r.id : r.interference_type;

    if (type == "verbatim_duplication") {
        std::string na = normalize_whitespace(a.text);
        std::string nb = normalize_whitespace(b.text);
        if (na.size() >= opts.duplication_min_length && na == nb) {
            return make(impact_severity::minor,
                        "blocks repeat the same text verbatim");
        }
        return std::nullopt;
    }

    if (type == "priority_ambiguity") {
        std::vector<std::string> markers = opts.priority_markers.empty()
                                               ? default_markers()
                                               : opts.priority_markers;
        bool both_marked = contains_any_phrase(a.text, markers) &&
                           contains_any_phrase(b.text, markers);
        bool no_dominance = !tier_dominates(a.tier, b.tier) &&
                            !tier_dominates(b.tier, a.tier);
        if (both_marked && no_dominance && !scope_overlap(a, b).empty()) {
            return make(impact_severity::minor,
                        "both blocks carry priority markers at equal tier over "
                        "overlapping scope");
        }
        return std::nullopt;
    }

    if (type == "direct_contradiction") {
        std::vector<block_modality> have = {a.modality, b.modality};
        std::sort(have.begin(), have.end());
        bool hard_pair = have[0] == block_modality::mandate &&
                         have[1] == block_modality::prohibition;
        if (hard_pair && !scope_overlap(a, b).empty() &&
            shares_capitalized_token(a, b, opts.shared_token_min_length)) {
            return make(impact_severity::critical,
                        "mandate and prohibition share an action token over "
                        "overlapping scope");
        }
        return std::nullopt;
    }

    throw contract_error("no structural predicate for rule '" + r.id + "'");
}

namespace {

std::string replace_all(std::string text, std::string_view needle,
                        std::string_view replacement) {
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), replacement);
        pos += replacement.size();
    }
    return text;
}

}  // namespace

std::string render_rule_prompt(const rule& r, const block& a, const block& b) {
    std::string overlap;
    for (const std::string& tag : scope_overlap(a, b)) {
        if (!overlap.empty()) overlap += ", ";
        overlap += tag;
    }
    std::string prompt = r.prompt_template;
    prompt = replace_all(std::move(prompt), "{{a_block}}",
                         describe_block("Block A", a));
    prompt = replace_all(std::move(prompt), "{{b_block}}",
                         describe_block("Block B", b));
    prompt = replace_all(std::move(prompt), "{{a_id}}", a.id);
    prompt = replace_all(std::move(prompt), "{{b_id}}", b.id);
    prompt = replace_all(std::move(prompt), "{{a_text}}", a.text);
    prompt = replace_all(std::move(prompt), "{{b_text}}", b.text);
    prompt = replace_all(std::move(prompt), "{{overlap}}", overlap);
    prompt = replace_all(std::move(prompt), "{{type}}", r.interference_type);
    return prompt;
}

namespace {

struct verdict {
    bool interferes = false;
    impact_severity severity = impact_severity::minor;
    std::string rationale;
    bool statically_detectable = false;
};

verdict parse_verdict(std::string_view raw) {
    std::string payload = extract_fenced_block(raw, "json");
    if (payload.empty()) {
        throw parse_error("no fenced json verdict in response", std::string(raw));
    }
    json j = json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.contains("interferes") ||
        !j.at("interferes").is_boolean()) {
        throw parse_error("malformed verdict payload", std::string(raw));
    }
    verdict v;
    v.interferes = j.at("interferes").get<bool>();
    if (v.interferes) {
        if (!j.contains("severity")) {
            throw parse_error("verdict missing severity", std::string(raw));
        }
        v.severity =
            impact_severity_from_string(j.at("severity").get<std::string>());
    }
    v.rationale = j.value("rationale", "");
    v.statically_detectable = j.value("statically_detectable", false);
    return v;
}

impact_severity clamp_severity(impact_severity sev, impact_severity max_sev) {
    return static_cast<int>(sev) < static_cast<int>(max_sev) ? max_sev : sev;
}

verdict ask_for_verdict(const rule& r, const block& a, const block& b,
                        llm_gateway& gateway, const std::string& model_id,
                        std::int64_t* llm_calls) {
    chat_request request;
    request.model_id = model_id;
    request.messages = {{"user", render_rule_prompt(r, a, b)}};
    for (int attempt = 0; attempt < 2; ++attempt) {
        chat_response response = gateway.complete(request);
        if (llm_calls != nullptr) *llm_calls += 1;
        try {
            return parse_verdict(response.text);
        } catch (const parse_error&) {
            if (attempt == 1) throw;
            request.messages.push_back({"assistant", response.text});
            request.messages.push_back(
                {"user",
                 "That response was not valid. Reply again with only the fenced "
                 "json verdict block."});
        }
    }
    throw parse_error("unreachable", "");
}

std::optional<interference_pattern> eval_llm_impl(const rule& r, const block& a,
                                                  const block& b,
                                                  llm_gateway& gateway,
                                                  const std::string& model_id,
                                                  std::int64_t* llm_calls) {
    if (r.mode == detection_mode::structural) {
        throw contract_error("eval_llm called on a structural rule '" + r.id + "'");
    }
    if (r.prompt_template.empty()) {
        throw contract_error("rule '" + r.id + "' has no prompt template");
    }
    verdict v = ask_for_verdict(r, a, b, gateway, model_id, llm_calls);
    if (!v.interferes) return std::nullopt;
    interference_pattern p;
    p.rule_id = r.id;
    p.block_a = a.id;
    p.block_b = b.id;
    p.severity = clamp_severity(v.severity, r.max_severity);
    p.rationale = v.rationale;
    p.statically_detectable = v.statically_detectable;
    p.detection_provenance = "llm";
    return p;
}

}  // namespace

std::optional<interference_pattern> eval_llm(const rule& r, const block& a,
                                             const block& b, llm_gateway& gateway,
                                             const std::string& model_id) {
    return eval_llm_impl(r, a, b, gateway, model_id, nullptr);
}

directed_result run_directed(const block_set& blocks, const std::vector<rule>& rules,
                             llm_gateway* gateway, const run_options& opts) {
    directed_result result;

    struct task {
        const rule* r;
        const block* a;
        const block* b;
    };
    std::vector<task> tasks;
    for (const rule& r : rules) {
        auto pairs = prefilter(blocks, r);
        result.report.pairs_per_rule[r.id] =
            static_cast<std::int64_t>(pairs.size());
        for (const auto& [a, b] : pairs) tasks.push_back({&r, a, b});
    }
    result.report.evaluations = static_cast<std::int64_t>(tasks.size());

    struct slot {
        std::optional<interference_pattern> pattern;
        std::string error;
        std::int64_t llm_calls = 0;
    };
    std::vector<slot> slots(tasks.size());

    auto evaluate = [&](std::size_t index) {
        const task& t = tasks[index];
        slot& s = slots[index];
        try {
            if (t.r->mode == detection_mode::structural) {
                s.pattern = eval_structural(*t.r, *t.a, *t.b);
                return;
            }
            if (t.r->mode == detection_mode::hybrid) {
                std::optional<interference_pattern> candidate =
                    eval_structural(*t.r, *t.a, *t.b);
                if (!candidate) return;
                if (gateway == nullptr) {
                    throw contract_error("rule '" + t.r->id +
                                         "' needs a gateway for confirmation");
                }
                std::optional<interference_pattern> confirmed = eval_llm_impl(
                    *t.r, *t.a, *t.b, *gateway, opts.model_id, &s.llm_calls);
                if (confirmed) {
                    confirmed->statically_detectable = true;
                    confirmed->detection_provenance = "structural";
                    if (confirmed->rationale.empty()) {
                        confirmed->rationale = candidate->rationale;
                    }
                    s.pattern = std::move(confirmed);
                }
                return;
            }
            if (gateway == nullptr) {
                throw contract_error("rule '" + t.r->id +
                                     "' needs a gateway but none was given");
            }
            s.pattern = eval_llm_impl(*t.r, *t.a, *t.b, *gateway, opts.model_id,
                                      &s.llm_calls);
        } catch (const error& e) {
            s.error = "rule " + t.r->id + " pair (" + t.a->id + ", " + t.b->id +
                      "): " + e.what();
        }
    };

    int jobs = std::max(1, opts.jobs);
    if (jobs == 1 || tasks.size() <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) evaluate(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        int worker_count = std::min<std::size_t>(static_cast<std::size_t>(jobs),
                                                 tasks.size());
        workers.reserve(static_cast<std::size_t>(worker_count));
        for (int w = 0; w < worker_count; ++w) {
            workers.emplace_back([&]() {
                while (true) {
                    std::size_t index = next.fetch_add(1);
                    if (index >= tasks.size()) break;
                    evaluate(index);
                }
            });
        }
        for (std::thread& t : workers) t.join();
    }

    for (slot& s : slots) {
        result.report.llm_calls += s.llm_calls;
        if (!s.error.empty()) result.report.errors.push_back(std::move(s.error));
        if (s.pattern) result.patterns.push_back(std::move(*s.pattern));
    }

    std::sort(result.patterns.begin(), result.patterns.end(),
              [](const interference_pattern& x, const interference_pattern& y) {
                  if (x.severity != y.severity) {
                      return static_cast<int>(x.severity) <
                             static_cast<int>(y.severity);
                  }
                  if (x.rule_id != y.rule_id) return x.rule_id < y.rule_id;
                  if (x.block_a != y.block_a) return x.block_a < y.block_a;
                  return x.block_b < y.block_b;
              });
    return result;
}

std::string serialize_patterns(const std::vector<interference_pattern>& patterns,
                               const run_report& report) {
    json j;
    j["format"] = "promptlint-patterns/1";
    j["patterns"] = json::array();
    for (const interference_pattern& p : patterns) {
        json jp;
        jp["rule_id"] = p.rule_id;
        jp["block_a"] = p.block_a;
        jp["block_b"] = p.block_b;
        jp["severity"] = std::string(to_string(p.severity));
        jp["rationale"] = p.rationale;
        jp["statically_detectable"] = p.statically_detectable;
        jp["detection_provenance"] = p.detection_provenance;
        j["patterns"].push_back(std::move(jp));
    }
    json jr;
    jr["evaluations"] = report.evaluations;
    jr["llm_calls"] = report.llm_calls;
    json per_rule;
    for (const auto& [id, count] : report.pairs_per_rule) per_rule[id] = count;
    jr["pairs_per_rule"] = std::move(per_rule);
    jr["errors"] = report.errors;
    j["report"] = std::move(jr);
    return j.dump(2) + "\n";
}

}  // namespace promptlint
