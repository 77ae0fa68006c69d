#include "promptlint/scour.hpp"

#include <fstream>

#include "nlohmann/json.hpp"
#include "promptlint/errors.hpp"
#include "promptlint/textutil.hpp"

namespace promptlint {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view severity_names[] = {"curious", "notable", "concerning",
                                               "alarming"};
constexpr std::string_view status_names[] = {"converged", "roster_exhausted",
                                             "max_passes", "aborted"};

const char* output_contract =
    "Report with a single fenced json block:\n"
    "```json\n"
    "{\n"
    "  \"findings\": [\n"
    "    {\"id\": \"p1-f1\", \"category\": \"...\",\n"
    "     \"severity\": \"curious|notable|concerning|alarming\",\n"
    "     \"title\": \"...\", \"description\": \"...\", \"location\": [12, 18]}\n"
    "  ],\n"
    "  \"unexplored\": [\"...\"],\n"
    "  \"should_send_another\": true\n"
    "}\n"
    "```\n"
    "\"location\" is an optional [start_line, end_line] pair into the target. "
    "Severity is how much a maintainer should care: curious, notable, "
    "concerning, alarming.\n";

std::string embed_target(std::string_view target_text) {
    std::string out = "The system prompt under exploration:\n\n";
    out += "--- BEGIN SYSTEM PROMPT ---\n";
    out += target_text;
    if (!target_text.empty() && target_text.back() != '\n') out += '\n';
    out += "--- END SYSTEM PROMPT ---\n\n";
    return out;
}

}  // namespace

std::string_view to_string(scour_severity s) {
    return severity_names[static_cast<int>(s)];
}

scour_severity scour_severity_from_string(std::string_view name) {
    for (int i = 0; i < 4; ++i) {
        if (severity_names[i] == name) return static_cast<scour_severity>(i);
    }
    throw validation_error("unknown scour severity: '" + std::string(name) + "'");
}

std::string_view to_string(campaign_status s) {
    return status_names[static_cast<int>(s)];
}

campaign_status campaign_status_from_string(std::string_view name) {
    for (int i = 0; i < 4; ++i) {
        if (status_names[i] == name) return static_cast<campaign_status>(i);
    }
    throw validation_error("unknown campaign status: '" + std::string(name) + "'");
}

std::int64_t campaign::total_findings() const {
    std::int64_t total = 0;
    for (const pass_report& p : passes) {
        total += static_cast<std::int64_t>(p.findings.size());
    }
    return total;
}

std::string render_first_prompt(std::string_view target_text) {
    if (target_text.empty()) {
        throw contract_error("cannot scour an empty target");
    }
    std::string prompt =
        "You are exploring a system prompt. Not auditing it, not checking it "
        "against rules; just reading it carefully and noting what you find "
        "interesting.\n\n"
        "\"Interesting\" is deliberately vague. Trust your judgment. You might "
        "notice: instructions that seem to contradict each other; rules stated "
        "multiple times in different places; implicit assumptions that aren't "
        "declared; surprising structural choices; scope ambiguities; things "
        "that would confuse a model trying to follow all instructions "
        "simultaneously; interactions between distant parts of the prompt; "
        "anything else that catches your attention.\n\n"
        "After documenting what you found, document what you DIDN'T explore. "
        "What areas did you skim? What questions occurred to you that you "
        "didn't pursue?\n\n"
        "Finally: should we send another explorer after you? Would another "
        "pass, armed with your map, find things you missed?\n\n";
    prompt += embed_target(target_text);
    prompt += output_contract;
    return prompt;
}

std::string render_followup_prompt(std::string_view target_text,
                                   const std::vector<pass_report>& prior) {
    if (target_text.empty()) {
        throw contract_error("cannot scour an empty target");
    }
    if (prior.empty()) {
        throw contract_error("follow-up prompt needs at least one prior pass");
    }
    std::string prompt =
        "You are exploring a system prompt. Previous explorers have already "
        "been through it and left you their map. Your job is to go where they "
        "didn't.\n\n"
        "DO NOT repeat their findings. They found what they found. You are "
        "looking for what they missed, what they flagged as unexplored, and "
        "anything their framing caused them to overlook.\n\n"
        "The map so far:\n\n";
    for (const pass_report& p : prior) {
        prompt += "Pass " + std::to_string(p.pass_index) + " (" + p.model_id +
                  ") found:\n";
        if (p.findings.empty()) prompt += "  (nothing)\n";
        for (const scour_finding& f : p.findings) {
            prompt += "  - [" + std::string(to_string(f.severity)) + "] " +
                      f.title + " (category: " + f.category + ")\n";
        }
        if (!p.unexplored.empty()) {
            prompt += "Pass " + std::to_string(p.pass_index) +
                      " left unexplored:\n";
            for (const std::string& u : p.unexplored) prompt += "  - " + u + "\n";
        }
        prompt += "\n";
    }
    prompt +=
        "Be honest about diminishing returns. Set should_send_another to FALSE "
        "if: most of your findings are refinements or restatements of existing "
        "ones; the unexplored territory is mostly about runtime behavior; you "
        "found fewer than 3 genuinely new findings; the prior passes have "
        "already covered the major structural, security, operational, and "
        "semantic categories.\n\n"
        "It is better to say \"enough\" than to pad findings.\n\n";
    prompt += embed_target(target_text);
    prompt += output_contract;
    return prompt;
}

pass_report parse_pass_response(std::string_view raw, int pass_index,
                                const std::string& model_id) {
    std::string payload = extract_fenced_block(raw, "json");
    if (payload.empty()) {
        throw parse_error("no fenced json block in pass response",
                          std::string(raw));
    }
    json j = json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw parse_error("malformed pass payload", std::string(raw));
    }

    pass_report report;
    report.pass_index = pass_index;
    report.model_id = model_id;

    int index = 0;
    for (const json& jf : j.value("findings", json::array())) {
        ++index;
        if (!jf.is_object()) {
            throw parse_error("finding " + std::to_string(index) +
                                  " is not an object",
                              std::string(raw));
        }
        scour_finding f;
        f.pass_index = pass_index;
        f.model_id = model_id;
        f.id = jf.value("id", "");
        if (f.id.empty()) {
            f.id = "p" + std::to_string(pass_index) + "-f" + std::to_string(index);
        }
        f.category = jf.value("category", "uncategorized");
        if (!jf.contains("severity") || !jf.at("severity").is_string()) {
            throw parse_error("finding " + f.id + " is missing a severity",
                              std::string(raw));
        }
        try {
            f.severity =
                scour_severity_from_string(jf.at("severity").get<std::string>());
        } catch (const validation_error& e) {
            throw parse_error(std::string(e.what()) + " in finding " + f.id,
                              std::string(raw));
        }
        f.title = jf.value("title", "");
        f.description = jf.value("description", "");
        if (jf.contains("location") && !jf.at("location").is_null()) {
            const json& loc = jf.at("location");
            if (!loc.is_array() || loc.size() != 2 ||
                !loc[0].is_number_integer() || !loc[1].is_number_integer()) {
                throw parse_error("finding " + f.id +
                                      " has a malformed location span",
                                  std::string(raw));
            }
            f.location = {loc[0].get<int>(), loc[1].get<int>()};
        }
        report.findings.push_back(std::move(f));
    }

    for (const json& ju : j.value("unexplored", json::array())) {
        if (!ju.is_string()) {
            throw parse_error("unexplored entries must be strings",
                              std::string(raw));
        }
        report.unexplored.push_back(ju.get<std::string>());
    }

    if (!j.contains("should_send_another")) {
        throw parse_error("pass response is missing the continue vote",
                          std::string(raw));
    }
    const json& vote = j.at("should_send_another");
    if (vote.is_boolean()) {
        report.should_send_another = vote.get<bool>();
    } else if (vote.is_string()) {
        std::string v = to_lower_ascii(vote.get<std::string>());
        if (v != "true" && v != "false") {
            throw parse_error("unintelligible continue vote '" +
                                  vote.get<std::string>() + "'",
                              std::string(raw));
        }
        report.should_send_another = v == "true";
    } else {
        throw parse_error("pass response is missing the continue vote",
                          std::string(raw));
    }
    return report;
}

bool check_convergence(const std::vector<pass_report>& passes, int k) {
    if (k < 1) throw contract_error("convergence threshold k must be >= 1");
    if (passes.size() < static_cast<std::size_t>(k)) return false;
    for (std::size_t i = passes.size() - static_cast<std::size_t>(k);
         i < passes.size(); ++i) {
        if (passes[i].should_send_another) return false;
    }
    return true;
}

namespace {

json finding_to_json(const scour_finding& f) {
    json jf;
    jf["id"] = f.id;
    jf["pass_index"] = f.pass_index;
    jf["model_id"] = f.model_id;
    jf["category"] = f.category;
    jf["severity"] = std::string(to_string(f.severity));
    jf["title"] = f.title;
    jf["description"] = f.description;
    if (f.location) jf["location"] = {f.location->first, f.location->second};
    return jf;
}

json pass_to_json(const pass_report& p) {
    json jp;
    jp["pass_index"] = p.pass_index;
    jp["model_id"] = p.model_id;
    jp["should_send_another"] = p.should_send_another;
    jp["prompt_tokens"] = p.prompt_tokens;
    jp["completion_tokens"] = p.completion_tokens;
    jp["findings"] = json::array();
    for (const scour_finding& f : p.findings) {
        jp["findings"].push_back(finding_to_json(f));
    }
    jp["unexplored"] = p.unexplored;
    return jp;
}

void append_state_line(const std::string& path, const json& line) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::app);
    out << line.dump() << "\n";
}

}  // namespace

campaign run_campaign(std::string_view target_text,
                      const std::vector<std::string>& roster,
                      llm_gateway& gateway, const campaign_options& opts) {
    if (roster.empty()) throw contract_error("campaign roster is empty");

    campaign c;
    c.target_id = opts.target_id;
    c.roster = roster;
    c.threshold_k = opts.k;

    json start;
    start["format"] = std::string(campaign_format_version);
    start["target_id"] = c.target_id;
    start["roster"] = roster;
    start["k"] = opts.k;
    append_state_line(opts.state_file, start);

    // One model call with the campaign's transport retry budget. Returns
    // nothing when the budget is exhausted (the campaign aborts).
    auto call = [&](const chat_request& request, pass_report& tally)
        -> std::optional<chat_response> {
        std::optional<std::int64_t> link;
        for (int attempt = 0; attempt <= opts.gateway_retries; ++attempt) {
            try {
                chat_response response = gateway.complete(request, link);
                tally.prompt_tokens += response.prompt_tokens;
                tally.completion_tokens += response.completion_tokens;
                return response;
            } catch (const transport_error& e) {
                link = e.call_id();
            }
        }
        return std::nullopt;
    };

    for (int pass_index = 1;; ++pass_index) {
        if (check_convergence(c.passes, opts.k)) {
            c.status = campaign_status::converged;
            break;
        }
        if (pass_index > static_cast<int>(roster.size())) {
            c.status = campaign_status::roster_exhausted;
            break;
        }
        if (opts.max_passes > 0 && pass_index > opts.max_passes) {
            c.status = campaign_status::max_passes;
            break;
        }

        const std::string& model_id = roster[static_cast<std::size_t>(pass_index - 1)];
        chat_request request;
        request.model_id = model_id;
        request.messages = {
            {"user", pass_index == 1
                         ? render_first_prompt(target_text)
                         : render_followup_prompt(target_text, c.passes)}};

        pass_report tally;  // accumulates token usage across the re-ask
        std::optional<chat_response> response = call(request, tally);
        if (!response) {
            c.status = campaign_status::aborted;
            break;
        }

        pass_report parsed;
        bool ok = false;
        for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
            try {
                parsed = parse_pass_response(response->text, pass_index, model_id);
                ok = true;
            } catch (const parse_error&) {
                if (attempt == 1) break;
                request.messages.push_back({"assistant", response->text});
                request.messages.push_back(
                    {"user",
                     "That response was not valid. Reply again with only the "
                     "fenced json block, matching the requested schema "
                     "exactly."});
                response = call(request, tally);
                if (!response) break;
            }
        }
        if (!ok) {
            c.status = campaign_status::aborted;
            break;
        }

        parsed.prompt_tokens = tally.prompt_tokens;
        parsed.completion_tokens = tally.completion_tokens;
        c.passes.push_back(std::move(parsed));
        append_state_line(opts.state_file, pass_to_json(c.passes.back()));
    }

    json end;
    end["status"] = std::string(to_string(c.status));
    end["total_findings"] = c.total_findings();
    append_state_line(opts.state_file, end);
    return c;
}

std::string serialize_campaign(const campaign& c) {
    json j;
    j["format"] = std::string(campaign_format_version);
    j["target_id"] = c.target_id;
    j["roster"] = c.roster;
    j["threshold_k"] = c.threshold_k;
    j["status"] = std::string(to_string(c.status));
    j["passes"] = json::array();
    for (const pass_report& p : c.passes) j["passes"].push_back(pass_to_json(p));
    return j.dump(2) + "\n";
}

campaign deserialize_campaign(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) {
        throw parse_error("malformed campaign JSON", std::string(json_text));
    }
    if (j.value("format", "") != campaign_format_version) {
        throw validation_error("unsupported campaign format version: '" +
                               j.value("format", "") + "'");
    }
    campaign c;
    c.target_id = j.value("target_id", "");
    for (const json& jm : j.value("roster", json::array())) {
        c.roster.push_back(jm.get<std::string>());
    }
    c.threshold_k = j.value("threshold_k", 3);
    c.status = campaign_status_from_string(j.value("status", "max_passes"));
    for (const json& jp : j.value("passes", json::array())) {
        pass_report p;
        p.pass_index = jp.at("pass_index").get<int>();
        p.model_id = jp.at("model_id").get<std::string>();
        p.should_send_another = jp.at("should_send_another").get<bool>();
        p.prompt_tokens = jp.value("prompt_tokens", std::int64_t{0});
        p.completion_tokens = jp.value("completion_tokens", std::int64_t{0});
        for (const json& jf : jp.value("findings", json::array())) {
            scour_finding f;
            f.id = jf.at("id").get<std::string>();
            f.pass_index = jf.value("pass_index", p.pass_index);
            f.model_id = jf.value("model_id", p.model_id);
            f.category = jf.value("category", "uncategorized");
            f.severity =
                scour_severity_from_string(jf.at("severity").get<std::string>());
            f.title = jf.value("title", "");
            f.description = jf.value("description", "");
            if (jf.contains("location") && jf.at("location").is_array()) {
                f.location = {jf.at("location")[0].get<int>(),
                              jf.at("location")[1].get<int>()};
            }
            p.findings.push_back(std::move(f));
        }
        for (const json& ju : jp.value("unexplored", json::array())) {
            p.unexplored.push_back(ju.get<std::string>());
        }
        c.passes.push_back(std::move(p));
    }
    return c;
}

}  // namespace promptlint
