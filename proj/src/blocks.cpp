#include "promptlint/blocks.hpp"

#include <algorithm>
#include <set>

#include "nlohmann/json.hpp"
#include "promptlint/errors.hpp"
#include "promptlint/textutil.hpp"

namespace promptlint {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view tier_names[] = {"system", "domain", "application"};
constexpr std::string_view modality_names[] = {"mandate", "prohibition", "guidance",
                                               "information"};

}  // namespace

std::string_view to_string(block_tier t) { return tier_names[static_cast<int>(t)]; }

block_tier tier_from_string(std::string_view name) {
    for (int i = 0; i < 3; ++i) {
        if (tier_names[i] == name) return static_cast<block_tier>(i);
    }
    throw validation_error("unknown tier: '" + std::string(name) + "'");
}

std::string_view to_string(block_modality m) {
    return modality_names[static_cast<int>(m)];
}

block_modality modality_from_string(std::string_view name) {
    for (int i = 0; i < 4; ++i) {
        if (modality_names[i] == name) return static_cast<block_modality>(i);
    }
    throw validation_error("unknown modality: '" + std::string(name) + "'");
}

bool tier_dominates(block_tier a, block_tier b) {
    return static_cast<int>(a) < static_cast<int>(b);
}

namespace {

void validate(const block_set& set) {
    std::set<std::string> ids;
    const block* prev = nullptr;
    for (const block& b : set.blocks) {
        if (b.id.empty()) throw validation_error("block with empty id");
        if (!ids.insert(b.id).second) {
            throw validation_error("duplicate block id '" + b.id + "'");
        }
        if (b.scope.empty()) {
            throw validation_error("block '" + b.id + "' has an empty scope");
        }
        for (const std::string& tag : b.scope) {
            if (tag != to_lower_ascii(tag)) {
                throw validation_error("block '" + b.id + "' scope tag '" + tag +
                                       "' is not lowercase");
            }
        }
        if (b.start_line < 1 || b.end_line < b.start_line) {
            throw validation_error("block '" + b.id + "' has an invalid span");
        }
        if (prev != nullptr && b.start_line <= prev->end_line) {
            throw validation_error("block '" + b.id + "' overlaps block '" +
                                   prev->id + "'");
        }
        prev = &b;
    }
}

}  // namespace

block_set load_blocks(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) {
        throw parse_error("malformed block annotation JSON", std::string(json_text));
    }
    if (j.value("format", "") != blocks_format_version) {
        throw validation_error("unsupported blocks format version: '" +
                               j.value("format", "") + "'");
    }
    block_set set;
    set.source_id = j.value("source_id", "");
    for (const json& jb : j.at("blocks")) {
        block b;
        b.id = jb.at("id").get<std::string>();
        b.tier = tier_from_string(jb.at("tier").get<std::string>());
        b.category = jb.value("category", "");
        b.modality = modality_from_string(jb.at("modality").get<std::string>());
        for (const json& tag : jb.at("scope")) {
            b.scope.push_back(tag.get<std::string>());
        }
        std::sort(b.scope.begin(), b.scope.end());
        b.scope.erase(std::unique(b.scope.begin(), b.scope.end()), b.scope.end());
        b.start_line = jb.at("span").at(0).get<int>();
        b.end_line = jb.at("span").at(1).get<int>();
        b.text = jb.at("text").get<std::string>();
        set.blocks.push_back(std::move(b));
    }
    validate(set);
    return set;
}

std::string serialize_blocks(const block_set& set) {
    json j;
    j["format"] = std::string(blocks_format_version);
    j["source_id"] = set.source_id;
    j["blocks"] = json::array();
    for (const block& b : set.blocks) {
        json jb;
        jb["id"] = b.id;
        jb["tier"] = std::string(to_string(b.tier));
        jb["category"] = b.category;
        jb["modality"] = std::string(to_string(b.modality));
        jb["scope"] = b.scope;
        jb["span"] = {b.start_line, b.end_line};
        jb["text"] = b.text;
        j["blocks"].push_back(std::move(jb));
    }
    return j.dump(2) + "\n";
}

std::vector<std::string> scope_overlap(const block& a, const block& b) {
    std::vector<std::string> out;
    std::set_intersection(a.scope.begin(), a.scope.end(), b.scope.begin(),
                          b.scope.end(), std::back_inserter(out));
    return out;
}

std::string render_decompose_prompt(const node& document) {
    std::string doc_text;
    walk(document, [&](const node& n, const std::vector<int>&) {
        if (n.text.empty()) return;
        if (!doc_text.empty()) doc_text += "\n";
        doc_text += "[" + std::to_string(n.start_line) + "-" +
                    std::to_string(n.end_line) + "] " + n.text;
    });
    std::string prompt =
        "Decompose the following system prompt into classified blocks.\n"
        "A block is a contiguous segment with one governing intent.\n\n"
        "For each block report:\n"
        "- id: short unique string\n"
        "- tier: system, domain, or application\n"
        "- category: freeform label\n"
        "- modality: mandate, prohibition, guidance, or information\n"
        "- scope: lowercase tags naming the topics or tools the block governs\n"
        "- span: [start_line, end_line] using the line numbers shown\n"
        "- text: the block text\n\n"
        "Blocks must not overlap and must appear in document order.\n"
        "Answer with a single fenced json block:\n"
        "```json\n"
        "{\"blocks\": [{\"id\": \"...\", \"tier\": \"...\", \"category\": \"...\", "
        "\"modality\": \"...\", \"scope\": [\"...\"], \"span\": [1, 2], "
        "\"text\": \"...\"}]}\n"
        "```\n\n"
        "The prompt, with line spans:\n\n";
    prompt += doc_text;
    prompt += "\n";
    return prompt;
}

block_set decompose_with_llm(const node& document, llm_gateway& gateway,
                             const std::string& model_id) {
    std::string prompt = render_decompose_prompt(document);
    chat_request request;
    request.model_id = model_id;
    request.messages = {{"user", prompt}};

    std::string last_raw;
    for (int attempt = 0; attempt < 2; ++attempt) {
        chat_response response = gateway.complete(request);
        last_raw = response.text;
        try {
            std::string payload = extract_fenced_block(response.text, "json");
            if (payload.empty()) {
                throw parse_error("no fenced json block in decomposition response",
                                  response.text);
            }
            json j = json::parse(payload, nullptr, false);
            if (j.is_discarded() || !j.contains("blocks")) {
                throw parse_error("malformed decomposition payload", response.text);
            }
            json wrapper;
            wrapper["format"] = std::string(blocks_format_version);
            wrapper["source_id"] = j.value("source_id", "llm-decomposition");
            wrapper["blocks"] = j.at("blocks");
            return load_blocks(wrapper.dump());
        } catch (const error& e) {
            if (attempt == 1) {
                throw decomposition_error(
                    std::string("block decomposition failed after retry: ") +
                        e.what(),
                    last_raw);
            }
            request.messages.push_back({"assistant", response.text});
            request.messages.push_back(
                {"user",
                 "That response was not valid. Reply again with only the fenced "
                 "json block, matching the requested schema exactly."});
        }
    }
    throw decomposition_error("unreachable", last_raw);
}

}  // namespace promptlint
