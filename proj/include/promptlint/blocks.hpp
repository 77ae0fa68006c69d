#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "promptlint/ast.hpp"
#include "promptlint/gateway.hpp"

namespace promptlint {

enum class block_tier { system, domain, application };
enum class block_modality { mandate, prohibition, guidance, information };

std::string_view to_string(block_tier t);
block_tier tier_from_string(std::string_view name);
std::string_view to_string(block_modality m);
block_modality modality_from_string(std::string_view name);

/// system > domain > application.
bool tier_dominates(block_tier a, block_tier b);

struct block {
    std::string id;
    block_tier tier = block_tier::application;
    std::string category;  // freeform
    block_modality modality = block_modality::information;
    std::vector<std::string> scope;  // lowercase tags, sorted, non-empty
    int start_line = 0;              // 1-based inclusive
    int end_line = 0;
    std::string text;
};

struct block_set {
    std::string source_id;
    std::vector<block> blocks;  // spans ordered and non-overlapping
};

inline constexpr std::string_view blocks_format_version = "promptlint-blocks/1";

/// Parse and validate the block annotation format. Throws validation_error
/// naming the offending block on duplicate ids, overlapping or unordered
/// spans, unknown tier/modality, empty scope, or bad span.
block_set load_blocks(std::string_view json_text);
std::string serialize_blocks(const block_set& set);

/// Sorted intersection of scope tags.
std::vector<std::string> scope_overlap(const block& a, const block& b);

/// Ask a model to decompose a parsed document into classified blocks.
/// One re-ask retry on malformed output; a second failure throws
/// decomposition_error carrying the raw response.
block_set decompose_with_llm(const node& document, llm_gateway& gateway,
                             const std::string& model_id);

/// The prompt sent by decompose_with_llm; exposed for replay tooling.
std::string render_decompose_prompt(const node& document);

}  // namespace promptlint
