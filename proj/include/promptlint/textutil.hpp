#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace promptlint {

/// True when `text` is well-formed UTF-8 (overlongs and surrogates rejected).
bool is_valid_utf8(std::string_view text);

/// Collapse every run of whitespace to a single space and trim the ends.
/// Case is preserved.
std::string normalize_whitespace(std::string_view text);

/// Split into lines on '\n'; a trailing '\r' is stripped from each line.
/// "a\nb\n" yields {"a", "b"}; "" yields {}.
std::vector<std::string> split_lines(std::string_view text);

bool is_blank(std::string_view line);

/// Whole-word occurrence of `phrase` in `text`. Multi-word phrases match as a
/// token sequence separated by whitespace. Word characters are [A-Za-z0-9_].
bool contains_word_phrase(std::string_view text, std::string_view phrase,
                          bool case_insensitive = false);

/// True when any phrase in `phrases` occurs whole-word in `text`.
bool contains_any_phrase(std::string_view text,
                         const std::vector<std::string>& phrases,
                         bool case_insensitive = false);

/// Tokens of length >= min_len that start with an uppercase letter.
std::vector<std::string> capitalized_tokens(std::string_view text,
                                            std::size_t min_len);

std::string to_lower_ascii(std::string_view text);

/// Body of the last fenced code block tagged `info` (```info ... ```),
/// falling back to the last fenced block with any tag. Empty when no
/// complete fenced block exists.
std::string extract_fenced_block(std::string_view raw, std::string_view info);

}  // namespace promptlint
