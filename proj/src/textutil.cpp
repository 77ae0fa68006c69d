#include "promptlint/textutil.hpp"

#include <algorithm>
#include <cctype>

#include "promptlint/fnv.hpp"

namespace promptlint {

bool is_valid_utf8(std::string_view text) {
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        unsigned char b0 = static_cast<unsigned char>(text[i]);
        if (b0 < 0x80) {
            ++i;
            continue;
        }
        int len;
        std::uint32_t cp;
        if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            return false;
        }
        if (i + len > n) return false;
        for (int k = 1; k < len; ++k) {
            unsigned char bk = static_cast<unsigned char>(text[i + k]);
            if ((bk & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (bk & 0x3F);
        }
        if (len == 2 && cp < 0x80) return false;
        if (len == 3 && cp < 0x800) return false;
        if (len == 4 && cp < 0x10000) return false;
        if (cp > 0x10FFFF) return false;
        if (cp >= 0xD800 && cp <= 0xDFFF) return false;
        i += len;
    }
    return true;
}

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

char fold(char c, bool ci) {
    return ci ? static_cast<char>(std::tolower(static_cast<unsigned char>(c))) : c;
}

}  // namespace

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            if (!out.empty()) pending_space = true;
        } else {
            if (pending_space) {
                out.push_back(' ');
                pending_space = false;
            }
            out.push_back(c);
        }
    }
    return out;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        if (start == text.size()) {
            break;
        }
        std::size_t nl = text.find('\n', start);
        std::string_view line;
        if (nl == std::string_view::npos) {
            line = text.substr(start);
            start = text.size();
        } else {
            line = text.substr(start, nl - start);
            start = nl + 1;
        }
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        lines.emplace_back(line);
        if (nl == std::string_view::npos) break;
    }
    return lines;
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](char c) { return is_space(c); });
}

bool contains_word_phrase(std::string_view text, std::string_view phrase,
                          bool case_insensitive) {
    if (phrase.empty()) return false;
    // Tokenize the phrase.
    std::vector<std::string_view> words;
    std::size_t p = 0;
    while (p < phrase.size()) {
        while (p < phrase.size() && is_space(phrase[p])) ++p;
        std::size_t q = p;
        while (q < phrase.size() && !is_space(phrase[q])) ++q;
        if (q > p) words.push_back(phrase.substr(p, q - p));
        p = q;
    }
    if (words.empty()) return false;

    auto word_matches_at = [&](std::string_view w, std::size_t pos) -> bool {
        if (pos + w.size() > text.size()) return false;
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (fold(text[pos + k], case_insensitive) != fold(w[k], case_insensitive))
                return false;
        }
        // Whole-word boundaries.
        if (pos > 0 && is_word_char(text[pos - 1]) && is_word_char(w.front()))
            return false;
        std::size_t end = pos + w.size();
        if (end < text.size() && is_word_char(text[end]) && is_word_char(w.back()))
            return false;
        return true;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!word_matches_at(words[0], i)) continue;
        std::size_t pos = i + words[0].size();
        bool ok = true;
        for (std::size_t wi = 1; wi < words.size(); ++wi) {
            std::size_t sp = pos;
            while (sp < text.size() && is_space(text[sp])) ++sp;
            if (sp == pos || !word_matches_at(words[wi], sp)) {
                ok = false;
                break;
            }
            pos = sp + words[wi].size();
        }
        if (ok) return true;
    }
    return false;
}

bool contains_any_phrase(std::string_view text,
                         const std::vector<std::string>& phrases,
                         bool case_insensitive) {
    for (const auto& p : phrases) {
        if (contains_word_phrase(text, p, case_insensitive)) return true;
    }
    return false;
}

std::vector<std::string> capitalized_tokens(std::string_view text,
                                            std::size_t min_len) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_word_char(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_word_char(text[j])) ++j;
        std::string_view tok = text.substr(i, j - i);
        if (tok.size() >= min_len && std::isupper(static_cast<unsigned char>(tok[0]))) {
            out.emplace_back(tok);
        }
        i = j;
    }
    return out;
}

std::string to_lower_ascii(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

std::string extract_fenced_block(std::string_view raw, std::string_view info) {
    std::string tagged = "```";
    tagged += info;
    std::size_t open = raw.rfind(tagged);
    // An opening fence must be followed by a newline after its info string.
    if (open != std::string_view::npos) {
        std::size_t header_end = raw.find('\n', open);
        if (header_end != std::string_view::npos) {
            std::size_t close = raw.find("```", header_end + 1);
            if (close != std::string_view::npos) {
                return std::string(raw.substr(header_end + 1, close - header_end - 1));
            }
        }
    }
    // Fall back to the last complete fenced block of any tag.
    std::size_t close = raw.rfind("```");
    if (close == std::string_view::npos || close == 0) return {};
    std::size_t open2 = raw.rfind("```", close - 1);
    if (open2 == std::string_view::npos) return {};
    std::size_t header_end = raw.find('\n', open2);
    if (header_end == std::string_view::npos || header_end >= close) return {};
    return std::string(raw.substr(header_end + 1, close - header_end - 1));
}

std::string to_hex(std::uint64_t digest) {
    static const char* hexdig = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hexdig[digest & 0xF];
        digest >>= 4;
    }
    return out;
}

std::uint64_t from_hex(std::string_view hex) {
    std::uint64_t v = 0;
    for (char c : hex) {
        v <<= 4;
        if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint64_t>(c - 'A' + 10);
    }
    return v;
}

}  // namespace promptlint
