#include "promptlint/ast.hpp"

#include <algorithm>
#include <cctype>

#include "nlohmann/json.hpp"
#include "promptlint/errors.hpp"
#include "promptlint/fnv.hpp"
#include "promptlint/textutil.hpp"

namespace promptlint {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kind_names[] = {
    "document", "section",   "paragraph",  "directive",
    "list",     "list_item", "code_block", "metadata",
};

}  // namespace

std::string_view to_string(node_kind kind) {
    return kind_names[static_cast<int>(kind)];
}

node_kind node_kind_from_string(std::string_view name) {
    for (int i = 0; i < 8; ++i) {
        if (kind_names[i] == name) return static_cast<node_kind>(i);
    }
    throw validation_error("unknown node kind: '" + std::string(name) + "'");
}

parse_options parse_options::defaults() {
    parse_options opts;
    opts.directive_markers = {"NEVER",     "ALWAYS",         "MUST",   "MUST NOT",
                              "IMPORTANT", "VERY IMPORTANT", "DO NOT", "ONLY"};
    opts.markers_case_sensitive = true;
    return opts;
}

namespace {

struct line_info {
    std::string text;
    int number = 0;  // 1-based
};

bool is_atx_heading(const std::string& line, int* level, std::string* title) {
    std::size_t i = 0;
    while (i < line.size() && line[i] == '#') ++i;
    if (i == 0 || i > 6) return false;
    if (i < line.size() && line[i] != ' ' && line[i] != '\t') return false;
    std::size_t start = line.find_first_not_of(" \t", i);
    *level = static_cast<int>(i);
    *title = start == std::string::npos ? "" : line.substr(start);
    while (!title->empty() && (title->back() == ' ' || title->back() == '\t')) {
        title->pop_back();
    }
    return true;
}

bool is_setext_underline(const std::string& line, int* level) {
    if (line.empty()) return false;
    char c = line[0];
    if (c != '=' && c != '-') return false;
    std::size_t n = 0;
    for (char ch : line) {
        if (ch == c) {
            ++n;
        } else if (ch == ' ' || ch == '\t') {
            continue;
        } else {
            return false;
        }
    }
    if (c == '-' && n < 2) return false;  // a lone '-' is not an underline
    *level = c == '=' ? 1 : 2;
    return true;
}

bool is_fence(const std::string& line) {
    std::size_t i = line.find_first_not_of(' ');
    if (i == std::string::npos || i > 3) return false;
    return line.compare(i, 3, "```") == 0;
}

struct bullet_info {
    int indent = 0;
    std::string text;
};

bool is_bullet(const std::string& line, bullet_info* info) {
    std::size_t i = 0;
    while (i < line.size() && line[i] == ' ') ++i;
    if (i >= line.size()) return false;
    char c = line[i];
    std::size_t after = i + 1;
    if (c == '-' || c == '*' || c == '+') {
        if (after >= line.size() || line[after] != ' ') return false;
        ++after;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t j = i;
        while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
        if (j >= line.size() || (line[j] != '.' && line[j] != ')')) return false;
        if (j + 1 >= line.size() || line[j + 1] != ' ') return false;
        after = j + 2;
    } else {
        return false;
    }
    info->indent = static_cast<int>(i);
    info->text = line.substr(line.find_first_not_of(' ', after) == std::string::npos
                                 ? after
                                 : line.find_first_not_of(' ', after));
    return true;
}

bool is_metadata_line(const std::string& line) {
    std::size_t colon = line.find(':');
    if (colon == std::string::npos || colon == 0) return false;
    for (std::size_t i = 0; i < colon; ++i) {
        char c = line[i];
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
                  c == '-' || c == '.';
        if (!ok) return false;
    }
    if (colon + 1 < line.size() && line[colon + 1] != ' ' && line[colon + 1] != '\t') {
        return false;
    }
    return true;
}

class parser {
  public:
    parser(std::string_view text, const parse_options& opts)
        : opts_(opts), lines_(split_lines(text)) {}

    parse_result run() {
        parse_result result;
        result.root.kind = node_kind::document;
        if (lines_.empty()) {
            result.root.start_line = 0;
            result.root.end_line = 0;
        } else {
            result.root.start_line = 1;
            result.root.end_line = static_cast<int>(lines_.size());
        }

        // Stack of open sections; index 0 is the document root.
        struct open_scope {
            node* target;
            int level;  // 0 for the root
        };
        std::vector<open_scope> stack;
        stack.push_back({&result.root, 0});

        std::size_t i = 0;
        while (i < lines_.size()) {
            const std::string& line = lines_[i];
            if (is_blank(line)) {
                ++i;
                continue;
            }

            int level = 0;
            std::string title;
            if (is_atx_heading(line, &level, &title)) {
                seen_heading_ = true;
                while (stack.back().level >= level) stack.pop_back();
                node section;
                section.kind = node_kind::section;
                section.heading_level = level;
                section.text = title;
                section.start_line = line_no(i);
                section.end_line = line_no(i);
                stack.back().target->children.push_back(std::move(section));
                stack.push_back({&stack.back().target->children.back(), level});
                ++i;
                continue;
            }

            // Setext heading: a single plain line underlined by === or ---.
            if (i + 1 < lines_.size() && looks_plain(line)) {
                int se_level = 0;
                if (is_setext_underline(lines_[i + 1], &se_level)) {
                    seen_heading_ = true;
                    while (stack.back().level >= se_level) stack.pop_back();
                    node section;
                    section.kind = node_kind::section;
                    section.heading_level = se_level;
                    section.text = line;
                    section.start_line = line_no(i);
                    section.end_line = line_no(i + 1);
                    stack.back().target->children.push_back(std::move(section));
                    stack.push_back({&stack.back().target->children.back(), se_level});
                    i += 2;
                    continue;
                }
            }

            if (is_fence(line)) {
                i = consume_code_block(i, *stack.back().target, result);
                continue;
            }

            bullet_info bullet;
            if (is_bullet(line, &bullet)) {
                i = consume_list(i, *stack.back().target);
                continue;
            }

            if (!seen_heading_ && is_metadata_line(line) && !is_directive_text(line)) {
                node meta;
                meta.kind = node_kind::metadata;
                meta.text = line;
                meta.start_line = line_no(i);
                meta.end_line = line_no(i);
                stack.back().target->children.push_back(std::move(meta));
                ++i;
                continue;
            }

            i = consume_paragraph(i, *stack.back().target);
        }

        extend_spans(result.root);
        finalize(result.root, 0, 0, {});
        return result;
    }

  private:
    int line_no(std::size_t index) const { return static_cast<int>(index) + 1; }

    bool looks_plain(const std::string& line) const {
        int level;
        std::string title;
        bullet_info bullet;
        if (is_atx_heading(line, &level, &title)) return false;
        if (is_fence(line)) return false;
        if (is_bullet(line, &bullet)) return false;
        if (is_setext_underline(line, &level)) return false;
        return true;
    }

    bool is_directive_text(const std::string& text) const {
        return contains_any_phrase(text, opts_.directive_markers,
                                   !opts_.markers_case_sensitive);
    }

    std::size_t consume_code_block(std::size_t i, node& parent, parse_result& result) {
        std::size_t start = i;
        std::size_t j = i + 1;
        bool closed = false;
        std::string body;
        while (j < lines_.size()) {
            if (is_fence(lines_[j])) {
                closed = true;
                break;
            }
            if (!body.empty()) body += '\n';
            body += lines_[j];
            ++j;
        }
        node code;
        code.kind = node_kind::code_block;
        code.text = body;
        code.start_line = line_no(start);
        if (closed) {
            code.end_line = line_no(j);
            j += 1;
        } else {
            code.end_line = static_cast<int>(lines_.size());
            result.warnings.push_back(
                {line_no(start), "unterminated code fence runs to end of document"});
            j = lines_.size();
        }
        parent.children.push_back(std::move(code));
        return j;
    }

    std::size_t consume_list(std::size_t i, node& parent) {
        node list;
        list.kind = node_kind::list;
        list.start_line = line_no(i);

        // Stack of open lists by indent; nested bullets nest under the
        // previous item.
        struct open_list {
            node* list_node;
            int indent;
        };
        std::vector<open_list> stack{{&list, 0}};
        bullet_info bullet;
        std::size_t j = i;
        bool first = true;
        while (j < lines_.size() && is_bullet(lines_[j], &bullet)) {
            if (first) {
                stack[0].indent = bullet.indent;
                first = false;
            }
            while (stack.size() > 1 && bullet.indent < stack.back().indent) {
                stack.pop_back();
            }
            if (bullet.indent > stack.back().indent &&
                !stack.back().list_node->children.empty()) {
                node* last_item = &stack.back().list_node->children.back();
                node nested;
                nested.kind = node_kind::list;
                nested.start_line = line_no(j);
                last_item->children.push_back(std::move(nested));
                stack.push_back({&last_item->children.back(), bullet.indent});
            }
            node item;
            item.kind = is_directive_text(bullet.text) ? node_kind::directive
                                                       : node_kind::list_item;
            item.text = bullet.text;
            item.start_line = line_no(j);
            item.end_line = line_no(j);
            stack.back().list_node->children.push_back(std::move(item));
            ++j;
        }
        list.end_line = line_no(j - 1);
        parent.children.push_back(std::move(list));
        return j;
    }

    std::size_t consume_paragraph(std::size_t i, node& parent) {
        std::size_t j = i;
        std::string body;
        while (j < lines_.size() && !is_blank(lines_[j]) && looks_plain(lines_[j])) {
            if (j > i && !seen_heading_ && is_metadata_line(lines_[j]) &&
                !is_directive_text(lines_[j])) {
                break;
            }
            if (j > i && j + 1 < lines_.size()) {
                // Stop before a setext heading that starts at the next line.
                int level;
                if (is_setext_underline(lines_[j + 1], &level)) break;
            }
            if (!body.empty()) body += '\n';
            body += lines_[j];
            ++j;
        }
        if (j == i) {
            // The line is special-cased elsewhere but unreachable here in
            // practice; consume it as a one-line paragraph to guarantee
            // progress.
            body = lines_[i];
            j = i + 1;
        }
        node para;
        para.kind = is_directive_text(body) ? node_kind::directive
                                            : node_kind::paragraph;
        para.text = body;
        para.start_line = line_no(i);
        para.end_line = line_no(j - 1);
        parent.children.push_back(std::move(para));
        return j;
    }

    // A section's span reaches to the end of its last descendant.
    static void extend_spans(node& n) {
        for (node& child : n.children) extend_spans(child);
        if (!n.children.empty() && n.kind != node_kind::document) {
            n.end_line = std::max(n.end_line, n.children.back().end_line);
        }
    }

    static void finalize(node& n, int depth, int sibling_index,
                         std::vector<int> path) {
        n.depth = depth;
        n.sibling_index = sibling_index;

        fnv1a64 sh;
        sh.update_sized(to_string(n.kind));
        sh.update_u64(static_cast<std::uint64_t>(depth));
        for (int idx : path) sh.update_u64(static_cast<std::uint64_t>(idx));
        n.structural_hash = sh.digest();

        for (std::size_t i = 0; i < n.children.size(); ++i) {
            path.push_back(static_cast<int>(i));
            finalize(n.children[i], depth + 1, static_cast<int>(i), path);
            path.pop_back();
        }

        fnv1a64 ch;
        ch.update_sized(normalize_whitespace(n.text));
        for (const node& child : n.children) ch.update_u64(child.content_hash);
        n.content_hash = ch.digest();
    }

    const parse_options& opts_;
    std::vector<std::string> lines_;
    bool seen_heading_ = false;
};

}  // namespace

parse_result parse(std::string_view text) {
    return parse(text, parse_options::defaults());
}

parse_result parse(std::string_view text, const parse_options& opts) {
    if (!is_valid_utf8(text)) throw encoding_error("input is not valid UTF-8");
    parser p(text, opts);
    return p.run();
}

structural_profile profile(const node& document) {
    structural_profile prof;
    walk(document, [&](const node& n, const std::vector<int>&) {
        prof.node_count += 1;
        prof.count_per_kind[static_cast<int>(n.kind)] += 1;
        prof.max_depth = std::max(prof.max_depth, n.depth);
        if (n.kind == node_kind::section) prof.section_count += 1;
        if (n.kind == node_kind::directive && n.depth == 1) {
            prof.top_level_directive_count += 1;
        }
    });
    if (prof.node_count == 1 && document.kind == node_kind::document &&
        document.children.empty()) {
        // An empty document profiles as all zeros.
        prof.node_count = 0;
        prof.count_per_kind[static_cast<int>(node_kind::document)] = 0;
    }
    return prof;
}

const node* node_at(const node& root, const std::vector<int>& path) {
    const node* cur = &root;
    for (int idx : path) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= cur->children.size()) {
            return nullptr;
        }
        cur = &cur->children[static_cast<std::size_t>(idx)];
    }
    return cur;
}

std::vector<std::string> check_line_coverage(const node& root,
                                             std::string_view source) {
    std::vector<std::string> lines = split_lines(source);
    // owners[i] counts nodes owning line i+1.
    std::vector<int> owners(lines.size(), 0);

    walk(root, [&](const node& n, const std::vector<int>&) {
        if (n.start_line == 0) return;
        std::vector<bool> covered_by_child(
            static_cast<std::size_t>(n.end_line - n.start_line + 1), false);
        for (const node& child : n.children) {
            for (int l = child.start_line; l <= child.end_line; ++l) {
                if (l >= n.start_line && l <= n.end_line) {
                    covered_by_child[static_cast<std::size_t>(l - n.start_line)] = true;
                }
            }
        }
        for (int l = n.start_line; l <= n.end_line; ++l) {
            if (!covered_by_child[static_cast<std::size_t>(l - n.start_line)]) {
                if (l >= 1 && static_cast<std::size_t>(l) <= owners.size()) {
                    owners[static_cast<std::size_t>(l - 1)] += 1;
                }
            }
        }
    });

    std::vector<std::string> violations;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_blank(lines[i])) continue;
        if (owners[i] != 1) {
            violations.push_back("line " + std::to_string(i + 1) + " owned by " +
                                 std::to_string(owners[i]) + " nodes: '" + lines[i] +
                                 "'");
        }
    }
    return violations;
}

namespace {

json node_to_json(const node& n) {
    json j;
    j["kind"] = std::string(to_string(n.kind));
    if (n.kind == node_kind::section) j["heading_level"] = n.heading_level;
    j["text"] = n.text;
    j["depth"] = n.depth;
    j["sibling_index"] = n.sibling_index;
    j["span"] = {n.start_line, n.end_line};
    j["structural_hash"] = to_hex(n.structural_hash);
    j["content_hash"] = to_hex(n.content_hash);
    j["children"] = json::array();
    for (const node& child : n.children) j["children"].push_back(node_to_json(child));
    return j;
}

node node_from_json(const json& j) {
    node n;
    n.kind = node_kind_from_string(j.at("kind").get<std::string>());
    n.heading_level = j.value("heading_level", 0);
    n.text = j.at("text").get<std::string>();
    n.depth = j.at("depth").get<int>();
    n.sibling_index = j.at("sibling_index").get<int>();
    n.start_line = j.at("span").at(0).get<int>();
    n.end_line = j.at("span").at(1).get<int>();
    n.structural_hash = from_hex(j.at("structural_hash").get<std::string>());
    n.content_hash = from_hex(j.at("content_hash").get<std::string>());
    for (const json& child : j.at("children")) {
        n.children.push_back(node_from_json(child));
    }
    return n;
}

}  // namespace

std::string serialize_ast(const node& root) {
    json j;
    j["format"] = std::string(ast_format_version);
    j["root"] = node_to_json(root);
    return j.dump(2) + "\n";
}

node deserialize_ast(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) {
        throw parse_error("malformed AST JSON", std::string(json_text));
    }
    if (j.value("format", "") != ast_format_version) {
        throw validation_error("unsupported AST format version: '" +
                               j.value("format", "") + "'");
    }
    return node_from_json(j.at("root"));
}

}  // namespace promptlint
