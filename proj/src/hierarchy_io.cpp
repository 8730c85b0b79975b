#include "hilayout/hierarchy_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hilayout/error.hpp"
#include "hilayout/relations.hpp"
#include "hilayout/rng.hpp"

namespace hilayout::io {

namespace {

// ---------------------------------------------------------------------------
// Generic document tree shared by the text and JSON front-ends.

struct Token {
    std::string text;
    bool quoted = false;
};

struct Field {
    std::string key;
    std::vector<Token> values;
    int line = 0;
};

struct Block {
    std::string kind;
    std::vector<Token> ids;  // "area x" -> [x]; "relation a -> b" -> [a, b]
    std::vector<Field> fields;
    std::vector<Block> children;
    int line = 0;
};

struct Tree {
    std::string format;
    std::vector<Block> blocks;
};

struct Failure {
    Issue issue;
};

[[noreturn]] void fail(const char* code, std::string path, std::string message) {
    throw Failure{{code, std::move(path), std::move(message)}};
}

std::string line_path(int line) { return "line " + std::to_string(line); }

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        int extra = 0;
        if (c < 0x80) extra = 0;
        else if ((c >> 5) == 0x6) extra = 1;
        else if ((c >> 4) == 0xe) extra = 2;
        else if ((c >> 3) == 0x1e) extra = 3;
        else return false;
        for (int k = 1; k <= extra; ++k) {
            if (i + k >= s.size()) return false;
            if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
        }
        i += extra + 1;
    }
    return true;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(std::move(cur));
    return lines;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

// Commas inside quoted strings do not count.
bool ends_with_unquoted_comma(const std::string& line) {
    bool in_str = false;
    int last = -1;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_str) {
            if (c == '\\') ++i;
            else if (c == '"') in_str = false;
        } else if (c == '"') {
            in_str = true;
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            last = static_cast<int>(i);
        }
    }
    return !in_str && last >= 0 && line[static_cast<std::size_t>(last)] == ',';
}

std::string strip_json_trailing_commas(const std::string& s, bool& changed) {
    std::string out;
    out.reserve(s.size());
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_str) {
            out.push_back(c);
            if (c == '\\' && i + 1 < s.size()) out.push_back(s[++i]);
            else if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') {
            in_str = true;
            out.push_back(c);
            continue;
        }
        if (c == ',') {
            std::size_t j = i + 1;
            while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
            if (j < s.size() && (s[j] == '}' || s[j] == ']')) {
                changed = true;
                continue;
            }
        }
        out.push_back(c);
    }
    return out;
}

/// Lexical repairs applied before parsing; each kind is logged once.
std::string lexical_repair(const std::string& text, std::vector<std::string>& repairs) {
    auto lines = split_lines(text);

    // Markdown code fences: keep the content of the first fenced block.
    auto is_fence = [](const std::string& l) { return trim(l).rfind("```", 0) == 0; };
    auto first = std::find_if(lines.begin(), lines.end(), is_fence);
    if (first != lines.end()) {
        auto second = std::find_if(first + 1, lines.end(), is_fence);
        std::vector<std::string> inner(first + 1, second);
        lines = std::move(inner);
        repairs.emplace_back("stripped markdown code fences");
    }

    std::size_t comments = 0;
    std::vector<std::string> kept;
    for (auto& l : lines) {
        const std::string t = trim(l);
        if (t.rfind("#", 0) == 0 || t.rfind("//", 0) == 0) {
            ++comments;
            continue;
        }
        kept.push_back(std::move(l));
    }
    if (comments > 0) repairs.push_back("removed " + std::to_string(comments) + " comment line(s)");

    std::string joined = join_lines(kept);
    const std::string head = trim(joined);
    if (!head.empty() && head.front() == '{') {
        bool changed = false;
        joined = strip_json_trailing_commas(joined, changed);
        if (changed) repairs.emplace_back("removed trailing commas");
        return joined;
    }

    std::size_t commas = 0;
    for (auto& l : kept) {
        if (ends_with_unquoted_comma(l)) {
            auto pos = l.find_last_of(',');
            l.erase(pos, 1);
            ++commas;
        }
    }
    if (commas > 0) repairs.emplace_back("removed trailing commas");
    return join_lines(kept);
}

// ---------------------------------------------------------------------------
// Structured-text front-end.

bool is_bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '+' ||
           c == '.' || c == '/';
}

std::vector<Token> tokenize_line(const std::string& line, int lineno) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        const char c = line[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '"') {
            std::string s;
            ++i;
            bool closed = false;
            while (i < line.size()) {
                const char d = line[i++];
                if (d == '\\') {
                    if (i >= line.size()) break;
                    const char e = line[i++];
                    if (e == 'n') s.push_back('\n');
                    else if (e == 't') s.push_back('\t');
                    else s.push_back(e);
                } else if (d == '"') {
                    closed = true;
                    break;
                } else {
                    s.push_back(d);
                }
            }
            if (!closed) fail("ParseError", line_path(lineno), "unterminated string");
            out.push_back({std::move(s), true});
        } else if (c == '{' || c == '}' || c == ':') {
            out.push_back({std::string(1, c), false});
            ++i;
        } else if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') {
            out.push_back({"->", false});
            i += 2;
        } else if (is_bare_char(c)) {
            std::size_t j = i;
            while (j < line.size() && is_bare_char(line[j])) {
                if (line[j] == '-' && j + 1 < line.size() && line[j + 1] == '>') break;
                ++j;
            }
            out.push_back({line.substr(i, j - i), false});
            i = j;
        } else {
            fail("ParseError", line_path(lineno), std::string("unexpected character '") + c + "'");
        }
    }
    return out;
}

bool is_sym(const Token& t, const char* s) { return !t.quoted && t.text == s; }

Tree parse_text_tree(const std::string& text) {
    Tree tree;
    const auto lines = split_lines(text);
    std::vector<Block*> stack;
    std::vector<Block> top;
    bool have_format = false;

    for (std::size_t li = 0; li < lines.size(); ++li) {
        const int lineno = static_cast<int>(li) + 1;
        auto toks = tokenize_line(lines[li], lineno);
        if (toks.empty()) continue;

        if (toks.size() == 1 && is_sym(toks[0], "}")) {
            if (stack.empty()) fail("ParseError", line_path(lineno), "unbalanced '}'");
            stack.pop_back();
            continue;
        }
        if (is_sym(toks.back(), "{")) {
            if (toks.size() < 2 || toks[0].quoted) fail("ParseError", line_path(lineno), "malformed block header");
            Block b;
            b.kind = toks[0].text;
            b.line = lineno;
            for (std::size_t k = 1; k + 1 < toks.size(); ++k) {
                if (is_sym(toks[k], "->")) continue;
                if (!toks[k].quoted && (toks[k].text == "{" || toks[k].text == ":" || toks[k].text == "}")) {
                    fail("ParseError", line_path(lineno), "malformed block header");
                }
                b.ids.push_back(toks[k]);
            }
            std::vector<Block>& siblings = stack.empty() ? top : stack.back()->children;
            siblings.push_back(std::move(b));
            stack.push_back(&siblings.back());
            continue;
        }
        if (toks.size() >= 2 && !toks[0].quoted && is_sym(toks[1], ":")) {
            Field f{toks[0].text, {toks.begin() + 2, toks.end()}, lineno};
            for (const auto& v : f.values) {
                if (!v.quoted && (v.text == "{" || v.text == "}" || v.text == ":" || v.text == "->")) {
                    fail("ParseError", line_path(lineno), "unexpected symbol in value of '" + f.key + "'");
                }
            }
            if (stack.empty()) {
                if (f.key != "format") fail("ParseError", line_path(lineno), "field '" + f.key + "' outside any block");
                if (f.values.size() != 1) fail("ParseError", line_path(lineno), "malformed format header");
                tree.format = f.values[0].text;
                have_format = true;
            } else {
                stack.back()->fields.push_back(std::move(f));
            }
            continue;
        }
        fail("ParseError", line_path(lineno), "expected 'key: value', 'kind id {' or '}'");
    }
    if (!stack.empty()) fail("ParseError", line_path(stack.back()->line), "block '" + stack.back()->kind + "' is never closed");
    if (!have_format) fail("SchemaError", "format", "missing 'format: " + std::string(kFormatVersion) + "' header");
    tree.blocks = std::move(top);
    return tree;
}

// ---------------------------------------------------------------------------
// JSON front-end: maps the mirror onto the same tree.

Token json_scalar_token(const nlohmann::json& v, const std::string& path) {
    if (v.is_string()) return {v.get<std::string>(), true};
    if (v.is_boolean()) return {v.get<bool>() ? "true" : "false", false};
    if (v.is_number_integer()) return {std::to_string(v.get<long long>()), false};
    if (v.is_number()) return {format_number(v.get<double>()), false};
    fail("SchemaError", path, "expected a scalar value");
}

void json_append_values(const nlohmann::json& v, std::vector<Token>& out, const std::string& path) {
    if (v.is_array()) {
        for (const auto& e : v) json_append_values(e, out, path);
    } else if (v.is_object()) {
        fail("SchemaError", path, "unexpected object");
    } else {
        out.push_back(json_scalar_token(v, path));
    }
}

Field json_field(const std::string& key, const nlohmann::json& v, const std::string& path) {
    Field f{key, {}, 0};
    if (v.is_object()) {
        // pose {center, theta|facing}; target {position, theta}
        for (const char* part : {"center", "position", "theta", "facing"}) {
            if (v.contains(part)) json_append_values(v.at(part), f.values, path + "." + part);
        }
    } else {
        json_append_values(v, f.values, path);
    }
    return f;
}

Block json_block(const std::string& kind, const nlohmann::json& obj, const std::string& path,
                 std::initializer_list<const char*> id_keys,
                 std::initializer_list<std::pair<const char*, const char*>> child_lists) {
    if (!obj.is_object()) fail("SchemaError", path, "expected an object");
    Block b;
    b.kind = kind;
    for (const char* k : id_keys) {
        if (!obj.contains(k)) fail("SchemaError", path, std::string("missing required field '") + k + "'");
        b.ids.push_back(json_scalar_token(obj.at(k), path + "." + k));
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string& key = it.key();
        if (std::find_if(id_keys.begin(), id_keys.end(), [&](const char* k) { return key == k; }) != id_keys.end()) continue;
        bool is_child = false;
        for (const auto& [list_key, child_kind] : child_lists) {
            if (key != list_key) continue;
            is_child = true;
            if (!it->is_array()) fail("SchemaError", path + "." + key, "expected an array");
            std::size_t idx = 0;
            for (const auto& c : *it) {
                const std::string cpath = path + "." + key + "[" + std::to_string(idx++) + "]";
                if (std::string(child_kind) == "object") b.children.push_back(json_block("object", c, cpath, {"id"}, {}));
                else b.children.push_back(json_block("place", c, cpath, {"id"}, {}));
            }
        }
        if (!is_child) b.fields.push_back(json_field(key, *it, path + "." + key));
    }
    return b;
}

Tree parse_json_tree(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail("ParseError", "json", e.what());
    }
    if (!j.is_object()) fail("SchemaError", "json", "top level must be an object");
    Tree tree;
    if (!j.contains("format") || !j["format"].is_string()) fail("SchemaError", "format", "missing 'format' field");
    tree.format = j["format"].get<std::string>();
    if (j.contains("scene")) tree.blocks.push_back(json_block("scene", j["scene"], "scene", {}, {}));
    if (j.contains("areas")) {
        if (!j["areas"].is_array()) fail("SchemaError", "areas", "expected an array");
        std::size_t i = 0;
        for (const auto& a : j["areas"]) {
            tree.blocks.push_back(json_block("area", a, "areas[" + std::to_string(i++) + "]", {"id"}, {{"objects", "object"}}));
        }
    }
    if (j.contains("relations")) {
        if (!j["relations"].is_array()) fail("SchemaError", "relations", "expected an array");
        std::size_t i = 0;
        for (const auto& r : j["relations"]) {
            tree.blocks.push_back(json_block("relation", r, "relations[" + std::to_string(i++) + "]", {"from", "to"}, {}));
        }
    }
    if (j.contains("layout")) tree.blocks.push_back(json_block("layout", j["layout"], "layout", {}, {{"objects", "place"}}));
    return tree;
}

// ---------------------------------------------------------------------------
// Tree -> typed model.

class Reader {
public:
    Reader(const Block& b, std::string path, std::vector<std::string>& repairs)
        : b_(b), path_(std::move(path)), repairs_(repairs) {}

    const Field* find(const std::string& key) const {
        const Field* hit = nullptr;
        for (const auto& f : b_.fields) {
            if (f.key != key) continue;
            if (hit) fail("SchemaError", path_ + "." + key, "duplicate field '" + key + "'");
            hit = &f;
        }
        return hit;
    }

    const Field& require(const std::string& key) const {
        const Field* f = find(key);
        if (!f) fail("SchemaError", path_, "missing required field '" + key + "'");
        return *f;
    }

    std::string string(const Field& f) const {
        if (f.values.size() != 1) fail("SchemaError", path_ + "." + f.key, "expected a single value");
        return f.values[0].text;
    }

    std::vector<double> numbers(const Field& f, std::size_t n_min, std::size_t n_max) const {
        std::vector<double> out;
        for (const auto& v : f.values) {
            if (v.quoted) fail("SchemaError", path_ + "." + f.key, "expected a number, got a string");
            out.push_back(to_number(v.text, f.key));
        }
        if (out.size() < n_min || out.size() > n_max) {
            fail("SchemaError", path_ + "." + f.key,
                 "expected " + std::to_string(n_min) + (n_min == n_max ? "" : "-" + std::to_string(n_max)) +
                     " number(s), got " + std::to_string(out.size()));
        }
        return out;
    }

    double number(const std::string& text, const std::string& key) const { return to_number(text, key); }

    Rot4 orientation(const std::string& text, const std::string& key) const {
        const double d = to_number(text, key);
        const long deg = static_cast<long>(d);
        if (static_cast<double>(deg) != d || deg % 90 != 0) {
            fail("SchemaError", path_ + "." + key, "orientation must be a multiple of 90 degrees");
        }
        return Rot4::from_degrees(deg);
    }

    bool boolean(const Field& f) const {
        const std::string s = string(f);
        if (s == "true") return true;
        if (s == "false") return false;
        fail("SchemaError", path_ + "." + f.key, "expected true or false");
    }

    void note_unknown(std::initializer_list<const char*> known) const {
        for (const auto& f : b_.fields) {
            if (std::find_if(known.begin(), known.end(), [&](const char* k) { return f.key == k; }) == known.end()) {
                repairs_.push_back("ignored unknown field '" + f.key + "' at " + path_);
            }
        }
    }

    const std::string& path() const { return path_; }

private:
    double to_number(const std::string& text, const std::string& key) const {
        double v = 0.0;
        const char* first = text.data();
        const char* last = text.data() + text.size();
        if (!text.empty() && *first == '+') ++first;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
            fail("SchemaError", path_ + "." + key, "'" + text + "' is not a finite number");
        }
        return v;
    }

    const Block& b_;
    std::string path_;
    std::vector<std::string>& repairs_;
};

std::string block_id(const Block& b, const std::string& path) {
    if (b.ids.size() != 1 || b.ids[0].text.empty()) fail("SchemaError", path, "block '" + b.kind + "' needs exactly one id");
    return b.ids[0].text;
}

Pose2D read_pose(const Reader& r, const Field& f) {
    if (f.values.size() != 3) fail("SchemaError", r.path() + "." + f.key, "expected 'x y theta'");
    return {{r.number(f.values[0].text, f.key), r.number(f.values[1].text, f.key)},
            r.orientation(f.values[2].text, f.key)};
}

struct Built {
    SceneHierarchy h;
    std::optional<SceneLayout> layout;
};

Built build_model(const Tree& tree, std::vector<std::string>& repairs) {
    if (tree.format != kFormatVersion) {
        fail("SchemaError", "format", "unsupported format '" + tree.format + "' (expected " + kFormatVersion + ")");
    }
    Built out;
    SceneHierarchy& h = out.h;
    bool have_scene = false;
    const Block* layout_block = nullptr;
    std::map<std::string, std::string> first_area;

    for (const auto& b : tree.blocks) {
        if (b.kind == "scene") {
            if (have_scene) fail("SchemaError", "scene", "duplicate scene block");
            have_scene = true;
            Reader r(b, "scene", repairs);
            r.note_unknown({"text", "size"});
            h.root.text = r.string(r.require("text"));
            auto s = r.numbers(r.require("size"), 2, 2);
            h.root.size = {s[0], s[1]};
        } else if (b.kind == "area") {
            const std::string id = block_id(b, "area");
            const std::string path = "area[" + id + "]";
            Reader r(b, path, repairs);
            r.note_unknown({"text", "size", "anchor", "pose"});
            FunctionalArea a;
            a.id = id;
            a.text = r.string(r.require("text"));
            auto s = r.numbers(r.require("size"), 2, 2);
            a.size = {s[0], s[1]};
            a.anchor = r.string(r.require("anchor"));
            if (const Field* p = r.find("pose")) {
                if (p->values.size() != 3) fail("SchemaError", path + ".pose", "expected 'x y facing'");
                AreaPose ap;
                ap.center = {r.number(p->values[0].text, "pose"), r.number(p->values[1].text, "pose")};
                try {
                    ap.facing = parse_facing(p->values[2].text);
                } catch (const std::invalid_argument& e) {
                    fail("SchemaError", path + ".pose", e.what());
                }
                a.pose = ap;
            }
            for (const auto& c : b.children) {
                if (c.kind != "object") fail("SchemaError", path, "unexpected block '" + c.kind + "' inside area");
                const std::string oid = block_id(c, path + ".object");
                const std::string opath = path + ".object[" + oid + "]";
                auto [it, fresh] = first_area.emplace(oid, id);
                if (!fresh) {
                    fail("StructureError", opath,
                         "object '" + oid + "' is listed under areas '" + it->second + "' and '" + id + "'");
                }
                Reader orr(c, opath, repairs);
                orr.note_unknown({"text", "category", "size", "asset", "pose"});
                SceneObject o;
                o.id = oid;
                o.text = orr.string(orr.require("text"));
                o.category = orr.string(orr.require("category"));
                auto os = orr.numbers(orr.require("size"), 3, 3);
                o.size = {os[0], os[1], os[2]};
                if (const Field* af = orr.find("asset")) o.asset = orr.string(*af);
                if (const Field* pf = orr.find("pose")) o.pose = read_pose(orr, *pf);
                a.members.push_back(oid);
                h.objects.emplace(oid, std::move(o));
            }
            if (a.members.empty()) fail("SchemaError", path, "area has no objects");
            h.areas.push_back(std::move(a));
        } else if (b.kind == "relation") {
            if (b.ids.size() != 2) fail("SchemaError", "relation", "relation header must be 'relation from -> to {'");
            RelationEdge e;
            e.from = b.ids[0].text;
            e.to = b.ids[1].text;
            const std::string path = "relation[" + e.from + "->" + e.to + "]";
            Reader r(b, path, repairs);
            r.note_unknown({"text", "position", "theta", "aligned"});
            if (const Field* t = r.find("text")) {
                const std::string raw = r.string(*t);
                auto rel_kind = lookup_relation(raw);
                if (!rel_kind) fail("SchemaError", path + ".text", "unknown relation phrase '" + raw + "'");
                const std::string canon(phrase(*rel_kind));
                if (canon != raw) repairs.push_back("normalized relation phrase '" + raw + "' to '" + canon + "'");
                e.text = canon;
            }
            const Field* pos = r.find("position");
            const Field* th = r.find("theta");
            const Field* al = r.find("aligned");
            if (pos || th || al) {
                if (!pos || !th) fail("SchemaError", path, "placement needs both 'position' and 'theta'");
                auto p = r.numbers(*pos, 2, 2);
                EdgePlacement ep;
                ep.position = {p[0], p[1]};
                ep.theta = r.orientation(r.string(*th), "theta");
                ep.aligned = al ? r.boolean(*al) : false;
                e.placement = ep;
            }
            h.relations.push_back(std::move(e));
        } else if (b.kind == "layout") {
            if (layout_block) fail("SchemaError", "layout", "duplicate layout block");
            layout_block = &b;
        } else {
            fail("SchemaError", line_path(b.line), "unknown block kind '" + b.kind + "'");
        }
    }
    if (!have_scene) fail("SchemaError", "scene", "missing scene block");

    auto errs = validation_errors(h);
    if (!errs.empty()) fail("StructureError", "hierarchy", errs.front());

    if (layout_block) {
        SceneLayout L;
        Reader r(*layout_block, "layout", repairs);
        r.note_unknown({"objective", "max_overlap", "max_oob", "feasible"});
        L.report.objective = r.numbers(r.require("objective"), 1, 1)[0];
        L.report.max_overlap = r.numbers(r.require("max_overlap"), 1, 1)[0];
        L.report.max_oob = r.numbers(r.require("max_oob"), 1, 1)[0];
        L.report.feasible = r.boolean(r.require("feasible"));
        for (const auto& c : layout_block->children) {
            if (c.kind != "place") fail("SchemaError", "layout", "unexpected block '" + c.kind + "' inside layout");
            const std::string id = block_id(c, "layout.place");
            const std::string path = "layout.place[" + id + "]";
            auto it = h.objects.find(id);
            if (it == h.objects.end()) fail("StructureError", path, "placed object '" + id + "' is not in the hierarchy");
            Reader pr(c, path, repairs);
            pr.note_unknown({"area", "relation", "pose", "target"});
            PlacedObject p;
            p.id = id;
            p.area = pr.string(pr.require("area"));
            const FunctionalArea* owner = h.area_of(id);
            if (!owner || owner->id != p.area) fail("StructureError", path, "area does not match the hierarchy");
            p.size = it->second.size;
            if (const Field* rf = pr.find("relation")) p.relation = pr.string(*rf);
            p.pose = read_pose(pr, pr.require("pose"));
            if (const Field* tf = pr.find("target")) {
                Pose2D t = read_pose(pr, *tf);
                p.target = RelPlacement{t.center, t.theta};
            }
            L.objects.push_back(std::move(p));
        }
        L.hierarchy = h;
        out.layout = std::move(L);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization.

bool bare_ok(const std::string& s) {
    if (s.empty()) return false;
    if (s == "true" || s == "false") return false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!is_bare_char(s[i])) return false;
        if (s[i] == '-' && i + 1 < s.size() && s[i + 1] == '>') return false;
    }
    return true;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out.push_back('\\');
            out.push_back(c);
        } else if (c == '\n') {
            out += "\\n";
        } else if (c == '\t') {
            out += "\\t";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

std::string ident(const std::string& s) { return bare_ok(s) ? s : quote(s); }

std::string pose_text(const Pose2D& p) {
    return format_number(p.center.x) + " " + format_number(p.center.y) + " " + std::to_string(p.theta.degrees());
}

void write_hierarchy(std::ostringstream& os, const SceneHierarchy& h) {
    os << "format: " << kFormatVersion << "\n\n";
    os << "scene {\n";
    os << "  text: " << quote(h.root.text) << "\n";
    os << "  size: " << format_number(h.root.size.x) << " " << format_number(h.root.size.y) << "\n";
    os << "}\n";
    for (const auto& a : h.areas) {
        os << "\narea " << ident(a.id) << " {\n";
        os << "  text: " << quote(a.text) << "\n";
        os << "  size: " << format_number(a.size.x) << " " << format_number(a.size.y) << "\n";
        os << "  anchor: " << ident(a.anchor) << "\n";
        if (a.pose) {
            os << "  pose: " << format_number(a.pose->center.x) << " " << format_number(a.pose->center.y) << " "
               << to_string(a.pose->facing) << "\n";
        }
        for (const auto& m : a.members) {
            const auto& o = h.objects.at(m);
            os << "\n  object " << ident(o.id) << " {\n";
            os << "    text: " << quote(o.text) << "\n";
            os << "    category: " << quote(o.category) << "\n";
            os << "    size: " << format_number(o.size.x) << " " << format_number(o.size.y) << " "
               << format_number(o.size.z) << "\n";
            if (o.asset) os << "    asset: " << quote(*o.asset) << "\n";
            if (o.pose) os << "    pose: " << pose_text(*o.pose) << "\n";
            os << "  }\n";
        }
        os << "}\n";
    }
    for (const auto& e : h.relations) {
        os << "\nrelation " << ident(e.from) << " -> " << ident(e.to) << " {\n";
        if (e.text) os << "  text: " << quote(*e.text) << "\n";
        if (e.placement) {
            os << "  position: " << format_number(e.placement->position.x) << " "
               << format_number(e.placement->position.y) << "\n";
            os << "  theta: " << e.placement->theta.degrees() << "\n";
            os << "  aligned: " << (e.placement->aligned ? "true" : "false") << "\n";
        }
        os << "}\n";
    }
}

nlohmann::json vec_json(Vec2 v) { return nlohmann::json::array({v.x, v.y}); }

}  // namespace

std::string format_number(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string ValidationReport::summary() const {
    std::string out;
    for (const auto& e : errors) out += e.code + " at " + e.path + ": " + e.message + "\n";
    return out;
}

ParseResult parse(const RawDocument& doc) {
    ParseResult res;
    try {
        if (!valid_utf8(doc.text)) fail("ParseError", "document", "input is not valid UTF-8");
        const std::string cleaned = lexical_repair(doc.text, res.report.repairs);
        const std::string head = trim(cleaned);
        if (head.empty()) fail("ParseError", "document", "empty document");
        const Tree tree = head.front() == '{' ? parse_json_tree(cleaned) : parse_text_tree(cleaned);
        Built built = build_model(tree, res.report.repairs);
        res.hierarchy = std::move(built.h);
        res.layout = std::move(built.layout);
    } catch (const Failure& f) {
        res.report.errors.push_back(f.issue);
        res.hierarchy.reset();
        res.layout.reset();
    }
    return res;
}

namespace {
[[noreturn]] void throw_issue(const Issue& i) {
    const std::string msg = i.path + ": " + i.message;
    if (i.code == "ParseError") throw ParseError(msg);
    if (i.code == "SchemaError") throw SchemaError(msg);
    throw StructureError(msg);
}
}  // namespace

SceneHierarchy parse_hierarchy(const RawDocument& doc) {
    auto r = parse(doc);
    if (!r.report.ok()) throw_issue(r.report.errors.front());
    return std::move(*r.hierarchy);
}

SceneLayout parse_layout(const RawDocument& doc) {
    auto r = parse(doc);
    if (!r.report.ok()) throw_issue(r.report.errors.front());
    if (!r.layout) throw SchemaError("layout: document has no layout section");
    return std::move(*r.layout);
}

RawDocument serialize(const SceneHierarchy& h) {
    std::ostringstream os;
    write_hierarchy(os, h);
    return {os.str()};
}

RawDocument serialize(const SceneLayout& L) {
    std::ostringstream os;
    write_hierarchy(os, L.hierarchy);
    os << "\nlayout {\n";
    os << "  objective: " << format_number(L.report.objective) << "\n";
    os << "  max_overlap: " << format_number(L.report.max_overlap) << "\n";
    os << "  max_oob: " << format_number(L.report.max_oob) << "\n";
    os << "  feasible: " << (L.report.feasible ? "true" : "false") << "\n";
    for (const auto& p : L.objects) {
        os << "\n  place " << ident(p.id) << " {\n";
        os << "    area: " << ident(p.area) << "\n";
        if (p.relation) os << "    relation: " << quote(*p.relation) << "\n";
        os << "    pose: " << pose_text(p.pose) << "\n";
        if (p.target) os << "    target: " << pose_text({p.target->position, p.target->theta}) << "\n";
        os << "  }\n";
    }
    os << "}\n";
    return {os.str()};
}

nlohmann::json to_json(const SceneHierarchy& h) {
    using nlohmann::json;
    json j;
    j["format"] = kFormatVersion;
    j["scene"] = {{"text", h.root.text}, {"size", vec_json(h.root.size)}};
    json areas = json::array();
    for (const auto& a : h.areas) {
        json ja = {{"id", a.id}, {"text", a.text}, {"size", vec_json(a.size)}, {"anchor", a.anchor}};
        if (a.pose) ja["pose"] = {{"center", vec_json(a.pose->center)}, {"facing", to_string(a.pose->facing)}};
        json objs = json::array();
        for (const auto& m : a.members) {
            const auto& o = h.objects.at(m);
            json jo = {{"id", o.id},
                       {"text", o.text},
                       {"category", o.category},
                       {"size", json::array({o.size.x, o.size.y, o.size.z})}};
            if (o.asset) jo["asset"] = *o.asset;
            if (o.pose) jo["pose"] = {{"center", vec_json(o.pose->center)}, {"theta", o.pose->theta.degrees()}};
            objs.push_back(std::move(jo));
        }
        ja["objects"] = std::move(objs);
        areas.push_back(std::move(ja));
    }
    j["areas"] = std::move(areas);
    if (!h.relations.empty()) {
        json rels = json::array();
        for (const auto& e : h.relations) {
            json je = {{"from", e.from}, {"to", e.to}};
            if (e.text) je["text"] = *e.text;
            if (e.placement) {
                je["position"] = vec_json(e.placement->position);
                je["theta"] = e.placement->theta.degrees();
                je["aligned"] = e.placement->aligned;
            }
            rels.push_back(std::move(je));
        }
        j["relations"] = std::move(rels);
    }
    return j;
}

nlohmann::json to_json(const SceneLayout& L) {
    using nlohmann::json;
    json j = to_json(L.hierarchy);
    json objs = json::array();
    for (const auto& p : L.objects) {
        json jp = {{"id", p.id},
                   {"area", p.area},
                   {"pose", {{"center", vec_json(p.pose.center)}, {"theta", p.pose.theta.degrees()}}}};
        if (p.relation) jp["relation"] = *p.relation;
        if (p.target) jp["target"] = {{"position", vec_json(p.target->position)}, {"theta", p.target->theta.degrees()}};
        objs.push_back(std::move(jp));
    }
    j["layout"] = {{"objective", L.report.objective},
                   {"max_overlap", L.report.max_overlap},
                   {"max_oob", L.report.max_oob},
                   {"feasible", L.report.feasible},
                   {"objects", std::move(objs)}};
    return j;
}

// ---------------------------------------------------------------------------
// Feasibility repair.

namespace {

bool fits(Vec2 item, Vec2 box) {
    return (item.x <= box.x && item.y <= box.y) || (item.y <= box.x && item.x <= box.y);
}

double footprint_area(Vec2 v) { return v.x * v.y; }

void drop_object(SceneHierarchy& h, const std::string& id) {
    for (auto& a : h.areas) std::erase(a.members, id);
    h.objects.erase(id);
    std::erase_if(h.relations, [&](const RelationEdge& e) { return e.from == id || e.to == id; });
}

void drop_area(SceneHierarchy& h, const std::string& id) {
    const FunctionalArea* a = h.find_area(id);
    const std::vector<std::string> members = a->members;
    for (const auto& m : members) drop_object(h, m);
    std::erase_if(h.areas, [&](const FunctionalArea& x) { return x.id == id; });
}

}  // namespace

RepairResult feasibility_repair(const SceneHierarchy& input, const RepairConfig& cfg) {
    RepairResult out{input, {}};
    SceneHierarchy& h = out.hierarchy;
    ValidationReport& rep = out.report;
    const Vec2 room = h.root.size;

    // Seeded tie-break rank: a deterministic permutation of all ids.
    std::vector<std::string> ids;
    for (const auto& a : h.areas) ids.push_back("area:" + a.id);
    for (const auto& [id, o] : h.objects) ids.push_back("object:" + id);
    std::sort(ids.begin(), ids.end());
    Rng rng(cfg.seed);
    rng.shuffle(ids);
    std::map<std::string, std::size_t> tie;
    for (std::size_t i = 0; i < ids.size(); ++i) tie[ids[i]] = i;

    bool removed_any = false;
    auto log_drop = [&](const std::string& id, const std::string& why) {
        rep.dropped.push_back(id);
        rep.repairs.push_back("removed " + id + ": " + why);
        removed_any = true;
    };

    for (const auto& a : input.areas) {
        const auto& anchor = input.objects.at(a.anchor);
        if (!fits(anchor.footprint(), room)) {
            throw Unrepairable("anchor object '" + anchor.id + "' of area '" + a.id + "' does not fit the room");
        }
    }

    // Areas that cannot host their anchor or do not fit the room.
    for (const auto& a : input.areas) {
        const auto& anchor = input.objects.at(a.anchor);
        if (!fits(a.size, room)) {
            log_drop(a.id, "area larger than the room");
            drop_area(h, a.id);
        } else if (!fits(anchor.footprint(), a.size)) {
            log_drop(a.id, "anchor '" + anchor.id + "' does not fit its area");
            drop_area(h, a.id);
        }
    }

    // Object-level: oversize objects, then per-area packing.
    auto object_priority_less = [&](const std::string& x, const std::string& y) {
        // true when x should be removed before y
        const bool xr = h.relation_from(x) && h.relation_from(x)->text;
        const bool yr = h.relation_from(y) && h.relation_from(y)->text;
        if (xr != yr) return !xr;
        const double ax = footprint_area(h.objects.at(x).footprint());
        const double ay = footprint_area(h.objects.at(y).footprint());
        if (ax != ay) return ax > ay;
        return tie.at("object:" + x) < tie.at("object:" + y);
    };
    for (auto& a : h.areas) {
        const std::vector<std::string> members = a.members;
        for (const auto& m : members) {
            if (m == a.anchor) continue;
            if (!fits(h.objects.at(m).footprint(), a.size)) {
                log_drop(m, "footprint exceeds area '" + a.id + "'");
                drop_object(h, m);
            }
        }
        for (;;) {
            double used = 0.0;
            for (const auto& m : a.members) used += footprint_area(h.objects.at(m).footprint());
            if (used <= footprint_area(a.size)) break;
            std::vector<std::string> cand;
            for (const auto& m : a.members) {
                if (m != a.anchor) cand.push_back(m);
            }
            if (cand.empty()) break;
            const std::string victim = *std::min_element(cand.begin(), cand.end(), object_priority_less);
            log_drop(victim, "objects overfill area '" + a.id + "'");
            drop_object(h, victim);
        }
    }

    // Room budget: remove whole areas.
    auto area_priority_less = [&](const FunctionalArea& x, const FunctionalArea& y) {
        if (x.members.size() != y.members.size()) return x.members.size() < y.members.size();
        const double ax = footprint_area(x.size);
        const double ay = footprint_area(y.size);
        if (ax != ay) return ax > ay;
        return tie.at("area:" + x.id) < tie.at("area:" + y.id);
    };
    const double budget = cfg.area_budget * footprint_area(room);
    for (;;) {
        double used = 0.0;
        for (const auto& a : h.areas) used += footprint_area(a.size);
        if (used <= budget || h.areas.empty()) break;
        const auto victim = std::min_element(h.areas.begin(), h.areas.end(), area_priority_less)->id;
        log_drop(victim, "areas exceed " + format_number(cfg.area_budget) + " of the floor");
        drop_area(h, victim);
    }
    if (h.areas.empty()) throw Unrepairable("no functional area fits the room");
    if (removed_any) rep.repairs.push_back("feasibility repair seed " + std::to_string(cfg.seed));
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace hilayout::io
