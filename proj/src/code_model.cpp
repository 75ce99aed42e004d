#include "refinery/code_model.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "refinery/lex.hpp"

namespace fs = std::filesystem;

namespace refinery {

using lex::Token;
using lex::TokKind;

const FunctionUnit& ProjectSnapshot::unit(const std::string& id) const {
    auto it = function_index.find(id);
    if (it == function_index.end()) throw Error("unknown function id: " + id);
    return it->second;
}

namespace {

bool is_rs(const std::string& path) {
    return path.size() >= 3 && path.compare(path.size() - 3, 3, ".rs") == 0;
}

bool is_punct(std::string_view src, const Token& t, char c) {
    return t.kind == TokKind::Punct && src[t.begin] == c;
}

bool ident_is(std::string_view src, const Token& t, std::string_view s) {
    return t.kind == TokKind::Ident && t.text(src) == s;
}

std::size_t match_brace(std::string_view src, const std::vector<Token>& toks, std::size_t open) {
    std::size_t depth = 0;
    for (std::size_t k = open; k < toks.size(); ++k) {
        if (is_punct(src, toks[k], '{')) ++depth;
        else if (is_punct(src, toks[k], '}')) {
            if (--depth == 0) return k;
        }
    }
    return toks.size();
}

struct RawFn {
    std::string name;
    ByteSpan span;
    std::size_t body_tok_begin = 0;  // token index of the fn keyword
    std::size_t body_tok_end = 0;    // token index one past the closing brace
};

// Item modifiers that may precede `fn` and belong to the item's span.
bool is_fn_modifier(std::string_view w) {
    return w == "pub" || w == "unsafe" || w == "extern" || w == "const" || w == "async" ||
           w == "default";
}

// Finds every function item with a body in one file. Functions are recognized
// by a `fn` keyword in item position (start of file, after ';', '{', '}', or
// a modifier run); fn-pointer types and trait-method declarations are skipped.
std::vector<RawFn> scan_functions(std::string_view src, const std::vector<Token>& toks) {
    std::vector<RawFn> fns;
    for (std::size_t k = 0; k < toks.size(); ++k) {
        if (!ident_is(src, toks[k], "fn")) continue;
        if (k + 1 >= toks.size() || toks[k + 1].kind != TokKind::Ident) continue;

        // walk back over the modifier run to the span start
        std::size_t first = k;
        while (first > 0) {
            const Token& p = toks[first - 1];
            if (p.kind == TokKind::Ident && is_fn_modifier(p.text(src))) {
                --first;
                continue;
            }
            // abi string between extern and fn
            if (p.kind == TokKind::Literal && first >= 2 && ident_is(src, toks[first - 2], "extern")) {
                first -= 2;
                continue;
            }
            // pub(crate) / pub(super) visibility group
            if (is_punct(src, p, ')')) {
                std::size_t q = first - 1;
                while (q > 0 && !is_punct(src, toks[q], '(')) --q;
                if (q >= 1 && ident_is(src, toks[q - 1], "pub")) {
                    first = q - 1;
                    continue;
                }
            }
            break;
        }
        // item position check: what precedes the span start?
        if (first > 0) {
            const Token& b = toks[first - 1];
            bool ok = is_punct(src, b, ';') || is_punct(src, b, '{') || is_punct(src, b, '}') ||
                      is_punct(src, b, ']');  // ']' closes an attribute
            if (!ok) continue;
        }
        // locate the body brace; ';' first means a bodyless declaration
        std::size_t b = k + 2;
        while (b < toks.size() && !is_punct(src, toks[b], '{') && !is_punct(src, toks[b], ';')) ++b;
        if (b >= toks.size() || is_punct(src, toks[b], ';')) continue;
        std::size_t close = match_brace(src, toks, b);
        if (close >= toks.size()) continue;

        RawFn f;
        f.name = std::string(toks[k + 1].text(src));
        f.span = {toks[first].begin, toks[close].end};
        f.body_tok_begin = k;
        f.body_tok_end = close + 1;
        fns.push_back(std::move(f));
        k = close;
    }
    return fns;
}

struct GlobalItem {
    std::string name;
    std::string text;
    std::string file;
    std::size_t offset = 0;
};

// Top-level `static` / `const` items (declaration text through ';').
std::vector<GlobalItem> scan_globals(const std::string& file, std::string_view src,
                                     const std::vector<Token>& toks) {
    std::vector<GlobalItem> out;
    std::size_t brace_depth = 0;
    for (std::size_t k = 0; k < toks.size(); ++k) {
        const Token& t = toks[k];
        if (is_punct(src, t, '{')) {
            ++brace_depth;
            continue;
        }
        if (is_punct(src, t, '}')) {
            if (brace_depth > 0) --brace_depth;
            continue;
        }
        if (brace_depth > 0) continue;
        if (!ident_is(src, t, "static") && !ident_is(src, t, "const")) continue;
        // item position only: rules out `*const T` in signatures and casts
        if (k > 0) {
            const Token& prev = toks[k - 1];
            bool item_pos = is_punct(src, prev, ';') || is_punct(src, prev, '}') ||
                            is_punct(src, prev, ']') || ident_is(src, prev, "pub");
            if (!item_pos) continue;
        }
        // `const fn` is a function, not a global
        if (k + 1 < toks.size() && (ident_is(src, toks[k + 1], "fn") || ident_is(src, toks[k + 1], "unsafe") ||
                                    ident_is(src, toks[k + 1], "extern"))) {
            continue;
        }
        std::size_t start = t.begin;
        std::size_t name_idx = k + 1;
        if (name_idx < toks.size() && ident_is(src, toks[name_idx], "mut")) ++name_idx;
        if (name_idx >= toks.size() || toks[name_idx].kind != TokKind::Ident) continue;
        if (k > 0 && ident_is(src, toks[k - 1], "pub")) start = toks[k - 1].begin;
        std::size_t e = name_idx;
        while (e < toks.size() && !is_punct(src, toks[e], ';')) ++e;
        if (e >= toks.size()) continue;
        out.push_back({std::string(toks[name_idx].text(src)),
                       std::string(src.substr(start, toks[e].end - start)), file, start});
        k = e;
    }
    return out;
}

struct UseItem {
    std::string text;
    std::vector<std::string> leaves;  // referenced-name candidates
    bool glob = false;
    std::string file;
    std::size_t offset = 0;
};

// `use` declarations with the names they bring into scope.
std::vector<UseItem> scan_uses(const std::string& file, std::string_view src,
                               const std::vector<Token>& toks) {
    std::vector<UseItem> out;
    std::size_t brace_depth = 0;
    for (std::size_t k = 0; k < toks.size(); ++k) {
        if (is_punct(src, toks[k], '{')) ++brace_depth;
        else if (is_punct(src, toks[k], '}')) {
            if (brace_depth > 0) --brace_depth;
        }
        if (!(brace_depth == 0 && ident_is(src, toks[k], "use"))) continue;
        std::size_t e = k;
        std::size_t inner = 0;
        while (e < toks.size()) {
            if (is_punct(src, toks[e], '{')) ++inner;
            if (is_punct(src, toks[e], '}')) --inner;
            if (is_punct(src, toks[e], ';') && inner == 0) break;
            ++e;
        }
        if (e >= toks.size()) break;
        UseItem item;
        item.file = file;
        item.offset = toks[k].begin;
        item.text = std::string(src.substr(toks[k].begin, toks[e].end - toks[k].begin));
        // leaves: last segment of each path, alias wins, '*' marks a glob
        std::string prev;
        for (std::size_t j = k + 1; j < e; ++j) {
            const Token& t = toks[j];
            if (t.kind == TokKind::Ident) {
                auto w = std::string(t.text(src));
                if (w == "as") {
                    // alias replaces the previous leaf
                    if (j + 1 < e && toks[j + 1].kind == TokKind::Ident) {
                        prev = std::string(toks[j + 1].text(src));
                        ++j;
                    }
                    continue;
                }
                prev = w;
                continue;
            }
            if (is_punct(src, t, '*')) item.glob = true;
            if (is_punct(src, t, ',') || is_punct(src, t, '}')) {
                if (!prev.empty()) item.leaves.push_back(prev);
                prev.clear();
            }
        }
        if (!prev.empty()) item.leaves.push_back(prev);
        out.push_back(std::move(item));
        k = e;
        // brace_depth was tracked through the use item's own braces above;
        // recompute is unnecessary since inner returned to 0
    }
    return out;
}

bool body_has_ident(std::string_view src, const std::vector<Token>& toks, std::size_t tok_begin,
                    std::size_t tok_end, std::string_view name) {
    for (std::size_t k = tok_begin; k < tok_end; ++k) {
        if (ident_is(src, toks[k], name)) return true;
    }
    return false;
}

void load_sidecar(const fs::path& path, ProjectSnapshot& project) {
    std::ifstream in(path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ParseError("functions.json: " + std::string(e.what()));
    }
    for (const auto& f : doc.at("functions")) {
        FunctionUnit u;
        u.id = f.at("id").get<std::string>();
        u.name = f.value("name", u.id);
        u.file = f.at("file").get<std::string>();
        u.span.begin = f.at("begin").get<std::size_t>();
        u.span.end = f.at("end").get<std::size_t>();
        auto it = project.files.find(u.file);
        if (it == project.files.end()) throw ParseError("functions.json: unknown file " + u.file);
        if (u.span.end > it->second.size() || u.span.begin >= u.span.end) {
            throw ParseError("functions.json: bad span for " + u.id);
        }
        u.body = it->second.substr(u.span.begin, u.span.size());
        if (f.contains("callees")) u.callees = f.at("callees").get<std::vector<std::string>>();
        project.function_index.emplace(u.id, std::move(u));
    }
}

}  // namespace

namespace {

// The scanner is lenient, so broken input surfaces as unbalanced braces.
void check_braces(const std::string& path, std::string_view src, const std::vector<Token>& toks) {
    auto starts = lex::line_starts(src);
    std::vector<std::size_t> open_stack;
    for (const auto& t : toks) {
        if (t.kind != TokKind::Punct) continue;
        char c = src[t.begin];
        if (c == '{') open_stack.push_back(t.begin);
        else if (c == '}') {
            if (open_stack.empty()) {
                throw ParseError(path + ":" + std::to_string(lex::line_of(starts, t.begin) + 1) +
                                 ": unmatched '}'");
            }
            open_stack.pop_back();
        }
    }
    if (!open_stack.empty()) {
        throw ParseError(path + ":" + std::to_string(lex::line_of(starts, open_stack.back()) + 1) +
                         ": unclosed '{'");
    }
}

}  // namespace

std::vector<FunctionUnit> index_functions(const ProjectSnapshot& project) {
    struct FileScan {
        std::string path;
        const std::string* text;
        std::vector<Token> toks;
        std::vector<RawFn> fns;
    };
    std::vector<FileScan> scans;
    std::vector<GlobalItem> globals;
    std::vector<UseItem> uses;

    for (const auto& [path, text] : project.files) {
        if (!is_rs(path)) continue;
        FileScan s{path, &text, lex::scan(text), {}};
        check_braces(path, text, s.toks);
        s.fns = scan_functions(text, s.toks);
        auto g = scan_globals(path, text, s.toks);
        globals.insert(globals.end(), g.begin(), g.end());
        auto u = scan_uses(path, text, s.toks);
        uses.insert(uses.end(), u.begin(), u.end());
        scans.push_back(std::move(s));
    }

    // assign ids: plain name when unique, else name@file#ordinal
    std::map<std::string, int> name_count;
    for (const auto& s : scans) {
        for (const auto& f : s.fns) ++name_count[f.name];
    }
    struct Indexed {
        FunctionUnit unit;
        const FileScan* scan;
        const RawFn* raw;
    };
    std::vector<Indexed> units;
    std::map<std::string, int> seen;
    for (const auto& s : scans) {
        for (const auto& f : s.fns) {
            FunctionUnit u;
            u.name = f.name;
            if (name_count[f.name] == 1) {
                u.id = f.name;
            } else {
                int ord = seen[f.name]++;
                u.id = f.name + "@" + s.path + "#" + std::to_string(ord);
            }
            u.file = s.path;
            u.span = f.span;
            u.body = s.text->substr(f.span.begin, f.span.size());
            units.push_back({std::move(u), &s, &f});
        }
    }

    // name -> id for callee resolution (only unambiguous names resolve)
    std::map<std::string, std::string> by_name;
    for (const auto& iu : units) {
        if (name_count[iu.unit.name] == 1) by_name[iu.unit.name] = iu.unit.id;
    }

    // callees and call sites by syntactic call match: ident '(' with no
    // leading '.' (method) and no trailing '!' (macro)
    for (auto& iu : units) {
        const auto& src = *iu.scan->text;
        const auto& toks = iu.scan->toks;
        std::set<std::string> callees;
        for (std::size_t k = iu.raw->body_tok_begin; k + 1 < iu.raw->body_tok_end; ++k) {
            const Token& t = toks[k];
            if (t.kind != TokKind::Ident || !is_punct(src, toks[k + 1], '(')) continue;
            if (k > 0 && (is_punct(src, toks[k - 1], '.') || ident_is(src, toks[k - 1], "fn"))) continue;
            auto w = std::string(t.text(src));
            auto it = by_name.find(w);
            if (it == by_name.end() || it->second == iu.unit.id) continue;
            callees.insert(it->second);

            // record a call site on the callee: the invocation's full line
            std::size_t line_b = t.begin;
            while (line_b > 0 && src[line_b - 1] != '\n') --line_b;
            std::size_t line_e = t.begin;
            while (line_e < src.size() && src[line_e] != '\n') ++line_e;
            line_b = std::max(line_b, iu.unit.span.begin);
            line_e = std::min(line_e, iu.unit.span.end);
            std::string snippet = src.substr(line_b, line_e - line_b);
            for (auto& target : units) {
                if (target.unit.id != it->second) continue;
                auto& cs = target.unit.call_sites;
                bool dup = std::any_of(cs.begin(), cs.end(), [&](const CallSite& c) {
                    return c.caller_id == iu.unit.id && c.snippet == snippet;
                });
                if (!dup) cs.push_back({iu.unit.id, snippet});
            }
        }
        iu.unit.callees.assign(callees.begin(), callees.end());
    }

    // referenced globals and imports, in (file, offset) order
    std::sort(globals.begin(), globals.end(), [](const GlobalItem& a, const GlobalItem& b) {
        return std::tie(a.file, a.offset) < std::tie(b.file, b.offset);
    });
    std::sort(uses.begin(), uses.end(), [](const UseItem& a, const UseItem& b) {
        return std::tie(a.file, a.offset) < std::tie(b.file, b.offset);
    });
    for (auto& iu : units) {
        const auto& src = *iu.scan->text;
        const auto& toks = iu.scan->toks;
        for (const auto& g : globals) {
            if (body_has_ident(src, toks, iu.raw->body_tok_begin, iu.raw->body_tok_end, g.name)) {
                iu.unit.globals.push_back(g.text);
            }
        }
        for (const auto& u : uses) {
            if (u.file != iu.unit.file) continue;
            bool referenced = u.glob;
            for (const auto& leaf : u.leaves) {
                if (referenced) break;
                referenced = body_has_ident(src, toks, iu.raw->body_tok_begin, iu.raw->body_tok_end, leaf);
            }
            if (referenced) iu.unit.imports.push_back(u.text);
        }
    }

    std::vector<FunctionUnit> out;
    out.reserve(units.size());
    for (auto& iu : units) out.push_back(std::move(iu.unit));
    std::sort(out.begin(), out.end(),
              [](const FunctionUnit& a, const FunctionUnit& b) { return a.id < b.id; });
    return out;
}

DependencyOrder order_by_dependency(const std::vector<FunctionUnit>& units) {
    std::map<std::string, std::set<std::string>> pending;  // id -> unemitted callees
    for (const auto& u : units) {
        auto& deps = pending[u.id];
        for (const auto& c : u.callees) {
            if (c != u.id) deps.insert(c);
        }
    }
    DependencyOrder order;
    std::set<std::string> emitted;
    while (!pending.empty()) {
        // lexicographically first ready node; if none, first remaining (cycle break)
        std::string pick;
        for (const auto& [id, deps] : pending) {
            if (deps.empty()) {
                pick = id;
                break;
            }
        }
        if (pick.empty()) pick = pending.begin()->first;
        pending.erase(pick);
        emitted.insert(pick);
        for (auto& [id, deps] : pending) deps.erase(pick);
        order.ordered_ids.push_back(std::move(pick));
    }
    return order;
}

ProjectSnapshot substitute(const ProjectSnapshot& project, const std::string& unit_id,
                           const std::string& new_body) {
    if (new_body.empty()) throw Error("substitute: empty body for " + unit_id);
    const FunctionUnit& target = project.unit(unit_id);

    ProjectSnapshot next = project;
    next.baseline_marker = false;
    std::string& text = next.files.at(target.file);
    text = text.substr(0, target.span.begin) + new_body + text.substr(target.span.end);

    const auto old_end = target.span.end;
    const std::ptrdiff_t delta =
        static_cast<std::ptrdiff_t>(new_body.size()) - static_cast<std::ptrdiff_t>(target.span.size());
    for (auto& [id, u] : next.function_index) {
        if (u.file != target.file) continue;
        if (id == unit_id) {
            u.span.end = u.span.begin + new_body.size();
            u.body = new_body;
        } else if (u.span.begin >= old_end) {
            u.span.begin = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(u.span.begin) + delta);
            u.span.end = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(u.span.end) + delta);
        }
    }
    return next;
}

ProjectSnapshot load_project(const fs::path& dir) {
    if (!fs::exists(dir) || !fs::is_directory(dir)) {
        throw Error("project directory not found: " + dir.string());
    }
    ProjectSnapshot project;
    project.baseline_marker = true;
    for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it) {
        const auto& entry = *it;
        auto rel = fs::relative(entry.path(), dir).generic_string();
        auto base = entry.path().filename().string();
        if (entry.is_directory()) {
            if (base == "target" || base == ".git" || base == "build") it.disable_recursion_pending();
            continue;
        }
        if (!entry.is_regular_file()) continue;
        if (base == "functions.json") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        project.files.emplace(rel, buf.str());
    }

    auto sidecar = dir / "functions.json";
    if (fs::exists(sidecar)) {
        load_sidecar(sidecar, project);
    } else {
        for (auto& u : index_functions(project)) {
            auto id = u.id;
            project.function_index.emplace(std::move(id), std::move(u));
        }
    }
    return project;
}

void write_project(const ProjectSnapshot& project, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& [rel, text] : project.files) {
        fs::path p = dir / fs::path(rel);
        fs::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + p.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
    }
}

}  // namespace refinery
