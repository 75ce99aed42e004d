#include "refinery/lex.hpp"

namespace refinery::lex {

namespace {

// Consumes a (possibly raw, possibly byte) string literal starting at i.
// Returns one past the closing delimiter, or src.size() on unterminated input.
std::size_t skip_string(std::string_view src, std::size_t i) {
    std::size_t n = src.size();
    bool raw = false;
    if (src[i] == 'b') ++i;
    if (i < n && src[i] == 'r') {
        raw = true;
        ++i;
    }
    std::size_t hashes = 0;
    if (raw) {
        while (i < n && src[i] == '#') {
            ++hashes;
            ++i;
        }
    }
    if (i >= n || src[i] != '"') return i;  // not actually a string; caller rechecks
    ++i;
    while (i < n) {
        if (!raw && src[i] == '\\') {
            i += 2;
            continue;
        }
        if (src[i] == '"') {
            if (!raw) return i + 1;
            std::size_t j = i + 1, seen = 0;
            while (j < n && src[j] == '#' && seen < hashes) {
                ++j;
                ++seen;
            }
            if (seen == hashes) return j;
        }
        ++i;
    }
    return n;
}

// i points at '\''. Distinguishes char literals from lifetimes.
std::size_t skip_char_or_lifetime(std::string_view src, std::size_t i, bool& is_lifetime) {
    std::size_t n = src.size();
    is_lifetime = false;
    std::size_t j = i + 1;
    if (j >= n) return n;
    if (src[j] == '\\') {  // escaped char literal
        ++j;
        if (j < n && src[j] == 'u') {  // '\u{...}'
            ++j;
            if (j < n && src[j] == '{') {
                while (j < n && src[j] != '}') ++j;
            }
        }
        ++j;
        if (j < n && src[j] == '\'') return j + 1;
        return j;
    }
    if (is_ident_start(src[j])) {
        std::size_t k = j;
        while (k < n && is_ident_cont(src[k])) ++k;
        if (k < n && src[k] == '\'' && k == j + 1) return k + 1;  // 'x'
        if (k < n && src[k] == '\'') return k + 1;                // multi-char? treat as literal
        is_lifetime = true;                                       // 'ident not closed -> lifetime
        return k;
    }
    // something like '(' inside a char literal: '('
    if (j + 1 < n && src[j + 1] == '\'') return j + 2;
    return j + 1;
}

}  // namespace

std::vector<Token> scan(std::string_view src) {
    std::vector<Token> toks;
    std::size_t i = 0, n = src.size();
    while (i < n) {
        char c = src[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++i;
            continue;
        }
        // comments
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            while (i < n && src[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            std::size_t depth = 1;
            i += 2;
            while (i < n && depth > 0) {
                if (src[i] == '/' && i + 1 < n && src[i + 1] == '*') {
                    ++depth;
                    i += 2;
                } else if (src[i] == '*' && i + 1 < n && src[i + 1] == '/') {
                    --depth;
                    i += 2;
                } else {
                    ++i;
                }
            }
            continue;
        }
        // string-ish literals (plain, raw, byte, byte-raw)
        if (c == '"' || c == 'r' || c == 'b') {
            std::size_t j = i;
            if (j < n && src[j] == 'b') ++j;
            if (j < n && src[j] == 'r') {
                ++j;
                while (j < n && src[j] == '#') ++j;
            }
            if (j < n && src[j] == '"') {
                std::size_t e = skip_string(src, i);
                toks.push_back({TokKind::Literal, i, e});
                i = e;
                continue;
            }
        }
        if (c == '\'') {
            bool lifetime = false;
            std::size_t e = skip_char_or_lifetime(src, i, lifetime);
            toks.push_back({TokKind::Literal, i, e});
            i = e;
            continue;
        }
        if (is_ident_start(c)) {
            std::size_t b = i;
            while (i < n && is_ident_cont(src[i])) ++i;
            toks.push_back({TokKind::Ident, b, i});
            continue;
        }
        if (c >= '0' && c <= '9') {
            std::size_t b = i;
            while (i < n && (is_ident_cont(src[i]) || src[i] == '.')) {
                // stop at '..' range operator and method calls on literals
                if (src[i] == '.' && i + 1 < n && (src[i + 1] == '.' || is_ident_start(src[i + 1]))) break;
                ++i;
            }
            toks.push_back({TokKind::Literal, b, i});
            continue;
        }
        toks.push_back({TokKind::Punct, i, i + 1});
        ++i;
    }
    return toks;
}

std::vector<UnsafeRegion> find_unsafe_regions(std::string_view src, const std::vector<Token>& toks) {
    std::vector<UnsafeRegion> regions;
    auto text = [&](std::size_t k) { return toks[k].text(src); };
    auto is_punct = [&](std::size_t k, char c) {
        return toks[k].kind == TokKind::Punct && src[toks[k].begin] == c;
    };

    // Matches the brace opened at token index `open`, returns index of the
    // closing brace or toks.size() if unbalanced.
    auto match_brace = [&](std::size_t open) {
        std::size_t depth = 0;
        for (std::size_t k = open; k < toks.size(); ++k) {
            if (is_punct(k, '{')) ++depth;
            else if (is_punct(k, '}')) {
                if (--depth == 0) return k;
            }
        }
        return toks.size();
    };

    for (std::size_t k = 0; k < toks.size(); ++k) {
        if (toks[k].kind != TokKind::Ident || text(k) != "unsafe") continue;
        std::size_t j = k + 1;
        if (j >= toks.size()) break;
        bool fn_body = false;
        if (is_punct(j, '{')) {
            // unsafe block
        } else {
            // possible fn header: unsafe [extern ["C"]] [const|async]* fn name ...
            std::size_t probe = j;
            bool saw_fn = false;
            while (probe < toks.size() && probe < k + 6) {
                if (toks[probe].kind == TokKind::Ident) {
                    auto t = text(probe);
                    if (t == "fn") {
                        saw_fn = true;
                        break;
                    }
                    if (t == "extern" || t == "const" || t == "async") {
                        ++probe;
                        continue;
                    }
                    break;  // unsafe impl / unsafe trait / other
                }
                if (toks[probe].kind == TokKind::Literal) {  // abi string after extern
                    ++probe;
                    continue;
                }
                break;
            }
            if (!saw_fn) continue;
            // find the body brace; a `;` first means declaration only
            std::size_t b = probe;
            while (b < toks.size() && !is_punct(b, '{') && !is_punct(b, ';')) ++b;
            if (b >= toks.size() || is_punct(b, ';')) continue;
            j = b;
            fn_body = true;
        }
        std::size_t close = match_brace(j);
        if (close >= toks.size()) continue;
        regions.push_back({toks[j].begin, toks[close].begin, fn_body});
    }
    return regions;
}

std::vector<std::size_t> line_starts(std::string_view src) {
    std::vector<std::size_t> starts{0};
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i] == '\n') starts.push_back(i + 1);
    }
    return starts;
}

std::size_t line_of(const std::vector<std::size_t>& starts, std::size_t offset) {
    std::size_t lo = 0, hi = starts.size();
    while (lo + 1 < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (starts[mid] <= offset) lo = mid;
        else hi = mid;
    }
    return lo;
}

}  // namespace refinery::lex
