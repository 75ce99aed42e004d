#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace refinery::lex {

enum class TokKind {
    Ident,    // identifiers and keywords
    Punct,    // single punctuation character
    Literal,  // string/char/byte/numeric literal, lifetime
};

struct Token {
    TokKind kind;
    std::size_t begin = 0;  // byte offset into source
    std::size_t end = 0;    // one past last byte

    std::string_view text(std::string_view src) const { return src.substr(begin, end - begin); }
};

/// Scans Rust source into a flat token stream. Comments (line and nested
/// block) are dropped; string, raw-string, char and byte literals each
/// become a single Literal token, so downstream passes never see their
/// contents as code. Lifetimes ('a) are distinguished from char literals.
std::vector<Token> scan(std::string_view src);

/// A region of source lexically governed by `unsafe`: either an unsafe
/// block or the body of an unsafe fn. Offsets are the braces themselves.
struct UnsafeRegion {
    std::size_t open_brace = 0;   // offset of '{'
    std::size_t close_brace = 0;  // offset of matching '}'
    bool is_fn_body = false;
};

/// Finds unsafe regions in a token stream. `unsafe impl`, `unsafe trait`
/// and `unsafe extern { ... }` foreign blocks are not code regions.
std::vector<UnsafeRegion> find_unsafe_regions(std::string_view src, const std::vector<Token>& toks);

/// Byte offsets of every '\n' in src, for offset -> line mapping.
std::vector<std::size_t> line_starts(std::string_view src);

/// 0-based line index of a byte offset given line_starts(src).
std::size_t line_of(const std::vector<std::size_t>& starts, std::size_t offset);

inline bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_ident_cont(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9');
}

}  // namespace refinery::lex
