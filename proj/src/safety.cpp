#include "refinery/safety.hpp"

#include <algorithm>
#include <set>

#include "refinery/code_model.hpp"
#include "refinery/lex.hpp"

namespace refinery {

using lex::Token;
using lex::TokKind;

namespace {

bool is_punct(std::string_view src, const Token& t, char c) {
    return t.kind == TokKind::Punct && src[t.begin] == c;
}

bool ident_is(std::string_view src, const Token& t, std::string_view s) {
    return t.kind == TokKind::Ident && t.text(src) == s;
}

// Keywords that look like call heads but are not calls: `if (x)`, `while (...)`, etc.
bool is_non_call_keyword(std::string_view w) {
    static const std::set<std::string_view> kws = {
        "if", "while", "for", "match", "return", "loop", "fn", "in", "as", "let",
        "mut", "else", "impl", "where", "unsafe", "move", "const", "static", "use",
        "pub", "mod", "struct", "enum", "trait", "type", "extern", "crate", "ref",
        "break", "continue", "dyn", "box", "async", "await",
    };
    return kws.count(w) > 0;
}

// True when the previous significant token terminates an operand, which makes
// a following '*' a multiplication rather than a dereference.
bool ends_operand(std::string_view src, const Token& t) {
    if (t.kind == TokKind::Literal) {
        // lifetimes don't end operands, every other literal does
        return src[t.begin] != '\'' || (t.end - t.begin >= 3 && src[t.end - 1] == '\'');
    }
    if (t.kind == TokKind::Ident) return !is_non_call_keyword(t.text(src));
    // '}' does not end an operand: in statement position Rust itself parses
    // a following '*' as a dereference, which is why `{2} * 3` needs parens
    char c = src[t.begin];
    return c == ')' || c == ']' || c == '?';
}

}  // namespace

UnsafeConstructCounts count_source(std::string_view src) {
    UnsafeConstructCounts out;
    auto toks = lex::scan(src);
    auto regions = lex::find_unsafe_regions(src, toks);
    auto starts = lex::line_starts(src);

    auto in_unsafe = [&](std::size_t offset) {
        for (const auto& r : regions) {
            if (offset > r.open_brace && offset < r.close_brace) return true;
        }
        return false;
    };

    // LUC: union of interior lines over all regions, delimiter lines excluded.
    {
        std::set<std::size_t> lines;
        for (const auto& r : regions) {
            std::size_t open_line = lex::line_of(starts, r.open_brace);
            std::size_t close_line = lex::line_of(starts, r.close_brace);
            for (std::size_t ln = open_line + 1; ln < close_line; ++ln) {
                std::size_t b = starts[ln];
                std::size_t e = (ln + 1 < starts.size()) ? starts[ln + 1] : src.size();
                bool blank = true;
                for (std::size_t i = b; i < e; ++i) {
                    if (src[i] != ' ' && src[i] != '\t' && src[i] != '\r' && src[i] != '\n') {
                        blank = false;
                        break;
                    }
                }
                if (!blank) lines.insert(ln);
            }
        }
        out.luc = static_cast<std::int64_t>(lines.size());
    }

    // Token walk for RPC / RPR / UCE / UTC.
    bool last_cast_was_raw = false;  // tracks `as *mut T as usize` chains
    for (std::size_t k = 0; k < toks.size(); ++k) {
        const Token& t = toks[k];

        if (ident_is(src, t, "as")) {
            bool raw_target = k + 2 < toks.size() && is_punct(src, toks[k + 1], '*') &&
                              (ident_is(src, toks[k + 2], "const") || ident_is(src, toks[k + 2], "mut"));
            if (raw_target) {
                ++out.utc;
                // consume the chained pointer levels of the cast target so
                // they are not miscounted as declarations
                std::size_t j = k + 1;
                while (j + 1 < toks.size() && is_punct(src, toks[j], '*') &&
                       (ident_is(src, toks[j + 1], "const") || ident_is(src, toks[j + 1], "mut"))) {
                    j += 2;
                }
                k = j - 1;
                last_cast_was_raw = true;
            } else {
                if (last_cast_was_raw) ++out.utc;  // raw source cast in a chain
                last_cast_was_raw = false;
            }
            continue;
        }

        if (is_punct(src, t, '*')) {
            bool raw_type = k + 1 < toks.size() &&
                            (ident_is(src, toks[k + 1], "const") || ident_is(src, toks[k + 1], "mut"));
            if (raw_type) {
                ++out.rpc;
                ++k;  // skip the const/mut qualifier
                continue;
            }
            bool prefix = k == 0 || !ends_operand(src, toks[k - 1]);
            if (prefix && in_unsafe(t.begin)) ++out.rpr;
            continue;
        }

        if (t.kind == TokKind::Ident && k + 1 < toks.size() && is_punct(src, toks[k + 1], '(')) {
            auto w = t.text(src);
            if (is_non_call_keyword(w)) continue;
            if (k > 0 && ident_is(src, toks[k - 1], "fn")) continue;  // definition head
            if (in_unsafe(t.begin)) ++out.uce;
            continue;
        }

        // any expression-breaking punctuation ends a cast chain
        if (t.kind == TokKind::Punct) {
            char c = src[t.begin];
            if (c == ';' || c == ',' || c == ')' || c == '{' || c == '}' || c == '=') {
                last_cast_was_raw = false;
            }
        }
    }
    return out;
}

UnsafeConstructCounts count_constructs(const ProjectSnapshot& program) {
    UnsafeConstructCounts total;
    for (const auto& [path, text] : program.files) {
        if (path.size() >= 3 && path.compare(path.size() - 3, 3, ".rs") == 0) {
            total += count_source(text);
        }
    }
    return total;
}

double safety_ratio(const UnsafeConstructCounts& counts_i, const SafetyBaseline& baseline, bool compilable) {
    if (!compilable) return 0.0;
    const auto total0 = baseline.counts0.total();
    if (total0 == 0) return 1.0;
    double ratio = 1.0 - static_cast<double>(counts_i.total()) / static_cast<double>(total0);
    return std::max(ratio, 0.0);
}

double idiomaticity(std::int64_t linter_i, const SafetyBaseline& baseline) {
    const std::int64_t linter0 = baseline.linter0.value_or(0);
    if (linter0 == 0) return linter_i == 0 ? 1.0 : 0.0;
    double score = 1.0 - static_cast<double>(linter_i) / static_cast<double>(linter0);
    return std::max(score, 0.0);
}

}  // namespace refinery
