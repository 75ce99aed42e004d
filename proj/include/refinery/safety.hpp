#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace refinery {

struct ProjectSnapshot;

/// The five unsafe-construct categories counted over a whole program.
///
/// Counting is purely lexical and deterministic over source bytes:
///   rpc  raw-pointer type occurrences (`*const T` / `*mut T`) outside
///        `as`-cast targets; nested pointer levels count individually
///   rpr  prefix `*` dereference expressions inside unsafe regions
///   luc  non-blank physical lines strictly inside an unsafe region
///        (unsafe block or unsafe fn body), delimiter lines excluded,
///        each line counted once
///   uce  call expressions (fn or method call syntax, macro invocations
///        excluded) inside unsafe regions
///   utc  `as` casts whose target type is a raw pointer, plus a directly
///        chained `as` whose operand was such a cast
struct UnsafeConstructCounts {
    std::int64_t rpc = 0;
    std::int64_t rpr = 0;
    std::int64_t luc = 0;
    std::int64_t uce = 0;
    std::int64_t utc = 0;

    std::int64_t total() const { return rpc + rpr + luc + uce + utc; }

    UnsafeConstructCounts& operator+=(const UnsafeConstructCounts& o) {
        rpc += o.rpc;
        rpr += o.rpr;
        luc += o.luc;
        uce += o.uce;
        utc += o.utc;
        return *this;
    }
    bool operator==(const UnsafeConstructCounts&) const = default;
};

/// Measured once per run on the untouched transpiler output r0.
struct SafetyBaseline {
    UnsafeConstructCounts counts0;
    std::optional<std::int64_t> linter0;  // warning count, when the linter ran
};

/// Counts the five categories in a single source file.
UnsafeConstructCounts count_source(std::string_view src);

/// Counts over every .rs file of the program; additive across files.
UnsafeConstructCounts count_constructs(const ProjectSnapshot& program);

/// Safety ratio: compilability gate times the clamped fractional
/// reduction of the summed construct counts against the baseline.
/// A zero-construct baseline yields gate * 1.
double safety_ratio(const UnsafeConstructCounts& counts_i, const SafetyBaseline& baseline, bool compilable);

/// Linter-based idiomaticity: clamped fractional reduction of warning
/// counts against the baseline. A zero-warning baseline yields 1 only
/// for a zero-warning measurement.
double idiomaticity(std::int64_t linter_i, const SafetyBaseline& baseline);

}  // namespace refinery
