#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace refinery {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed source or sidecar data; message names file and location.
struct ParseError : Error {
    using Error::Error;
};

/// Missing tool, unwritable path, unspawnable binary — problems with the
/// environment, distinct from a failing compile or test.
struct EnvironmentError : Error {
    using Error::Error;
};

struct ByteSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // one past last byte
    std::size_t size() const { return end - begin; }
    bool operator==(const ByteSpan&) const = default;
};

struct CallSite {
    std::string caller_id;
    std::string snippet;  // the invocation with its surrounding line
};

/// One target-language function: the unit of search.
struct FunctionUnit {
    std::string id;
    std::string name;
    std::string body;  // file content at span, signature included
    std::string file;  // relative path
    ByteSpan span;
    std::vector<std::string> callees;     // ids of indexed functions this one calls
    std::vector<CallSite> call_sites;     // where others call this one
    std::vector<std::string> globals;     // static/const declarations it references
    std::vector<std::string> imports;     // use declarations it references
};

/// Immutable view of the whole program. Substitution returns a new value;
/// all operations are pure and safe to share across threads.
struct ProjectSnapshot {
    std::map<std::string, std::string> files;  // relative path -> full text
    std::map<std::string, FunctionUnit> function_index;
    bool baseline_marker = false;  // true only for the untouched r0

    const FunctionUnit& unit(const std::string& id) const;
};

struct DependencyOrder {
    std::vector<std::string> ordered_ids;
};

/// Reads every regular file under dir (build/VCS noise skipped) and indexes
/// functions. A functions.json sidecar, when present, pre-declares ids and
/// spans instead of running the parser.
ProjectSnapshot load_project(const std::filesystem::path& dir);

/// Materializes the snapshot's files under dir, creating directories as needed.
void write_project(const ProjectSnapshot& project, const std::filesystem::path& dir);

/// Extracts every function item from the project's .rs files, with callees,
/// call sites, referenced globals and imports. Deterministic for fixed input.
std::vector<FunctionUnit> index_functions(const ProjectSnapshot& project);

/// Bottom-up topological order: callees before callers. Ties and cycles are
/// broken by lexicographic id, so output is deterministic.
DependencyOrder order_by_dependency(const std::vector<FunctionUnit>& units);

/// Returns a new snapshot with the unit's span replaced by new_body and all
/// spans in the same file recomputed. Every other byte is unchanged.
ProjectSnapshot substitute(const ProjectSnapshot& project, const std::string& unit_id,
                           const std::string& new_body);

}  // namespace refinery
