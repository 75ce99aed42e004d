#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refinery/code_model.hpp"

namespace refinery {

struct CompileError {
    std::string code;  // e.g. E0308; empty when the compiler gave none
    std::string message;
    std::string file;
    int line = 0;
};

struct CompileOutcome {
    bool success = false;
    std::vector<CompileError> errors;
    int error_count() const { return static_cast<int>(errors.size()); }
};

/// Compile score 1/(|E_C|+1): 1 exactly when compilation succeeds and
/// strictly decreasing in the error count.
double compile_score(const CompileOutcome& outcome);

struct TestCase {
    std::string id;
    std::vector<std::string> args;
    std::string stdin_bytes;
    std::string expected_stdout;
    int expected_exit = 0;
};

struct TestOutcome {
    std::string test_id;
    std::string observed_stdout;
    int observed_exit = 0;
    bool passed = false;
    // expectations carried along so feedback can show both sides
    std::string expected_stdout;
    int expected_exit = 0;
};

/// True iff every outcome passed. An empty list is vacuously true; callers
/// that care (the report) flag vacuity separately.
bool is_equivalent(const std::vector<TestOutcome>& outcomes);

struct ValidationResult {
    CompileOutcome compile;
    std::optional<std::vector<TestOutcome>> tests;  // present only on compile success
    std::string feedback_text;                      // rendered diagnostics for prompt injection
};

/// Parses a JSON test-suite document: {"tests":[{id,args,stdin|stdin_file,
/// expected_stdout|expected_stdout_file,expected_exit}...]}. File references
/// are resolved relative to the suite file.
std::vector<TestCase> load_test_suite(const std::filesystem::path& path);

/// Renders compile errors or test failures into bounded feedback text
/// (at most max_items diagnostics / max_bytes total).
std::string render_feedback(const ValidationResult& result, std::size_t max_items = 40,
                            std::size_t max_bytes = 8192);

/// Compile/test backend. Implementations must tolerate concurrent calls on
/// distinct programs; results are immutable once produced.
class Validator {
public:
    virtual ~Validator() = default;

    virtual CompileOutcome compile(const ProjectSnapshot& program) = 0;
    virtual std::vector<TestOutcome> run_tests(const ProjectSnapshot& program,
                                               const std::vector<TestCase>& suite) = 0;
    /// Linter warning count; nullopt when no linter is configured.
    virtual std::optional<std::int64_t> lint_warnings(const ProjectSnapshot& program) = 0;

    /// compile, then tests when the build succeeded and a suite exists;
    /// fills feedback_text.
    ValidationResult validate(const ProjectSnapshot& program, const std::vector<TestCase>& suite);
};

/// Command templates for the external toolchain. Placeholders: {workdir},
/// {bin} (output binary path), {root} (crate root source file).
struct ToolConfig {
    std::vector<std::string> compile_cmd;  // empty -> auto (cargo or rustc)
    std::vector<std::string> lint_cmd;     // empty -> auto when lint=true
    bool lint = false;
    double compile_timeout_s = 300.0;
    double test_timeout_s = 30.0;
};

/// Drives the real compiler/linter in a fresh scratch directory per call and
/// parses machine-readable diagnostics. Warnings never count as errors.
class ProcessValidator : public Validator {
public:
    explicit ProcessValidator(ToolConfig config = {});

    CompileOutcome compile(const ProjectSnapshot& program) override;
    std::vector<TestOutcome> run_tests(const ProjectSnapshot& program,
                                       const std::vector<TestCase>& suite) override;
    std::optional<std::int64_t> lint_warnings(const ProjectSnapshot& program) override;

    /// Compiles into the given workdir, leaving the binary in place for
    /// run_tests_in; exposed for callers that manage their own workspaces.
    CompileOutcome compile_in(const ProjectSnapshot& program, const std::filesystem::path& workdir);
    std::vector<TestOutcome> run_tests_in(const ProjectSnapshot& program,
                                          const std::vector<TestCase>& suite,
                                          const std::filesystem::path& workdir);

private:
    ToolConfig config_;
};

}  // namespace refinery
