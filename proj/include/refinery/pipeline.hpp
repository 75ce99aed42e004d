#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "refinery/mcts.hpp"
#include "refinery/providers.hpp"
#include "refinery/safety.hpp"

namespace refinery {

/// Bad configuration or unusable environment; the CLI maps this to exit 2.
struct ConfigError : Error {
    using Error::Error;
};

struct ModelConfig {
    std::string id;
    std::string kind = "mock";  // mock | http | replay
    std::string endpoint;
    std::string path = "/v1/chat/completions";
    std::string model_name;
    std::string api_key_env;
    double temperature = 0.2;
};

struct RunConfig {
    std::filesystem::path project_dir;
    std::optional<std::filesystem::path> tests_file;
    std::filesystem::path output_dir;
    std::filesystem::path report_path;
    std::optional<std::filesystem::path> transcript_path;
    std::optional<std::filesystem::path> tree_dump_dir;
    SearchConfig search;
    ToolConfig tools;
    std::vector<ModelConfig> models;

    /// Parses the JSON config document (sections: search, models, timeouts,
    /// tools); any path fields present override the defaults.
    static RunConfig from_file(const std::filesystem::path& path);
    static RunConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

struct FunctionReport {
    bool refined = false;
    double safety = 0.0;  // S of the kept program state after this step
    std::optional<int> compile_errors;  // best candidate's error count; null if none materialized
    std::int64_t queries = 0;
    std::int64_t tokens = 0;
};

struct ProjectMetrics {
    double sr = 0.0;
    std::optional<double> fcr;
    std::optional<double> frr;
    std::optional<double> tpr;
    std::optional<double> pcr;
    std::optional<double> ppr;
    std::optional<std::int64_t> linter_warnings;
    std::optional<double> idiomaticity;
    std::optional<double> avg_queries;
    std::optional<double> avg_tokens;
    double wall_time_s = 0.0;
    bool vacuous_tests = false;   // no suite: TPR/PPR are vacuous
    bool zero_functions = false;  // nothing to translate: rates are null
};

struct TranslationReport {
    int schema_version = 1;
    UnsafeConstructCounts baseline_counts;
    std::optional<std::int64_t> baseline_linter;
    std::map<std::string, FunctionReport> per_function;
    ProjectMetrics project;
};

/// Derives the project-level metrics from per-function results and the
/// final assembled program. TPR/PCR/PPR come from the supplied final
/// measurements so the caller controls when the suite is re-run.
ProjectMetrics compute_metrics(const std::map<std::string, FunctionReport>& per_function,
                               const ProjectSnapshot& final_project, const SafetyBaseline& baseline,
                               bool final_compiles,
                               const std::optional<std::vector<TestOutcome>>& final_tests,
                               std::optional<std::int64_t> final_linter);

/// Writes the report as JSON with a stable schema; full-precision numbers.
void emit_report(const TranslationReport& report, const std::filesystem::path& path);
TranslationReport parse_report(const std::filesystem::path& path);

/// The whole run: baseline measurement, one search per function in
/// dependency order, permanent substitution of accepted bodies, final
/// metrics, refined project + report + transcript emission.
TranslationReport run_translation(const RunConfig& config, ModelPool& pool, Validator& validator,
                                  TranscriptLog* transcript = nullptr);

/// Builds the model pool described by the config. Mock models consume the
/// optional scripts document (JSON: {"models":{id:{"responses":[...]}}});
/// replay models read the recorded transcript.
ModelPool build_pool(const RunConfig& config, const std::optional<std::filesystem::path>& mock_scripts);

}  // namespace refinery
