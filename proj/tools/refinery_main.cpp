#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "refinery/pipeline.hpp"

namespace {

using namespace refinery;

int cmd_translate(const std::string& project, const std::optional<std::string>& tests,
                  const std::optional<std::string>& config_path, const std::string& out_dir,
                  const std::string& report_path, std::optional<std::uint64_t> seed,
                  const std::optional<std::string>& mock_scripts,
                  const std::optional<std::string>& tree_dump) {
    RunConfig config = config_path ? RunConfig::from_file(*config_path) : RunConfig{};
    config.project_dir = project;
    config.output_dir = out_dir;
    config.report_path = report_path;
    if (tests) config.tests_file = *tests;
    if (seed) config.search.seed = *seed;
    if (tree_dump) config.tree_dump_dir = *tree_dump;
    if (!config.transcript_path) {
        config.transcript_path = std::filesystem::path(report_path).replace_extension(".transcript.jsonl");
    }
    if (config.models.empty()) {
        // offline default: a single mock model; real runs declare models in the config
        config.models.push_back({"mock-default", "mock", "", "", "", "", 0.2});
    }

    ModelPool pool = build_pool(config, mock_scripts ? std::optional<std::filesystem::path>(*mock_scripts)
                                                     : std::nullopt);
    ProcessValidator validator(config.tools);
    TranscriptLog log(*config.transcript_path);

    TranslationReport report = run_translation(config, pool, validator, &log);

    std::int64_t refined = 0;
    for (const auto& [id, f] : report.per_function) refined += f.refined ? 1 : 0;
    std::printf("functions: %zu  refined: %lld  SR: %.4f\n", report.per_function.size(),
                static_cast<long long>(refined), report.project.sr);
    if (report.project.frr) std::printf("FRR: %.2f%%  ", *report.project.frr * 100.0);
    if (report.project.fcr) std::printf("FCR: %.2f%%  ", *report.project.fcr * 100.0);
    if (report.project.tpr) std::printf("TPR: %.2f%%", *report.project.tpr * 100.0);
    std::printf("\nreport: %s\n", report_path.c_str());
    return refined == 0 ? 1 : 0;
}

int cmd_metrics(const std::string& project_dir, const std::string& baseline_dir, bool lint,
                bool no_compile) {
    ProjectSnapshot project = load_project(project_dir);
    ProjectSnapshot base = load_project(baseline_dir);

    SafetyBaseline baseline;
    baseline.counts0 = count_constructs(base);

    ToolConfig tools;
    tools.lint = lint;
    ProcessValidator validator(tools);

    bool compilable = true;
    if (!no_compile) compilable = validator.compile(project).success;

    auto counts = count_constructs(project);
    double sr = safety_ratio(counts, baseline, compilable);
    std::printf("counts: rpc=%lld rpr=%lld luc=%lld uce=%lld utc=%lld total=%lld\n",
                static_cast<long long>(counts.rpc), static_cast<long long>(counts.rpr),
                static_cast<long long>(counts.luc), static_cast<long long>(counts.uce),
                static_cast<long long>(counts.utc), static_cast<long long>(counts.total()));
    std::printf("baseline total: %lld\n", static_cast<long long>(baseline.counts0.total()));
    std::printf("SR: %.6f%s\n", sr, no_compile ? " (compile gate skipped)" : "");

    if (lint) {
        baseline.linter0 = validator.lint_warnings(base);
        auto warnings = validator.lint_warnings(project);
        if (warnings && baseline.linter0) {
            std::printf("linter warnings: %lld (baseline %lld)  I: %.6f\n",
                        static_cast<long long>(*warnings), static_cast<long long>(*baseline.linter0),
                        idiomaticity(*warnings, baseline));
        }
    }
    return 0;
}

int cmd_replay(const std::string& transcript_path, const std::optional<std::string>& out_dir,
               const std::optional<std::string>& report_path) {
    Transcript transcript = load_transcript(transcript_path);
    if (transcript.config_json.empty()) {
        throw ConfigError("transcript has no header; cannot replay");
    }
    RunConfig config = RunConfig::from_json_text(transcript.config_json);
    config.transcript_path = transcript_path;
    for (auto& m : config.models) m.kind = "replay";
    if (out_dir) config.output_dir = *out_dir;
    else config.output_dir += "-replay";
    if (report_path) config.report_path = *report_path;
    else config.report_path += ".replay.json";

    ModelPool pool = build_pool(config, std::nullopt);
    ProcessValidator validator(config.tools);
    TranslationReport report = run_translation(config, pool, validator, nullptr);

    std::printf("replayed %zu functions; SR: %.4f\nreport: %s\n", report.per_function.size(),
                report.project.sr, config.report_path.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"search-based refinement of transpiled Rust toward safer code"};
    app.require_subcommand(1);

    // translate
    auto* translate = app.add_subcommand("translate", "refine a project function by function");
    std::string project, out_dir, report_path;
    std::optional<std::string> tests, config_path, mock_scripts, tree_dump;
    std::optional<std::uint64_t> seed;
    translate->add_option("--project", project, "project directory (transpiler output)")->required();
    translate->add_option("--tests", tests, "behavioral test suite (JSON)");
    translate->add_option("--config", config_path, "run configuration (JSON)");
    translate->add_option("--out", out_dir, "output directory for the refined project")->required();
    translate->add_option("--report", report_path, "metrics report path (JSON)")->required();
    translate->add_option("--seed", seed, "search seed (overrides config)");
    translate->add_option("--mock", mock_scripts, "mock-provider scripts (JSON)");
    translate->add_option("--tree-dump", tree_dump, "directory for per-function tree dumps");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "standalone SR/I measurement");
    std::string m_project, m_baseline;
    bool m_lint = false, m_no_compile = false;
    metrics->add_option("--project", m_project, "project to measure")->required();
    metrics->add_option("--baseline", m_baseline, "untouched transpiler output")->required();
    metrics->add_flag("--lint", m_lint, "also run the linter and report I");
    metrics->add_flag("--no-compile", m_no_compile, "skip the compilability gate (assume m=1)");

    // replay
    auto* replay = app.add_subcommand("replay", "deterministically re-run a recorded transcript");
    std::string r_transcript;
    std::optional<std::string> r_out, r_report;
    replay->add_option("--transcript", r_transcript, "transcript log (JSONL)")->required();
    replay->add_option("--out", r_out, "output directory override");
    replay->add_option("--report", r_report, "report path override");

    CLI11_PARSE(app, argc, argv);

    try {
        if (translate->parsed()) {
            return cmd_translate(project, tests, config_path, out_dir, report_path, seed,
                                 mock_scripts, tree_dump);
        }
        if (metrics->parsed()) return cmd_metrics(m_project, m_baseline, m_lint, m_no_compile);
        if (replay->parsed()) return cmd_replay(r_transcript, r_out, r_report);
    } catch (const refinery::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const refinery::EnvironmentError& e) {
        std::cerr << "environment error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
