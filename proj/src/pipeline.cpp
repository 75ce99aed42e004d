#include "refinery/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace refinery {

namespace {

json opt_to_json(const std::optional<double>& v) { return v ? json(*v) : json(); }
json opt_to_json(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(); }
json opt_to_json(const std::optional<int>& v) { return v ? json(*v) : json(); }

template <typename T>
std::optional<T> opt_from_json(const json& j, const std::string& key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

json counts_to_json(const UnsafeConstructCounts& c) {
    return json{{"rpc", c.rpc}, {"rpr", c.rpr}, {"luc", c.luc},
                {"uce", c.uce}, {"utc", c.utc}, {"total", c.total()}};
}

UnsafeConstructCounts counts_from_json(const json& j) {
    UnsafeConstructCounts c;
    c.rpc = j.value("rpc", std::int64_t{0});
    c.rpr = j.value("rpr", std::int64_t{0});
    c.luc = j.value("luc", std::int64_t{0});
    c.uce = j.value("uce", std::int64_t{0});
    c.utc = j.value("utc", std::int64_t{0});
    return c;
}

// Minimum compile-error count over the tree's validated candidates.
std::optional<int> best_error_count(const SearchNode& root) {
    std::optional<int> best;
    std::vector<const SearchNode*> stack{&root};
    while (!stack.empty()) {
        const SearchNode* n = stack.back();
        stack.pop_back();
        if (n->validation) {
            int e = n->validation->compile.error_count();
            if (!best || e < *best) best = e;
        }
        for (const auto& c : n->children) stack.push_back(c.get());
    }
    return best;
}

}  // namespace

RunConfig RunConfig::from_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config is not valid JSON");
    RunConfig cfg;
    if (doc.contains("search")) {
        const auto& s = doc.at("search");
        cfg.search.num_rollouts = s.value("num_rollouts", cfg.search.num_rollouts);
        cfg.search.uct_c = s.value("uct_c", cfg.search.uct_c);
        cfg.search.max_depth = s.value("max_depth", cfg.search.max_depth);
        cfg.search.gen_children = s.value("gen_children", cfg.search.gen_children);
        cfg.search.fix_children = s.value("fix_children", cfg.search.fix_children);
        cfg.search.reward_weight = s.value("reward_weight", cfg.search.reward_weight);
        cfg.search.seed = s.value("seed", cfg.search.seed);
        cfg.search.early_exit = s.value("early_exit", cfg.search.early_exit);
    }
    if (doc.contains("timeouts")) {
        const auto& t = doc.at("timeouts");
        cfg.tools.test_timeout_s = t.value("test_seconds", cfg.tools.test_timeout_s);
        cfg.tools.compile_timeout_s = t.value("compile_seconds", cfg.tools.compile_timeout_s);
    }
    if (doc.contains("tools")) {
        const auto& t = doc.at("tools");
        if (t.contains("compile_cmd")) cfg.tools.compile_cmd = t.at("compile_cmd").get<std::vector<std::string>>();
        if (t.contains("lint_cmd")) cfg.tools.lint_cmd = t.at("lint_cmd").get<std::vector<std::string>>();
        cfg.tools.lint = t.value("lint", cfg.tools.lint);
    }
    if (doc.contains("models")) {
        for (const auto& m : doc.at("models")) {
            ModelConfig mc;
            mc.id = m.at("id").get<std::string>();
            mc.kind = m.value("kind", mc.kind);
            mc.endpoint = m.value("endpoint", mc.endpoint);
            mc.path = m.value("path", mc.path);
            mc.model_name = m.value("model", mc.model_name);
            mc.api_key_env = m.value("api_key_env", mc.api_key_env);
            mc.temperature = m.value("temperature", mc.temperature);
            cfg.models.push_back(std::move(mc));
        }
    }
    if (doc.contains("project_dir")) cfg.project_dir = doc.at("project_dir").get<std::string>();
    if (doc.contains("tests_file")) cfg.tests_file = fs::path(doc.at("tests_file").get<std::string>());
    if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
    if (doc.contains("report_path")) cfg.report_path = doc.at("report_path").get<std::string>();
    if (doc.contains("transcript_path")) cfg.transcript_path = fs::path(doc.at("transcript_path").get<std::string>());
    if (doc.contains("tree_dump_dir")) cfg.tree_dump_dir = fs::path(doc.at("tree_dump_dir").get<std::string>());
    return cfg;
}

std::string RunConfig::to_json_text() const {
    json models = json::array();
    for (const auto& m : this->models) {
        models.push_back({{"id", m.id},
                          {"kind", m.kind},
                          {"endpoint", m.endpoint},
                          {"path", m.path},
                          {"model", m.model_name},
                          {"api_key_env", m.api_key_env},
                          {"temperature", m.temperature}});
    }
    json doc{{"project_dir", project_dir.string()},
             {"output_dir", output_dir.string()},
             {"report_path", report_path.string()},
             {"search",
              {{"num_rollouts", search.num_rollouts},
               {"uct_c", search.uct_c},
               {"max_depth", search.max_depth},
               {"gen_children", search.gen_children},
               {"fix_children", search.fix_children},
               {"reward_weight", search.reward_weight},
               {"seed", search.seed},
               {"early_exit", search.early_exit}}},
             {"timeouts",
              {{"test_seconds", tools.test_timeout_s}, {"compile_seconds", tools.compile_timeout_s}}},
             {"tools",
              {{"compile_cmd", tools.compile_cmd}, {"lint_cmd", tools.lint_cmd}, {"lint", tools.lint}}},
             {"models", models}};
    if (tests_file) doc["tests_file"] = tests_file->string();
    if (transcript_path) doc["transcript_path"] = transcript_path->string();
    if (tree_dump_dir) doc["tree_dump_dir"] = tree_dump_dir->string();
    return doc.dump();
}

ProjectMetrics compute_metrics(const std::map<std::string, FunctionReport>& per_function,
                               const ProjectSnapshot& final_project, const SafetyBaseline& baseline,
                               bool final_compiles,
                               const std::optional<std::vector<TestOutcome>>& final_tests,
                               std::optional<std::int64_t> final_linter) {
    ProjectMetrics m;
    m.sr = safety_ratio(count_constructs(final_project), baseline, final_compiles);
    m.zero_functions = per_function.empty();

    if (!m.zero_functions) {
        const double total = static_cast<double>(per_function.size());
        std::int64_t refined = 0, queries = 0, tokens = 0;
        for (const auto& [id, f] : per_function) {
            refined += f.refined ? 1 : 0;
            queries += f.queries;
            tokens += f.tokens;
        }
        m.frr = static_cast<double>(refined) / total;
        // Every accepted body compiled at acceptance and fallbacks are the
        // baseline's own bodies, so a compiling final project means every
        // function's final body compiles.
        m.fcr = final_compiles ? 1.0 : *m.frr;
        m.avg_queries = static_cast<double>(queries) / total;
        m.avg_tokens = static_cast<double>(tokens) / total;
    }

    if (!m.zero_functions) m.pcr = final_compiles ? 1.0 : 0.0;
    if (final_tests && !final_tests->empty()) {
        std::int64_t passed = 0;
        for (const auto& t : *final_tests) passed += t.passed ? 1 : 0;
        m.tpr = static_cast<double>(passed) / static_cast<double>(final_tests->size());
        m.ppr = is_equivalent(*final_tests) ? 1.0 : 0.0;
    } else {
        m.vacuous_tests = true;
    }

    m.linter_warnings = final_linter;
    if (final_linter && baseline.linter0) {
        m.idiomaticity = idiomaticity(*final_linter, baseline);
    }
    return m;
}

void emit_report(const TranslationReport& report, const fs::path& path) {
    json per_function = json::object();
    for (const auto& [id, f] : report.per_function) {
        per_function[id] = {{"refined", f.refined},
                            {"safety", f.safety},
                            {"compile_errors", opt_to_json(f.compile_errors)},
                            {"queries", f.queries},
                            {"tokens", f.tokens}};
    }
    const auto& m = report.project;
    json doc{{"schema_version", report.schema_version},
             {"baseline",
              {{"counts", counts_to_json(report.baseline_counts)},
               {"linter_warnings", opt_to_json(report.baseline_linter)}}},
             {"per_function", per_function},
             {"project",
              {{"sr", m.sr},
               {"fcr", opt_to_json(m.fcr)},
               {"frr", opt_to_json(m.frr)},
               {"tpr", opt_to_json(m.tpr)},
               {"pcr", opt_to_json(m.pcr)},
               {"ppr", opt_to_json(m.ppr)},
               {"linter_warnings", opt_to_json(m.linter_warnings)},
               {"idiomaticity", opt_to_json(m.idiomaticity)},
               {"avg_queries", opt_to_json(m.avg_queries)},
               {"avg_tokens", opt_to_json(m.avg_tokens)},
               {"wall_time_s", m.wall_time_s},
               {"vacuous_tests", m.vacuous_tests},
               {"zero_functions", m.zero_functions}}}};
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write report " + path.string());
    out << doc.dump(2) << "\n";
}

TranslationReport parse_report(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read report " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ParseError("report " + path.string() + ": " + e.what());
    }
    TranslationReport r;
    r.schema_version = doc.value("schema_version", 1);
    r.baseline_counts = counts_from_json(doc.at("baseline").at("counts"));
    r.baseline_linter = opt_from_json<std::int64_t>(doc.at("baseline"), "linter_warnings");
    for (const auto& [id, f] : doc.at("per_function").items()) {
        FunctionReport fr;
        fr.refined = f.value("refined", false);
        fr.safety = f.value("safety", 0.0);
        fr.compile_errors = opt_from_json<int>(f, "compile_errors");
        fr.queries = f.value("queries", std::int64_t{0});
        fr.tokens = f.value("tokens", std::int64_t{0});
        r.per_function[id] = fr;
    }
    const auto& m = doc.at("project");
    r.project.sr = m.value("sr", 0.0);
    r.project.fcr = opt_from_json<double>(m, "fcr");
    r.project.frr = opt_from_json<double>(m, "frr");
    r.project.tpr = opt_from_json<double>(m, "tpr");
    r.project.pcr = opt_from_json<double>(m, "pcr");
    r.project.ppr = opt_from_json<double>(m, "ppr");
    r.project.linter_warnings = opt_from_json<std::int64_t>(m, "linter_warnings");
    r.project.idiomaticity = opt_from_json<double>(m, "idiomaticity");
    r.project.avg_queries = opt_from_json<double>(m, "avg_queries");
    r.project.avg_tokens = opt_from_json<double>(m, "avg_tokens");
    r.project.wall_time_s = m.value("wall_time_s", 0.0);
    r.project.vacuous_tests = m.value("vacuous_tests", false);
    r.project.zero_functions = m.value("zero_functions", false);
    return r;
}

ModelPool build_pool(const RunConfig& config, const std::optional<fs::path>& mock_scripts) {
    if (config.models.empty()) throw ConfigError("config declares no models");
    json scripts;
    if (mock_scripts) {
        std::ifstream in(*mock_scripts);
        if (!in) throw ConfigError("cannot read mock scripts " + mock_scripts->string());
        try {
            in >> scripts;
        } catch (const std::exception& e) {
            throw ConfigError("mock scripts: " + std::string(e.what()));
        }
    }
    std::shared_ptr<Transcript> replay;
    ModelPool pool;
    for (const auto& mc : config.models) {
        if (mc.kind == "mock") {
            auto mock = std::make_shared<MockProvider>();
            if (scripts.contains("models") && scripts.at("models").contains(mc.id)) {
                const auto& entry = scripts.at("models").at(mc.id);
                if (entry.contains("responses")) {
                    for (const auto& r : entry.at("responses")) mock->push_response(r.get<std::string>());
                }
                if (entry.contains("rules")) {
                    for (const auto& r : entry.at("rules")) {
                        MockProvider::Rule rule;
                        rule.contains = r.value("contains", "");
                        if (r.contains("with_feedback")) rule.with_feedback = r.at("with_feedback").get<bool>();
                        rule.response = r.at("response").get<std::string>();
                        mock->add_rule(std::move(rule));
                    }
                }
                if (entry.contains("default")) mock->set_default_response(entry.at("default").get<std::string>());
                if (entry.contains("by_digest")) {
                    for (const auto& [key, value] : entry.at("by_digest").items()) {
                        auto sep = key.rfind(':');
                        std::string digest = sep == std::string::npos ? key : key.substr(0, sep);
                        std::uint64_t seed =
                            sep == std::string::npos ? 0 : std::stoull(key.substr(sep + 1));
                        mock->script(digest, seed, value.get<std::string>());
                    }
                }
            }
            pool.add(mc.id, std::move(mock));
        } else if (mc.kind == "replay") {
            if (!replay) {
                if (!config.transcript_path) {
                    throw ConfigError("replay model requires a transcript path");
                }
                replay = std::make_shared<Transcript>(load_transcript(*config.transcript_path));
            }
            pool.add(mc.id, std::make_shared<TranscriptReplayProvider>(replay, mc.id));
        } else if (mc.kind == "http") {
            HttpProviderConfig hc;
            hc.endpoint = mc.endpoint;
            hc.path = mc.path;
            hc.model = mc.model_name.empty() ? mc.id : mc.model_name;
            hc.api_key_env = mc.api_key_env;
            hc.temperature = mc.temperature;
            pool.add(mc.id, std::make_shared<HttpProvider>(hc));
        } else {
            throw ConfigError("unknown provider kind: " + mc.kind);
        }
    }
    return pool;
}

TranslationReport run_translation(const RunConfig& config, ModelPool& pool, Validator& validator,
                                  TranscriptLog* transcript) {
    const auto t0 = std::chrono::steady_clock::now();

    ProjectSnapshot project = load_project(config.project_dir);
    std::vector<TestCase> suite;
    if (config.tests_file) suite = load_test_suite(*config.tests_file);

    TranslationReport report;

    if (!project.function_index.empty()) {
        auto outcome = validator.compile(project);
        if (!outcome.success) {
            std::string detail = outcome.errors.empty() ? "" : (": " + outcome.errors.front().message);
            throw Error("baseline project does not compile (" +
                        std::to_string(outcome.error_count()) + " errors)" + detail);
        }
    }

    SafetyBaseline baseline;
    baseline.counts0 = count_constructs(project);
    baseline.linter0 = validator.lint_warnings(project);
    report.baseline_counts = baseline.counts0;
    report.baseline_linter = baseline.linter0;

    if (transcript) transcript->write_header(config.to_json_text());

    std::vector<FunctionUnit> units;
    units.reserve(project.function_index.size());
    for (const auto& [id, u] : project.function_index) units.push_back(u);
    DependencyOrder order = order_by_dependency(units);

    ProjectSnapshot current = project;
    for (const auto& id : order.ordered_ids) {
        const FunctionUnit& unit = current.unit(id);

        CallObserver observer;
        if (transcript) {
            observer = [transcript](const CallRecord& rec) { transcript->append(rec); };
        }
        MctsEngine engine(pool, validator, baseline, config.search, observer);
        SearchResult result = engine.search(unit, current, suite);

        FunctionReport fr;
        fr.queries = result.usage.queries;
        fr.tokens = result.usage.tokens;
        fr.compile_errors = best_error_count(*result.root);
        if (result.found_success) {
            fr.refined = true;
            fr.safety = result.best->safety.value_or(0.0);
            current = *result.best->program;
        } else {
            fr.refined = false;
            fr.safety = result.root->safety.value_or(0.0);
        }
        report.per_function[id] = fr;

        if (config.tree_dump_dir) {
            fs::create_directories(*config.tree_dump_dir);
            std::string safe_name = id;
            for (auto& c : safe_name) {
                if (c == '/' || c == '\\' || c == ':') c = '_';
            }
            std::ofstream dump(*config.tree_dump_dir / (safe_name + ".json"), std::ios::trunc);
            dump << dump_tree_json(*result.root) << "\n";
        }
    }

    // zero-function projects skip the final build/suite: their rates are
    // flagged vacuous, never fabricated
    bool final_compiles = true;
    std::optional<std::vector<TestOutcome>> final_tests;
    std::optional<std::int64_t> final_linter;
    if (!current.function_index.empty()) {
        final_compiles = validator.compile(current).success;
        if (final_compiles && !suite.empty()) final_tests = validator.run_tests(current, suite);
        final_linter = validator.lint_warnings(current);
    }

    report.project = compute_metrics(report.per_function, current, baseline, final_compiles,
                                     final_tests, final_linter);
    report.project.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_project(current, config.output_dir);
    emit_report(report, config.report_path);
    return report;
}

}  // namespace refinery
