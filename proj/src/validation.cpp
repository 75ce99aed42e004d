#include "refinery/validation.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "refinery/process.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace refinery {

double compile_score(const CompileOutcome& outcome) {
    return 1.0 / (static_cast<double>(outcome.error_count()) + 1.0);
}

bool is_equivalent(const std::vector<TestOutcome>& outcomes) {
    return std::all_of(outcomes.begin(), outcomes.end(),
                       [](const TestOutcome& o) { return o.passed; });
}

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Text or file-reference field; file paths are relative to the suite document.
std::string text_or_file(const json& rec, const std::string& key, const fs::path& base) {
    if (rec.contains(key)) return rec.at(key).get<std::string>();
    if (rec.contains(key + "_file")) {
        return read_file(base / rec.at(key + "_file").get<std::string>());
    }
    return {};
}

// One diagnostic of severity "error" counts once; summary lines
// ("aborting due to ...") and attached notes do not.
bool is_countable_error(const json& diag) {
    if (diag.value("level", "") != "error") return false;
    auto msg = diag.value("message", "");
    return msg.rfind("aborting due to", 0) != 0;
}

bool is_countable_warning(const json& diag) {
    if (diag.value("level", "") != "warning") return false;
    auto msg = diag.value("message", "");
    // "N warnings emitted" summary
    if (!msg.empty() && msg.find("warning") != std::string::npos && msg.find("emitted") != std::string::npos) {
        return false;
    }
    return true;
}

CompileError to_compile_error(const json& diag) {
    CompileError e;
    if (diag.contains("code") && diag.at("code").is_object()) {
        e.code = diag.at("code").value("code", "");
    }
    e.message = diag.value("message", "");
    if (diag.contains("spans") && diag.at("spans").is_array() && !diag.at("spans").empty()) {
        const auto& s = diag.at("spans").at(0);
        e.file = s.value("file_name", "");
        e.line = s.value("line_start", 0);
    }
    return e;
}

// Pulls rustc-style JSON diagnostics out of process output. Handles both
// plain rustc (one JSON object per stderr line) and cargo --message-format=
// json (stdout records with a nested "message").
void parse_diagnostics(const std::string& out, const std::string& err,
                       std::vector<CompileError>& errors, std::int64_t* warning_count) {
    auto consume = [&](const std::string& text) {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty() || line[0] != '{') continue;
            json rec = json::parse(line, nullptr, false);
            if (rec.is_discarded()) continue;
            const json* diag = &rec;
            if (rec.contains("reason")) {
                if (rec.value("reason", "") != "compiler-message") continue;
                diag = &rec.at("message");
            }
            if (is_countable_error(*diag)) errors.push_back(to_compile_error(*diag));
            if (warning_count && is_countable_warning(*diag)) ++*warning_count;
        }
    };
    consume(err);
    consume(out);
}

std::string substitute_placeholders(const std::string& arg, const fs::path& workdir,
                                    const fs::path& bin, const fs::path& root) {
    std::string s = arg;
    auto replace_all = [&s](const std::string& from, const std::string& to) {
        std::size_t pos = 0;
        while ((pos = s.find(from, pos)) != std::string::npos) {
            s.replace(pos, from.size(), to);
            pos += to.size();
        }
    };
    replace_all("{workdir}", workdir.string());
    replace_all("{bin}", bin.string());
    replace_all("{root}", root.string());
    return s;
}

struct BuildPlan {
    std::vector<std::string> argv;
    fs::path bin;  // where the produced binary lands
    fs::path root; // crate root source file
    bool via_cargo = false;
};

BuildPlan plan_build(const ProjectSnapshot& program, const ToolConfig& config,
                     const fs::path& workdir) {
    BuildPlan plan;
    bool has_cargo = program.files.count("Cargo.toml") > 0;
    fs::path& root = plan.root;
    for (const auto& [path, text] : program.files) {
        if (path == "main.rs" || path == "src/main.rs") {
            root = workdir / path;
            break;
        }
    }
    if (root.empty()) {
        // fall back to the first .rs file
        for (const auto& [path, text] : program.files) {
            if (path.size() >= 3 && path.compare(path.size() - 3, 3, ".rs") == 0) {
                root = workdir / path;
                break;
            }
        }
    }
    if (has_cargo) {
        plan.via_cargo = true;
        plan.bin = workdir / "target" / "debug" / "app";  // resolved after build
        plan.argv = {"cargo", "build", "--message-format=json"};
    } else {
        plan.bin = workdir / "app.bin";
        plan.argv = {"rustc", "--edition=2021", "--error-format=json", "-o", plan.bin.string(),
                     root.string()};
    }
    if (!config.compile_cmd.empty()) {
        plan.argv.clear();
        for (const auto& a : config.compile_cmd) {
            plan.argv.push_back(substitute_placeholders(a, workdir, plan.bin, root));
        }
        plan.via_cargo = false;
    }
    if (root.empty() && config.compile_cmd.empty()) {
        throw EnvironmentError("nothing to build: project has no source files");
    }
    return plan;
}

fs::path find_cargo_binary(const std::string& cargo_out) {
    // cargo reports produced executables in compiler-artifact records
    std::istringstream lines(cargo_out);
    std::string line;
    fs::path found;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] != '{') continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || rec.value("reason", "") != "compiler-artifact") continue;
        if (rec.contains("executable") && rec.at("executable").is_string()) {
            found = rec.at("executable").get<std::string>();
        }
    }
    return found;
}

}  // namespace

std::vector<TestCase> load_test_suite(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read test suite " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ParseError("test suite " + path.string() + ": " + e.what());
    }
    std::vector<TestCase> suite;
    std::set<std::string> ids;
    for (const auto& rec : doc.at("tests")) {
        TestCase t;
        t.id = rec.at("id").get<std::string>();
        if (!ids.insert(t.id).second) {
            throw ParseError("test suite " + path.string() + ": duplicate id " + t.id);
        }
        if (rec.contains("args")) t.args = rec.at("args").get<std::vector<std::string>>();
        t.stdin_bytes = text_or_file(rec, "stdin", path.parent_path());
        t.expected_stdout = text_or_file(rec, "expected_stdout", path.parent_path());
        t.expected_exit = rec.value("expected_exit", 0);
        suite.push_back(std::move(t));
    }
    return suite;
}

std::string render_feedback(const ValidationResult& result, std::size_t max_items,
                            std::size_t max_bytes) {
    std::ostringstream out;
    std::size_t items = 0;
    if (!result.compile.success) {
        for (const auto& e : result.compile.errors) {
            if (items++ >= max_items) {
                out << "... (" << result.compile.errors.size() - max_items << " more errors omitted)\n";
                break;
            }
            out << "error";
            if (!e.code.empty()) out << "[" << e.code << "]";
            out << ": " << e.message;
            if (!e.file.empty()) out << " (" << e.file << ":" << e.line << ")";
            out << "\n";
        }
    } else if (result.tests) {
        for (const auto& t : *result.tests) {
            if (t.passed) continue;
            if (items++ >= max_items) {
                out << "... (more failing tests omitted)\n";
                break;
            }
            out << "test " << t.test_id << " failed:\n"
                << "  expected exit " << t.expected_exit << ", observed exit " << t.observed_exit << "\n"
                << "  expected stdout: " << t.expected_stdout << "\n"
                << "  observed stdout: " << t.observed_stdout << "\n";
        }
    }
    std::string text = out.str();
    if (text.size() > max_bytes) {
        text.resize(max_bytes);
        text += "\n... (truncated)";
    }
    return text;
}

ValidationResult Validator::validate(const ProjectSnapshot& program,
                                     const std::vector<TestCase>& suite) {
    ValidationResult result;
    result.compile = compile(program);
    if (result.compile.success && !suite.empty()) {
        result.tests = run_tests(program, suite);
    }
    result.feedback_text = render_feedback(result);
    return result;
}

ProcessValidator::ProcessValidator(ToolConfig config) : config_(std::move(config)) {}

CompileOutcome ProcessValidator::compile(const ProjectSnapshot& program) {
    TempDir dir("refinery-build");
    return compile_in(program, dir.path());
}

CompileOutcome ProcessValidator::compile_in(const ProjectSnapshot& program, const fs::path& workdir) {
    if (program.files.empty()) throw EnvironmentError("nothing to build: empty project");
    write_project(program, workdir);
    auto plan = plan_build(program, config_, workdir);

    auto res = run_process(plan.argv, workdir, {}, config_.compile_timeout_s);
    if (res.timed_out) {
        CompileOutcome out;
        out.success = false;
        out.errors.push_back({"", "compilation timed out", "", 0});
        return out;
    }

    CompileOutcome out;
    parse_diagnostics(res.out, res.err, out.errors, nullptr);
    // diagnostic paths are workdir-relative; the scratch location is random
    const std::string prefix = workdir.string() + "/";
    for (auto& e : out.errors) {
        if (e.file.rfind(prefix, 0) == 0) e.file.erase(0, prefix.size());
    }
    out.success = res.exit_code == 0 && out.errors.empty();
    if (!out.success && out.errors.empty()) {
        // tool failed without structured diagnostics (e.g. bad manifest)
        std::string tail = res.err.substr(res.err.size() > 400 ? res.err.size() - 400 : 0);
        out.errors.push_back({"", "compiler failed (exit " + std::to_string(res.exit_code) + "): " + tail,
                              "", 0});
    }
    if (out.success && plan.via_cargo) {
        auto bin = find_cargo_binary(res.out);
        if (!bin.empty()) {
            std::error_code ec;
            fs::copy_file(bin, workdir / "app.bin", fs::copy_options::overwrite_existing, ec);
        }
    }
    return out;
}

std::vector<TestOutcome> ProcessValidator::run_tests(const ProjectSnapshot& program,
                                                     const std::vector<TestCase>& suite) {
    TempDir dir("refinery-test");
    auto outcome = compile_in(program, dir.path());
    if (!outcome.success) {
        throw Error("run_tests: program does not compile");
    }
    return run_tests_in(program, suite, dir.path());
}

std::vector<TestOutcome> ProcessValidator::run_tests_in(const ProjectSnapshot&,
                                                        const std::vector<TestCase>& suite,
                                                        const fs::path& workdir) {
    fs::path bin = workdir / "app.bin";
    if (!fs::exists(bin)) {
        throw EnvironmentError("test binary missing after build: " + bin.string());
    }
    std::vector<TestOutcome> outcomes;
    outcomes.reserve(suite.size());
    for (const auto& t : suite) {
        std::vector<std::string> argv{bin.string()};
        argv.insert(argv.end(), t.args.begin(), t.args.end());
        auto res = run_process(argv, workdir, t.stdin_bytes, config_.test_timeout_s);
        TestOutcome o;
        o.test_id = t.id;
        o.observed_stdout = res.out;
        o.observed_exit = res.timed_out ? kTimeoutExit : res.exit_code;
        o.expected_stdout = t.expected_stdout;
        o.expected_exit = t.expected_exit;
        o.passed = !res.timed_out && o.observed_stdout == t.expected_stdout &&
                   o.observed_exit == t.expected_exit;
        outcomes.push_back(std::move(o));
    }
    return outcomes;
}

std::optional<std::int64_t> ProcessValidator::lint_warnings(const ProjectSnapshot& program) {
    if (!config_.lint && config_.lint_cmd.empty()) return std::nullopt;
    TempDir dir("refinery-lint");
    write_project(program, dir.path());

    std::vector<std::string> argv;
    if (!config_.lint_cmd.empty()) {
        auto plan = plan_build(program, config_, dir.path());
        for (const auto& a : config_.lint_cmd) {
            argv.push_back(substitute_placeholders(a, dir.path(), plan.bin, plan.root));
        }
    } else if (program.files.count("Cargo.toml") > 0) {
        argv = {"cargo", "clippy", "--message-format=json"};
    } else {
        fs::path root;
        for (const auto& [path, text] : program.files) {
            if (path == "main.rs" || path == "src/main.rs") root = dir.path() / path;
        }
        if (root.empty()) return std::nullopt;
        argv = {"clippy-driver", "--edition=2021", "--error-format=json", "--emit=metadata",
                root.string()};
    }
    auto res = run_process(argv, dir.path(), {}, config_.compile_timeout_s);
    std::vector<CompileError> ignored;
    std::int64_t warnings = 0;
    parse_diagnostics(res.out, res.err, ignored, &warnings);
    return warnings;
}

}  // namespace refinery
