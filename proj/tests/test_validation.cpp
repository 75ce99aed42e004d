#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "refinery/process.hpp"
#include "refinery/validation.hpp"

using namespace refinery;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = FIXTURE_DIR;

}  // namespace

TEST_CASE("compile score is exactly 1/(errors+1)") {
    CompileOutcome o;
    o.success = true;
    CHECK(compile_score(o) == 1.0);
    o.errors.resize(1);
    CHECK(compile_score(o) == 0.5);
    o.errors.resize(3);
    CHECK(compile_score(o) == 0.25);
    // strictly decreasing
    double prev = 2.0;
    for (int e = 0; e < 20; ++e) {
        CompileOutcome x;
        x.errors.resize(static_cast<std::size_t>(e));
        x.success = e == 0;
        double s = compile_score(x);
        CHECK(s < prev);
        CHECK(s > 0.0);
        CHECK(s <= 1.0);
        prev = s;
    }
}

TEST_CASE("is_equivalent quantifies over every outcome") {
    std::vector<TestOutcome> all_pass(3);
    for (auto& o : all_pass) o.passed = true;
    CHECK(is_equivalent(all_pass));
    all_pass[1].passed = false;
    CHECK_FALSE(is_equivalent(all_pass));
    CHECK(is_equivalent({}));  // vacuous truth over the empty suite
}

TEST_CASE("untouched transpiler output compiles") {
    ProcessValidator validator;
    auto project = load_project(kFixtures / "proj3");
    auto outcome = validator.compile(project);
    CHECK(outcome.success);
    CHECK(outcome.error_count() == 0);
}

TEST_CASE("a broken fixture yields one structured error") {
    ProcessValidator validator;
    auto project = load_project(kFixtures / "broken1");
    auto outcome = validator.compile(project);
    CHECK_FALSE(outcome.success);
    REQUIRE(outcome.error_count() == 1);
    CHECK(outcome.errors[0].code == "E0308");
    CHECK(outcome.errors[0].file == "main.rs");
    CHECK(outcome.errors[0].line > 0);
}

TEST_CASE("empty project is an environment error, not a compile failure") {
    ProcessValidator validator;
    ProjectSnapshot empty;
    CHECK_THROWS_AS(validator.compile(empty), EnvironmentError);
}

TEST_CASE("missing compiler binary is an environment error") {
    ToolConfig config;
    config.compile_cmd = {"refinery-no-such-compiler", "{root}"};
    ProcessValidator validator(config);
    auto project = load_project(kFixtures / "broken1");
    CHECK_THROWS_AS(validator.compile(project), EnvironmentError);
}

TEST_CASE("test execution compares bytes and exit status in order") {
    ProcessValidator validator;
    auto project = load_project(kFixtures / "echo");

    std::vector<TestCase> suite{
        {"match", {}, "hello\n", "hello\n", 0},
        {"match2", {}, "", "", 0},
        {"mismatch", {}, "x\n", "something else\n", 0},
    };
    auto outcomes = validator.run_tests(project, suite);
    REQUIRE(outcomes.size() == 3);
    CHECK(outcomes[0].test_id == "match");
    CHECK(outcomes[0].passed);
    CHECK(outcomes[1].passed);
    CHECK_FALSE(outcomes[2].passed);
    CHECK(outcomes[2].observed_stdout == "x\n");

    SUBCASE("expected exit mismatch fails the test") {
        std::vector<TestCase> exit_suite{{"wrong-exit", {}, "a", "a", 3}};
        auto r = validator.run_tests(project, exit_suite);
        REQUIRE(r.size() == 1);
        CHECK_FALSE(r[0].passed);
        CHECK(r[0].observed_exit == 0);
    }
    SUBCASE("deterministic across repeated runs") {
        auto again = validator.run_tests(project, suite);
        REQUIRE(again.size() == outcomes.size());
        for (std::size_t i = 0; i < again.size(); ++i) {
            CHECK(again[i].passed == outcomes[i].passed);
            CHECK(again[i].observed_stdout == outcomes[i].observed_stdout);
            CHECK(again[i].observed_exit == outcomes[i].observed_exit);
        }
    }
}

TEST_CASE("a hanging test times out as a failure with the sentinel exit") {
    ToolConfig config;
    config.test_timeout_s = 0.3;
    ProcessValidator validator(config);

    ProjectSnapshot spin;
    spin.files["main.rs"] = "fn main() { loop {} }\n";
    auto outcomes = validator.run_tests(spin, {{"hang", {}, "", "", 0}});
    REQUIRE(outcomes.size() == 1);
    CHECK_FALSE(outcomes[0].passed);
    CHECK(outcomes[0].observed_exit == kTimeoutExit);
}

TEST_CASE("validate gates tests on compile success") {
    ProcessValidator validator;
    std::vector<TestCase> suite{{"t", {}, "a", "a", 0}};

    auto ok = validator.validate(load_project(kFixtures / "echo"), suite);
    CHECK(ok.compile.success);
    REQUIRE(ok.tests.has_value());
    CHECK(ok.tests->size() == 1);
    CHECK(ok.feedback_text.empty());

    auto bad = validator.validate(load_project(kFixtures / "broken1"), suite);
    CHECK_FALSE(bad.compile.success);
    CHECK_FALSE(bad.tests.has_value());
    CHECK(bad.feedback_text.find("E0308") != std::string::npos);
}

TEST_CASE("suite files parse with literals, file refs and unique ids") {
    auto suite = load_test_suite(kFixtures / "suites/echo_suite.json");
    REQUIRE(suite.size() == 3);
    CHECK(suite[0].id == "roundtrip");
    CHECK(suite[0].stdin_bytes == "hello\n");
    CHECK(suite[0].expected_stdout == "hello\n");
    CHECK(suite[2].stdin_bytes == "a b\tc\n");

    auto dir = fs::temp_directory_path() / "refinery-suite-test";
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "input.bin", std::ios::binary);
        f << "payload";
    }
    {
        std::ofstream f(dir / "dup.json", std::ios::trunc);
        f << R"({"tests":[{"id":"a","stdin":"x"},{"id":"a","stdin":"y"}]})";
    }
    {
        std::ofstream f(dir / "refs.json", std::ios::trunc);
        f << R"({"tests":[{"id":"a","stdin_file":"input.bin","expected_stdout_file":"input.bin"}]})";
    }
    CHECK_THROWS_AS(load_test_suite(dir / "dup.json"), ParseError);
    auto refs = load_test_suite(dir / "refs.json");
    REQUIRE(refs.size() == 1);
    CHECK(refs[0].stdin_bytes == "payload");
    CHECK(refs[0].expected_stdout == "payload");
    fs::remove_all(dir);
}

TEST_CASE("cargo projects build and run through the manifest") {
    ProcessValidator validator;
    auto project = load_project(kFixtures / "cargo_proj");
    REQUIRE(project.function_index.count("double") == 1);

    TempDir dir("refinery-cargo-test");
    auto outcome = validator.compile_in(project, dir.path());
    REQUIRE(outcome.success);
    auto outcomes = validator.run_tests_in(project, {{"doubles", {}, "21\n", "42\n", 0}}, dir.path());
    REQUIRE(outcomes.size() == 1);
    CHECK(outcomes[0].passed);
}

TEST_CASE("the linter runs only when asked and counts warnings") {
    ProcessValidator off;
    CHECK_FALSE(off.lint_warnings(load_project(kFixtures / "proj3")).has_value());

    ToolConfig config;
    config.lint = true;
    ProcessValidator on(config);
    auto warnings = on.lint_warnings(load_project(kFixtures / "proj3"));
    REQUIRE(warnings.has_value());
    CHECK(*warnings > 0);  // the transpiled fixture is not idiomatic
}

TEST_CASE("feedback rendering is bounded") {
    ValidationResult result;
    result.compile.success = false;
    for (int i = 0; i < 60; ++i) {
        result.compile.errors.push_back(
            {"E9999", "synthetic diagnostic " + std::to_string(i), "main.rs", i});
    }
    auto text = render_feedback(result, 40, 8192);
    CHECK(text.find("synthetic diagnostic 0") != std::string::npos);
    CHECK(text.find("synthetic diagnostic 39") != std::string::npos);
    CHECK(text.find("synthetic diagnostic 40") == std::string::npos);
    CHECK(text.find("omitted") != std::string::npos);

    ValidationResult huge;
    huge.compile.success = false;
    huge.compile.errors.push_back({"E1", std::string(20000, 'x'), "main.rs", 1});
    CHECK(render_feedback(huge).size() <= 8192 + 32);
}
