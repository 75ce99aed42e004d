#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "refinery/code_model.hpp"

using namespace refinery;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = FIXTURE_DIR;

ProjectSnapshot in_memory(std::map<std::string, std::string> files) {
    ProjectSnapshot p;
    p.files = std::move(files);
    for (auto& u : index_functions(p)) {
        auto id = u.id;
        p.function_index.emplace(std::move(id), std::move(u));
    }
    return p;
}

FunctionUnit make_unit(std::string id, std::vector<std::string> callees) {
    FunctionUnit u;
    u.id = id;
    u.name = std::move(id);
    u.callees = std::move(callees);
    return u;
}

}  // namespace

TEST_CASE("three-function fixture indexes with correct names") {
    auto project = load_project(kFixtures / "proj3");
    REQUIRE(project.function_index.size() == 3);
    CHECK(project.function_index.count("accumulate") == 1);
    CHECK(project.function_index.count("checksum") == 1);
    CHECK(project.function_index.count("main") == 1);

    const auto& acc = project.unit("accumulate");
    CHECK(acc.name == "accumulate");
    CHECK(acc.file == "main.rs");
    // body equals the file content at span
    CHECK(acc.body == project.files.at("main.rs").substr(acc.span.begin, acc.span.size()));
    CHECK(acc.body.find("unsafe fn accumulate") == 0);
    CHECK(acc.body.back() == '}');
}

TEST_CASE("empty project indexes to nothing") {
    ProjectSnapshot p;
    CHECK(index_functions(p).empty());
}

TEST_CASE("single main function has no callees") {
    auto p = in_memory({{"main.rs", "fn main() {\n    println!(\"hi\");\n}\n"}});
    REQUIRE(p.function_index.size() == 1);
    const auto& u = p.unit("main");
    CHECK(u.name == "main");
    CHECK(u.callees.empty());
}

TEST_CASE("callees and call sites are closed over the indexed set") {
    auto project = load_project(kFixtures / "proj3");
    const auto& chk = project.unit("checksum");
    CHECK(chk.callees == std::vector<std::string>{"accumulate"});
    const auto& mn = project.unit("main");
    CHECK(mn.callees == std::vector<std::string>{"checksum"});

    const auto& acc = project.unit("accumulate");
    REQUIRE(acc.call_sites.size() == 1);
    CHECK(acc.call_sites[0].caller_id == "checksum");
    // the snippet occurs verbatim in the caller's body
    CHECK(chk.body.find(acc.call_sites[0].snippet) != std::string::npos);
    CHECK(acc.call_sites[0].snippet.find("accumulate(") != std::string::npos);
}

TEST_CASE("referenced globals and imports are attached to units") {
    auto project = load_project(kFixtures / "proj3");
    const auto& acc = project.unit("accumulate");
    REQUIRE(acc.globals.size() == 1);
    CHECK(acc.globals[0] == "static mut TOTAL: i64 = 0;");
    CHECK(acc.imports.empty());

    const auto& chk = project.unit("checksum");
    CHECK(chk.globals.empty());
}

TEST_CASE("indexing is deterministic across runs") {
    auto a = load_project(kFixtures / "proj3");
    auto b = load_project(kFixtures / "proj3");
    auto ua = index_functions(a);
    auto ub = index_functions(b);
    REQUIRE(ua.size() == ub.size());
    for (std::size_t i = 0; i < ua.size(); ++i) {
        CHECK(ua[i].id == ub[i].id);
        CHECK(ua[i].span.begin == ub[i].span.begin);
        CHECK(ua[i].span.end == ub[i].span.end);
    }
}

TEST_CASE("unbalanced braces raise a parse error naming the file") {
    ProjectSnapshot p;
    p.files["bad.rs"] = "fn broken() {\n    let x = 1;\n";
    CHECK_THROWS_AS(index_functions(p), ParseError);
    try {
        index_functions(p);
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("bad.rs") != std::string::npos);
    }
}

TEST_CASE("dependency order is bottom-up") {
    SUBCASE("chain: A calls B, B calls C") {
        std::vector<FunctionUnit> units{make_unit("A", {"B"}), make_unit("B", {"C"}),
                                        make_unit("C", {})};
        auto order = order_by_dependency(units);
        CHECK(order.ordered_ids == std::vector<std::string>{"C", "B", "A"});
    }
    SUBCASE("no edges: lexicographic") {
        std::vector<FunctionUnit> units{make_unit("Y", {}), make_unit("X", {})};
        auto order = order_by_dependency(units);
        CHECK(order.ordered_ids == std::vector<std::string>{"X", "Y"});
    }
    SUBCASE("cycle broken lexicographically") {
        std::vector<FunctionUnit> units{make_unit("A", {"B"}), make_unit("B", {"A"})};
        auto order = order_by_dependency(units);
        CHECK(order.ordered_ids == std::vector<std::string>{"A", "B"});
    }
    SUBCASE("permutation invariant") {
        std::vector<FunctionUnit> units{make_unit("m", {"h"}), make_unit("h", {"g"}),
                                        make_unit("g", {}), make_unit("z", {})};
        auto order = order_by_dependency(units);
        REQUIRE(order.ordered_ids.size() == 4);
        auto sorted = order.ordered_ids;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted == std::vector<std::string>{"g", "h", "m", "z"});
    }
    SUBCASE("pure function: identical input, identical output") {
        std::vector<FunctionUnit> units{make_unit("a", {"b"}), make_unit("b", {})};
        CHECK(order_by_dependency(units).ordered_ids == order_by_dependency(units).ordered_ids);
    }
}

TEST_CASE("substitution rewrites exactly one span") {
    auto project = load_project(kFixtures / "proj3");
    const auto original = project.unit("checksum").body;
    const auto acc_body = project.unit("accumulate").body;
    const auto main_body = project.unit("main").body;

    std::string replacement = "unsafe fn checksum(data: &[u8]) -> i64 {\n    0\n}";
    auto next = substitute(project, "checksum", replacement);

    CHECK(next.unit("checksum").body == replacement);
    CHECK(next.unit("accumulate").body == acc_body);
    CHECK(next.unit("main").body == main_body);
    CHECK_FALSE(next.baseline_marker);
    // spans still resolve
    for (const auto& [id, u] : next.function_index) {
        CHECK(u.body == next.files.at(u.file).substr(u.span.begin, u.span.size()));
    }

    SUBCASE("round-trip back to the original is byte-identical") {
        auto back = substitute(next, "checksum", original);
        CHECK(back.files == project.files);
    }
    SUBCASE("same-length body keeps the file length") {
        auto padded = substitute(project, "checksum", original);
        CHECK(padded.files.at("main.rs").size() == project.files.at("main.rs").size());
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(substitute(project, "nope", "fn x() {}"), Error);
        CHECK_THROWS_AS(substitute(project, "checksum", ""), Error);
    }
}

TEST_CASE("multi-file projects index and substitute across files") {
    auto p = in_memory({{"a.rs", "fn alpha() -> i32 {\n    beta() + 1\n}\n"},
                        {"b.rs", "fn beta() -> i32 {\n    41\n}\n"}});
    REQUIRE(p.function_index.size() == 2);
    CHECK(p.unit("alpha").callees == std::vector<std::string>{"beta"});
    CHECK(p.unit("alpha").file == "a.rs");
    CHECK(p.unit("beta").file == "b.rs");
    REQUIRE(p.unit("beta").call_sites.size() == 1);
    CHECK(p.unit("beta").call_sites[0].caller_id == "alpha");

    auto next = substitute(p, "beta", "fn beta() -> i32 {\n    40 + 1\n}");
    CHECK(next.files.at("a.rs") == p.files.at("a.rs"));  // other file untouched
    CHECK(next.unit("alpha").body == p.unit("alpha").body);
    CHECK(next.unit("beta").body.find("40 + 1") != std::string::npos);

    auto order = order_by_dependency(index_functions(p));
    CHECK(order.ordered_ids == std::vector<std::string>{"beta", "alpha"});
}

TEST_CASE("functions.json sidecar pre-declares the index") {
    auto dir = fs::temp_directory_path() / "refinery-sidecar-test";
    fs::create_directories(dir);
    std::string src = "fn alpha() { beta(); }\nfn beta() {}\n";
    {
        std::ofstream f(dir / "lib.rs", std::ios::trunc);
        f << src;
    }
    {
        std::ofstream f(dir / "functions.json", std::ios::trunc);
        f << R"({"functions":[
            {"id":"alpha","file":"lib.rs","begin":0,"end":22,"callees":["beta"]},
            {"id":"beta","file":"lib.rs","begin":23,"end":35}
        ]})";
    }
    auto project = load_project(dir);
    REQUIRE(project.function_index.size() == 2);
    CHECK(project.unit("alpha").body == "fn alpha() { beta(); }");
    CHECK(project.unit("beta").body == "fn beta() {}");
    CHECK(project.unit("alpha").callees == std::vector<std::string>{"beta"});
    fs::remove_all(dir);
}
