#pragma once

// In-process test doubles: a validator scripted by candidate tags embedded in
// program text, and a provider that serves a candidate universe by tree
// position. Both are deterministic, so whole searches replay bit-identically.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "refinery/mcts.hpp"
#include "refinery/providers.hpp"
#include "refinery/safety.hpp"
#include "refinery/validation.hpp"

namespace refinery::testing {

struct ScriptedOutcome {
    int compile_errors = 0;
    bool tests_pass = true;
};

/// Looks for a "CAND:<tag>" marker in the program text and serves the
/// scripted outcome for that tag; a program without a marker (the fixture
/// baseline) compiles cleanly and passes.
class ScriptedValidator : public Validator {
public:
    std::map<std::string, ScriptedOutcome> outcomes;

    static std::string find_tag(const ProjectSnapshot& program) {
        for (const auto& [path, text] : program.files) {
            auto pos = text.find("CAND:");
            if (pos == std::string::npos) continue;
            auto end = pos + 5;
            while (end < text.size() && text[end] != '\n' && text[end] != ' ' && text[end] != '"') ++end;
            return text.substr(pos + 5, end - pos - 5);
        }
        return {};
    }

    CompileOutcome compile(const ProjectSnapshot& program) override {
        CompileOutcome out;
        auto tag = find_tag(program);
        int errors = 0;
        if (!tag.empty()) {
            auto it = outcomes.find(tag);
            errors = it == outcomes.end() ? 1 : it->second.compile_errors;
        }
        for (int i = 0; i < errors; ++i) {
            out.errors.push_back({"E0001", "scripted error " + std::to_string(i) + " for " + tag,
                                  "main.rs", i + 1});
        }
        out.success = errors == 0;
        return out;
    }

    std::vector<TestOutcome> run_tests(const ProjectSnapshot& program,
                                       const std::vector<TestCase>& suite) override {
        auto tag = find_tag(program);
        bool pass = true;
        if (!tag.empty()) {
            auto it = outcomes.find(tag);
            pass = it != outcomes.end() && it->second.tests_pass;
        }
        std::vector<TestOutcome> result;
        for (const auto& t : suite) {
            TestOutcome o;
            o.test_id = t.id;
            o.expected_stdout = t.expected_stdout;
            o.expected_exit = t.expected_exit;
            o.observed_stdout = pass ? t.expected_stdout : t.expected_stdout + "#divergence";
            o.observed_exit = t.expected_exit;
            o.passed = pass;
            result.push_back(std::move(o));
        }
        return result;
    }

    std::optional<std::int64_t> lint_warnings(const ProjectSnapshot&) override { return std::nullopt; }
};

/// One candidate of a scripted universe: its validation outcome plus the
/// number of unsafe constructs its body carries (drives the real counter).
struct UniverseCandidate {
    int compile_errors = 0;
    bool tests_pass = true;
    int constructs = 0;  // raw-pointer declarations emitted into the body
};

/// A full enumeration of candidate outcomes by tree position. Gen slots are
/// "g<i>"; fix children of tag T are "T.f<j>". Safety of a candidate is
/// (T0 - constructs)/T0 against a baseline whose target function carries
/// all T0 constructs.
struct Universe {
    int gen_slots = 0;
    int fix_slots = 0;
    int depth = 3;  // candidate depth limit == search max_depth
    std::map<std::string, UniverseCandidate> candidates;

    static std::string body_for(const std::string& name, const std::string& tag, int constructs) {
        std::ostringstream out;
        out << "fn " << name << "() {\n    // CAND:" << tag << "\n";
        for (int i = 0; i < constructs; ++i) {
            out << "    let _p" << i << ": *mut u8 = core::ptr::null_mut();\n";
        }
        out << "}";
        return out.str();
    }

    bool passes(const std::string& tag) const {
        auto it = candidates.find(tag);
        return it != candidates.end() && it->second.compile_errors == 0 && it->second.tests_pass;
    }

    /// A candidate is reachable when its whole ancestor chain consists of
    /// failing candidates: a passing node gets a Success child and never
    /// spawns Fix children, so its subtree is out of reach by construction.
    bool reachable(const std::string& tag) const {
        auto dot = tag.rfind('.');
        if (dot == std::string::npos) return true;  // Gen slots are always offered
        std::string parent = tag.substr(0, dot);
        return reachable(parent) && !passes(parent);
    }

    static int depth_of(const std::string& tag) {
        int d = 1;
        for (char c : tag) {
            if (c == '.') ++d;
        }
        return d;
    }

    /// Exhaustive enumeration: best safety over reachable, fully passing
    /// candidates whose Success child fits inside the depth budget.
    double best_attainable(int total0) const {
        double best = -1.0;
        for (const auto& [tag, cand] : candidates) {
            if (depth_of(tag) + 1 > depth) continue;  // Success child would exceed D
            if (cand.compile_errors != 0 || !cand.tests_pass) continue;
            if (!reachable(tag)) continue;
            double s = std::max(1.0 - static_cast<double>(cand.constructs) / total0, 0.0);
            if (s > best) best = s;
        }
        return best;
    }
};

/// Serves universe candidates by position: Gen calls (no assistant message)
/// take the next unserved gen slot in materialization order; Fix calls parse
/// the parent tag from the last assistant message and take its next slot.
/// Shared state across the pool's providers keeps slot assignment global.
class UniverseProvider : public Provider {
public:
    struct Shared {
        const Universe* universe = nullptr;
        std::string function_name;
        int next_gen = 0;
        std::map<std::string, int> next_fix;
    };

    explicit UniverseProvider(std::shared_ptr<Shared> shared) : shared_(std::move(shared)) {}

    GenerateResult generate(const Conversation& conversation, std::uint64_t) override {
        std::string parent_tag;
        for (const auto& m : conversation.messages) {
            if (m.role != Role::Assistant) continue;
            auto pos = m.content.find("CAND:");
            if (pos == std::string::npos) continue;
            auto end = pos + 5;
            while (end < m.content.size() && m.content[end] != '\n' && m.content[end] != ' ') ++end;
            parent_tag = m.content.substr(pos + 5, end - pos - 5);
        }
        std::string tag;
        if (parent_tag.empty()) {
            tag = "g" + std::to_string(shared_->next_gen++ % std::max(shared_->universe->gen_slots, 1));
        } else {
            int slot = shared_->next_fix[parent_tag]++ % std::max(shared_->universe->fix_slots, 1);
            tag = parent_tag + ".f" + std::to_string(slot);
        }
        auto it = shared_->universe->candidates.find(tag);
        int constructs = it == shared_->universe->candidates.end() ? 0 : it->second.constructs;
        GenerateResult r;
        r.text = "<FUNC>\n" + Universe::body_for(shared_->function_name, tag, constructs) + "\n</FUNC>";
        r.usage = {1, MockProvider::count_tokens(r.text)};
        return r;
    }

private:
    std::shared_ptr<Shared> shared_;
};

/// Validator view over a universe: outcome of a tagged candidate program.
class UniverseValidator : public ScriptedValidator {
public:
    explicit UniverseValidator(const Universe& u) {
        for (const auto& [tag, cand] : u.candidates) {
            outcomes[tag] = {cand.compile_errors, cand.tests_pass};
        }
    }
};

/// Best attainable safety present under EVERY Gen child's subtree.
inline bool optimum_under_every_gen(const Universe& u, double oracle, int total0) {
    for (int g = 0; g < u.gen_slots; ++g) {
        std::string gt = "g" + std::to_string(g);
        bool found = false;
        for (const auto& [tag, cand] : u.candidates) {
            if (tag != gt && tag.rfind(gt + ".", 0) != 0) continue;
            if (Universe::depth_of(tag) + 1 > u.depth) continue;
            if (cand.compile_errors != 0 || !cand.tests_pass) continue;
            if (!u.reachable(tag)) continue;
            double s = std::max(1.0 - static_cast<double>(cand.constructs) / total0, 0.0);
            if (std::abs(s - oracle) < 1e-12) {
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

/// A baseline project whose single target function carries total0 constructs.
inline ProjectSnapshot universe_baseline_project(const std::string& name, int total0) {
    std::ostringstream src;
    src << "fn " << name << "() {\n";
    for (int i = 0; i < total0; ++i) {
        src << "    let _p" << i << ": *mut u8 = core::ptr::null_mut();\n";
    }
    src << "}\n\nfn main() {\n    " << name << "();\n}\n";
    ProjectSnapshot p;
    p.files["main.rs"] = src.str();
    p.baseline_marker = true;
    for (auto& u : index_functions(p)) {
        auto id = u.id;
        p.function_index.emplace(std::move(id), std::move(u));
    }
    return p;
}

/// Ready-to-search bundle around one universe: baseline project, scripted
/// validator, position-aware providers and a matching engine config.
struct UniverseSearch {
    Universe universe;
    ProjectSnapshot project;
    UniverseValidator validator;
    ModelPool pool;
    SafetyBaseline baseline;
    SearchConfig config;
    FunctionUnit unit;
    std::vector<TestCase> suite;
    static constexpr int kTotal0 = 10;

    explicit UniverseSearch(Universe u, int models = 2, std::uint64_t seed = 0)
        : universe(std::move(u)), project(universe_baseline_project("target", kTotal0)),
          validator(universe) {
        auto shared = std::make_shared<UniverseProvider::Shared>();
        shared->universe = &universe;
        shared->function_name = "target";
        for (int m = 0; m < models; ++m) {
            pool.add("model" + std::to_string(m), std::make_shared<UniverseProvider>(shared));
        }
        baseline.counts0 = count_constructs(project);
        config.num_rollouts = 10;
        config.uct_c = 1.5;
        config.max_depth = universe.depth;
        config.gen_children = universe.gen_slots;
        config.fix_children = universe.fix_slots;
        config.reward_weight = 2.0;
        config.seed = seed;
        unit = project.unit("target");
        suite = {{"t1", {}, "", "", 0}};
    }

    SearchResult run() {
        MctsEngine engine(pool, validator, baseline, config);
        return engine.search(unit, project, suite);
    }
};

/// Random small universe for the oracle-equivalence check: 2-3 actions,
/// candidate depth 3, mixed compile/test outcomes.
inline Universe random_universe(std::mt19937_64& rng) {
    Universe u;
    u.gen_slots = 2 + static_cast<int>(rng() % 2);
    u.fix_slots = 2 + static_cast<int>(rng() % 2);
    u.depth = 3;
    auto coin = [&](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };
    auto constructs = [&] { return static_cast<int>(rng() % (UniverseSearch::kTotal0 + 1)); };

    for (int g = 0; g < u.gen_slots; ++g) {
        std::string gt = "g" + std::to_string(g);
        bool compiles = coin(0.6);
        u.candidates[gt] = {compiles ? 0 : 1 + static_cast<int>(rng() % 3),
                            compiles ? coin(0.6) : true, constructs()};
        for (int f = 0; f < u.fix_slots; ++f) {
            std::string ft = gt + ".f" + std::to_string(f);
            bool fc = coin(0.7);
            u.candidates[ft] = {fc ? 0 : 1 + static_cast<int>(rng() % 3), fc ? coin(0.7) : true,
                                constructs()};
            for (int f2 = 0; f2 < u.fix_slots; ++f2) {
                // depth-3 candidates exist but cannot yield Success children
                std::string ft2 = ft + ".f" + std::to_string(f2);
                bool fc2 = coin(0.7);
                u.candidates[ft2] = {fc2 ? 0 : 1, fc2 ? coin(0.7) : true, constructs()};
            }
        }
    }
    return u;
}

}  // namespace refinery::testing
