#include "refinery/refiner.hpp"

#include <chrono>
#include <sstream>
#include <thread>

namespace refinery {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv(std::uint64_t& h, std::string_view s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
}

const char* role_tag(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "?";
}

// Main prompt template. The four placeholders are substituted per unit;
// empty context sections render an explicit "none" marker.
constexpr std::string_view kMainPrompt =
    "You are given a Rust function that was produced by an automatic C-to-Rust\n"
    "transpiler. It compiles, but it relies on unsafe, C-style constructs such as\n"
    "raw pointers, unsafe blocks, and unsafe casts. Rewrite this Rust function as\n"
    "safe, idiomatic Rust. Preserve the function's name and its observable\n"
    "behavior exactly; callers shown below must keep working. Remove raw pointer\n"
    "declarations and dereferences, unsafe blocks, unsafe calls, and unsafe type\n"
    "casts wherever possible.\n"
    "\n"
    "Unsafe Rust function to rewrite:\n"
    "{unsafe_rust}\n"
    "\n"
    "Call sites invoking this function:\n"
    "{call_sites}\n"
    "\n"
    "Global variables it references:\n"
    "{global}\n"
    "\n"
    "Imports in scope:\n"
    "{import}\n"
    "\n"
    "Respond with the complete rewritten function enclosed between <FUNC> and\n"
    "</FUNC> delimiters, with no other code outside them.";

std::string join_or_none(const std::vector<std::string>& items) {
    if (items.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += "\n";
        out += items[i];
    }
    return out;
}

void replace_placeholder(std::string& text, std::string_view key, const std::string& value) {
    auto pos = text.find(key);
    if (pos == std::string::npos) throw Error("build_prompt: template lost placeholder");
    text.replace(pos, key.size(), value);
}

}  // namespace

std::string Conversation::digest() const {
    std::uint64_t h = kFnvOffset;
    for (const auto& m : messages) {
        fnv(h, role_tag(m.role));
        fnv(h, "\x1f");
        fnv(h, m.content);
        fnv(h, "\x1e");
    }
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string build_prompt(const FunctionUnit& unit) {
    std::string text(kMainPrompt);
    std::vector<std::string> call_lines;
    call_lines.reserve(unit.call_sites.size());
    for (const auto& cs : unit.call_sites) call_lines.push_back(cs.snippet);

    replace_placeholder(text, "{unsafe_rust}", unit.body);
    replace_placeholder(text, "{call_sites}", join_or_none(call_lines));
    replace_placeholder(text, "{global}", join_or_none(unit.globals));
    replace_placeholder(text, "{import}", join_or_none(unit.imports));

    for (std::string_view key : {"{unsafe_rust}", "{call_sites}", "{global}", "{import}"}) {
        auto pos = text.find(key);
        // a placeholder may legitimately reappear via the unit's own source;
        // only the template's section slots must be gone, which substitution
        // above guarantees — this guards against template edits breaking it
        if (pos != std::string::npos && unit.body.find(key) == std::string::npos) {
            throw Error("build_prompt: unresolved placeholder " + std::string(key));
        }
    }
    return text;
}

std::string make_feedback_message(const ValidationResult& result) {
    bool compile_failed = !result.compile.success;
    bool tests_failed = result.tests && !is_equivalent(*result.tests);
    if (!compile_failed && !tests_failed) {
        throw Error("make_feedback_message: validation passed, nothing to repair");
    }
    std::ostringstream out;
    if (compile_failed) {
        out << "The rewritten function does not compile in the full program. Fix the\n"
               "compile errors below and respond with the complete corrected function\n"
               "between <FUNC> and </FUNC>.\n\n"
            << "Compile errors:\n"
            << result.feedback_text;
    } else {
        out << "The rewritten function compiles, but the program's behavior now differs\n"
               "from the original on the test suite. Fix the behavioral differences and\n"
               "respond with the complete corrected function between <FUNC> and </FUNC>.\n\n"
            << "Failing tests:\n"
            << result.feedback_text;
    }
    return out.str();
}

std::string postprocess(const std::string& response) {
    auto open = response.find("<FUNC>");
    if (open == std::string::npos) {
        throw ExtractionError("no <FUNC> delimiter in response");
    }
    std::size_t body_begin = open + 6;
    auto close = response.find("</FUNC>", body_begin);
    auto close_alt = response.find("<\\FUNC>", body_begin);
    if (close == std::string::npos || (close_alt != std::string::npos && close_alt < close)) {
        close = close_alt;
    }
    if (close == std::string::npos) {
        throw ExtractionError("no closing FUNC delimiter in response");
    }
    std::string body = response.substr(body_begin, close - body_begin);

    // trim whole blank lines at both ends; interior indentation is kept
    auto trim_blank_lines = [](std::string& s) {
        auto first = s.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) {
            s.clear();
            return;
        }
        auto lead_nl = s.rfind('\n', first);
        if (lead_nl != std::string::npos) s.erase(0, lead_nl + 1);
        auto last = s.find_last_not_of(" \t\r\n");
        auto trail_nl = s.find('\n', last);
        if (trail_nl != std::string::npos) s.erase(trail_nl);
    };
    trim_blank_lines(body);
    if (body.rfind("```", 0) == 0) {
        auto nl = body.find('\n');
        body = nl == std::string::npos ? std::string() : body.substr(nl + 1);
        auto fence = body.rfind("```");
        if (fence != std::string::npos) body = body.substr(0, fence);
        trim_blank_lines(body);
    }
    return body;
}

Conversation conversation_for(const FunctionUnit& unit) {
    Conversation c;
    c.messages.push_back({Role::User, build_prompt(unit)});
    return c;
}

void ModelPool::add(std::string model_id, std::shared_ptr<Provider> provider) {
    if (providers_.count(model_id)) throw Error("duplicate model id: " + model_id);
    ids_.push_back(model_id);
    providers_.emplace(std::move(model_id), std::move(provider));
}

Provider& ModelPool::provider(const std::string& model_id) const {
    auto it = providers_.find(model_id);
    if (it == providers_.end()) throw Error("unknown model id: " + model_id);
    return *it->second;
}

GenerateResult ModelPool::generate(const std::string& model_id, const Conversation& conversation,
                                   std::uint64_t seed) {
    Provider& p = provider(model_id);
    usage_.queries += 1;
    for (int attempt = 0;; ++attempt) {
        try {
            auto result = p.generate(conversation, seed);
            result.usage.queries = 1;
            usage_.tokens += result.usage.tokens;
            return result;
        } catch (const TransportError&) {
            if (attempt >= retries_) throw;
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms_ * (attempt + 1)));
        }
    }
}

}  // namespace refinery
