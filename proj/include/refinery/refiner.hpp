#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "refinery/code_model.hpp"
#include "refinery/validation.hpp"

namespace refinery {

/// Response could not be turned into a candidate body (missing delimiters).
struct ExtractionError : Error {
    using Error::Error;
};

/// Provider could not be reached; retried a bounded number of times.
struct TransportError : Error {
    using Error::Error;
};

enum class Role { System, User, Assistant };

struct Message {
    Role role;
    std::string content;
};

/// Append-only message history; children extend their parent's by copy.
struct Conversation {
    std::vector<Message> messages;

    Conversation extended(Message m) const {
        Conversation c = *this;
        c.messages.push_back(std::move(m));
        return c;
    }
    /// FNV-1a digest over roles and contents; keys the mock provider.
    std::string digest() const;
};

enum class ActionKind { WithFeedback, NoFeedback };

struct RefinementAction {
    ActionKind kind = ActionKind::NoFeedback;
    std::string model_id;
};

struct UsageRecord {
    std::int64_t queries = 0;
    std::int64_t tokens = 0;  // prompt + completion

    UsageRecord& operator+=(const UsageRecord& o) {
        queries += o.queries;
        tokens += o.tokens;
        return *this;
    }
};

struct GenerateResult {
    std::string text;
    UsageRecord usage;  // this call's delta (queries = 1)
};

/// One model endpoint. generate must be safe to call concurrently and, for
/// the deterministic providers, a pure function of (conversation, seed).
class Provider {
public:
    virtual ~Provider() = default;
    virtual GenerateResult generate(const Conversation& conversation, std::uint64_t seed) = 0;
};

/// Observer for every generate call; feeds the transcript log.
struct CallRecord {
    std::int64_t node_id = 0;
    std::string function_id;
    std::string model_id;
    std::uint64_t seed = 0;
    Conversation conversation;
    std::string response;
    UsageRecord usage;
    bool failed = false;
};
using CallObserver = std::function<void(const CallRecord&)>;

/// Heterogeneous model pool; ids keep their configuration order.
class ModelPool {
public:
    void add(std::string model_id, std::shared_ptr<Provider> provider);
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    Provider& provider(const std::string& model_id) const;

    /// Accumulated usage over the pool's lifetime; monotone non-decreasing.
    const UsageRecord& usage() const { return usage_; }

    /// Calls the provider with bounded retries on transport failure; a call
    /// that still fails throws TransportError after recording the attempt.
    /// Every call, failed ones included, counts one query.
    GenerateResult generate(const std::string& model_id, const Conversation& conversation,
                            std::uint64_t seed);

    void set_retry_policy(int retries, int backoff_ms) {
        retries_ = retries;
        backoff_ms_ = backoff_ms;
    }

private:
    std::vector<std::string> ids_;
    std::map<std::string, std::shared_ptr<Provider>> providers_;
    UsageRecord usage_;
    int retries_ = 2;
    int backoff_ms_ = 100;
};

/// Renders the main refinement prompt for a unit: translation-direction
/// preamble, the four context sections ({unsafe_rust}, {call_sites},
/// {global}, {import} in the template), and the FUNC-delimiter instruction.
/// Empty sections render an explicit "none" marker. Pure and deterministic.
std::string build_prompt(const FunctionUnit& unit);

/// Renders the repair message for a failed validation: compile diagnostics
/// when the build failed, otherwise failing tests with expected vs observed
/// behavior. Throws Error on a fully passing result.
std::string make_feedback_message(const ValidationResult& result);

/// Extracts the candidate body between the first FUNC delimiter pair
/// (</FUNC> and <\FUNC> both close), strips code fences, trims blank edges.
/// Throws ExtractionError when no delimiter pair is present.
std::string postprocess(const std::string& response);

/// Starts a fresh conversation holding the unit's main prompt.
Conversation conversation_for(const FunctionUnit& unit);

}  // namespace refinery
