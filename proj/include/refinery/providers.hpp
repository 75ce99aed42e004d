#pragma once

#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>

#include "refinery/refiner.hpp"

namespace refinery {

/// Deterministic offline provider. Responses scripted for an exact
/// (conversation digest, seed) key win; otherwise a FIFO sequence serves
/// calls in engine order, which is itself deterministic for a fixed seed.
/// Token usage is whitespace-token counting over prompt and completion.
class MockProvider : public Provider {
public:
    /// Content rule: matches when the conversation text contains the
    /// substring and, when set, feedback presence (an assistant message)
    /// agrees. First matching rule wins; rules are stateless.
    struct Rule {
        std::string contains;
        std::optional<bool> with_feedback;
        std::string response;
    };

    /// Scripted response for one exact conversation digest + seed;
    /// takes priority over everything else.
    void script(const std::string& digest, std::uint64_t seed, std::string response);
    void add_rule(Rule rule);
    /// FIFO fallback responses, consumed one per unscripted call.
    void push_response(std::string response);
    /// Response used when nothing else matches (default: extraction-poison text).
    void set_default_response(std::string response);
    /// When set, the provider throws TransportError this many times first.
    void fail_transport_times(int n) { transport_failures_ = n; }

    GenerateResult generate(const Conversation& conversation, std::uint64_t seed) override;

    static std::int64_t count_tokens(const std::string& text);

private:
    std::map<std::string, std::string> scripted_;  // digest:seed -> response
    std::vector<Rule> rules_;
    std::deque<std::string> fifo_;
    std::string default_response_ = "(no scripted response)";
    int transport_failures_ = 0;
    std::mutex mu_;
};

/// Append-only JSONL record stream of every generate call; replaying it
/// reproduces a run exactly. First record is a header carrying the run
/// configuration document.
class TranscriptLog {
public:
    TranscriptLog() = default;
    explicit TranscriptLog(const std::filesystem::path& path);

    void write_header(const std::string& config_json);
    void append(const CallRecord& record);
    bool open() const { return out_.is_open(); }

private:
    std::ofstream out_;
    std::mutex mu_;
};

struct TranscriptEntry {
    std::string model_id;
    std::string digest;
    std::string response;
    UsageRecord usage;
    bool failed = false;
};

struct Transcript {
    std::string config_json;  // header payload, empty if none
    std::vector<TranscriptEntry> entries;
};

Transcript load_transcript(const std::filesystem::path& path);

/// Replays a recorded session: each call returns the next recorded response
/// for this model, verifying the conversation digest still matches, so a
/// diverging re-run fails loudly instead of silently.
class TranscriptReplayProvider : public Provider {
public:
    TranscriptReplayProvider(std::shared_ptr<Transcript> transcript, std::string model_id);

    GenerateResult generate(const Conversation& conversation, std::uint64_t seed) override;

private:
    std::shared_ptr<Transcript> transcript_;
    std::string model_id_;
    std::size_t cursor_ = 0;
    std::mutex mu_;
};

struct HttpProviderConfig {
    std::string endpoint;  // e.g. http://host:port
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env;  // name of the env var holding the key
    double temperature = 0.2;
    int timeout_s = 120;
};

/// OpenAI-style chat-completions client over cpp-httplib. Transport and
/// non-2xx responses surface as TransportError (retried by the pool).
class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpProviderConfig config);

    GenerateResult generate(const Conversation& conversation, std::uint64_t seed) override;

private:
    HttpProviderConfig config_;
};

}  // namespace refinery
