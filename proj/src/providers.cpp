#include "refinery/providers.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace refinery {

namespace {

const char* role_name(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

json conversation_to_json(const Conversation& c) {
    json msgs = json::array();
    for (const auto& m : c.messages) {
        msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    return msgs;
}

}  // namespace

std::int64_t MockProvider::count_tokens(const std::string& text) {
    std::int64_t n = 0;
    bool in_tok = false;
    for (char c : text) {
        bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!ws && !in_tok) ++n;
        in_tok = !ws;
    }
    return n;
}

void MockProvider::script(const std::string& digest, std::uint64_t seed, std::string response) {
    std::lock_guard lock(mu_);
    scripted_[digest + ":" + std::to_string(seed)] = std::move(response);
}

void MockProvider::add_rule(Rule rule) {
    std::lock_guard lock(mu_);
    rules_.push_back(std::move(rule));
}

void MockProvider::push_response(std::string response) {
    std::lock_guard lock(mu_);
    fifo_.push_back(std::move(response));
}

void MockProvider::set_default_response(std::string response) {
    std::lock_guard lock(mu_);
    default_response_ = std::move(response);
}

GenerateResult MockProvider::generate(const Conversation& conversation, std::uint64_t seed) {
    std::lock_guard lock(mu_);
    if (transport_failures_ > 0) {
        --transport_failures_;
        throw TransportError("mock transport failure");
    }
    std::string response;
    bool found = false;
    auto key = conversation.digest() + ":" + std::to_string(seed);
    if (auto it = scripted_.find(key); it != scripted_.end()) {
        response = it->second;
        found = true;
    }
    if (!found && !rules_.empty()) {
        bool has_feedback = std::any_of(conversation.messages.begin(), conversation.messages.end(),
                                        [](const Message& m) { return m.role == Role::Assistant; });
        for (const auto& rule : rules_) {
            if (rule.with_feedback && *rule.with_feedback != has_feedback) continue;
            bool hit = rule.contains.empty();
            for (const auto& m : conversation.messages) {
                if (hit) break;
                hit = m.content.find(rule.contains) != std::string::npos;
            }
            if (hit) {
                response = rule.response;
                found = true;
                break;
            }
        }
    }
    if (!found) {
        if (!fifo_.empty()) {
            response = std::move(fifo_.front());
            fifo_.pop_front();
        } else {
            response = default_response_;
        }
    }
    GenerateResult result;
    result.text = response;
    std::int64_t prompt_tokens = 0;
    for (const auto& m : conversation.messages) prompt_tokens += count_tokens(m.content);
    result.usage = {1, prompt_tokens + count_tokens(response)};
    return result;
}

TranscriptLog::TranscriptLog(const fs::path& path) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    out_.open(path, std::ios::trunc);
    if (!out_) throw Error("cannot open transcript log " + path.string());
}

void TranscriptLog::write_header(const std::string& config_json) {
    if (!out_.is_open()) return;
    std::lock_guard lock(mu_);
    json rec{{"kind", "header"}, {"schema_version", 1}};
    rec["config"] = json::parse(config_json, nullptr, false);
    out_ << rec.dump() << "\n";
    out_.flush();
}

void TranscriptLog::append(const CallRecord& record) {
    if (!out_.is_open()) return;
    std::lock_guard lock(mu_);
    json rec{{"kind", "call"},
             {"node", record.node_id},
             {"function", record.function_id},
             {"model", record.model_id},
             {"seed", record.seed},
             {"digest", record.conversation.digest()},
             {"conversation", conversation_to_json(record.conversation)},
             {"response", record.response},
             {"queries", record.usage.queries},
             {"tokens", record.usage.tokens},
             {"failed", record.failed}};
    out_ << rec.dump() << "\n";
    out_.flush();
}

Transcript load_transcript(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read transcript " + path.string());
    Transcript t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded()) throw ParseError("transcript " + path.string() + ": bad record");
        auto kind = rec.value("kind", "");
        if (kind == "header") {
            if (rec.contains("config")) t.config_json = rec.at("config").dump();
            continue;
        }
        if (kind != "call") continue;
        TranscriptEntry e;
        e.model_id = rec.value("model", "");
        e.digest = rec.value("digest", "");
        e.response = rec.value("response", "");
        e.usage = {rec.value("queries", std::int64_t{1}), rec.value("tokens", std::int64_t{0})};
        e.failed = rec.value("failed", false);
        t.entries.push_back(std::move(e));
    }
    return t;
}

TranscriptReplayProvider::TranscriptReplayProvider(std::shared_ptr<Transcript> transcript,
                                                   std::string model_id)
    : transcript_(std::move(transcript)), model_id_(std::move(model_id)) {}

GenerateResult TranscriptReplayProvider::generate(const Conversation& conversation, std::uint64_t) {
    std::lock_guard lock(mu_);
    while (cursor_ < transcript_->entries.size()) {
        const auto& e = transcript_->entries[cursor_];
        if (e.model_id != model_id_) {
            ++cursor_;
            continue;
        }
        if (!e.digest.empty() && e.digest != conversation.digest()) {
            throw Error("transcript divergence for model " + model_id_ + ": conversation digest " +
                        conversation.digest() + " != recorded " + e.digest);
        }
        if (e.failed) {
            ++cursor_;
            throw TransportError("recorded transport failure");
        }
        GenerateResult r;
        r.text = e.response;
        r.usage = e.usage;
        ++cursor_;
        return r;
    }
    throw Error("transcript exhausted for model " + model_id_);
}

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {}

GenerateResult HttpProvider::generate(const Conversation& conversation, std::uint64_t seed) {
    httplib::Client client(config_.endpoint);
    client.set_read_timeout(config_.timeout_s, 0);
    client.set_connection_timeout(10, 0);

    json body{{"model", config_.model},
              {"messages", conversation_to_json(conversation)},
              {"temperature", config_.temperature},
              {"seed", seed}};
    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (!key) throw EnvironmentError("credential env var not set: " + config_.api_key_env);
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("http request failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw TransportError("http status " + std::to_string(res->status) + ": " + res->body);
    }
    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || doc.at("choices").empty()) {
        throw TransportError("malformed completion response");
    }
    GenerateResult out;
    out.text = doc.at("choices").at(0).at("message").value("content", "");
    out.usage.queries = 1;
    if (doc.contains("usage")) {
        out.usage.tokens = doc.at("usage").value("prompt_tokens", std::int64_t{0}) +
                           doc.at("usage").value("completion_tokens", std::int64_t{0});
    } else {
        out.usage.tokens = MockProvider::count_tokens(out.text);
    }
    return out;
}

}  // namespace refinery
