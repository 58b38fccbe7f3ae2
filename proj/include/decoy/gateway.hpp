#pragma once

#include "decoy/config.hpp"
#include "decoy/errors.hpp"

#include "json.hpp"

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace decoy {

enum class Role { system, user, assistant };

std::string_view role_token(Role r);

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

struct DecodingParams {
    double temperature = 0.1;
    int max_tokens = 1024;
};

struct TokenUsage {
    long prompt = 0;
    long completion = 0;
};

/// One request/response pair, recorded verbatim (including malformed output).
struct ChatExchange {
    std::vector<ChatMessage> request;
    DecodingParams params;
    std::string response;
    std::string model_id;
    double latency_ms = 0.0;
    std::optional<TokenUsage> usage;
};

// The text a mock rule matches against: "system: ...\n\nuser: ...\n".
std::string rendered_prompt(const std::vector<ChatMessage>& messages);

/// Append-only, internally synchronized record of every gateway call.
class ExchangeLog {
  public:
    ExchangeLog() = default;
    explicit ExchangeLog(std::string jsonl_path); // also streams entries to a file

    void append(const ChatExchange& exchange, const std::string& error = "");
    std::size_t size() const;

    // One JSON object per entry, in call order. include_timing=false strips
    // latency for replay comparisons.
    nlohmann::json to_json(bool include_timing = true) const;
    std::string to_jsonl(bool include_timing = true) const;

  private:
    struct Entry {
        ChatExchange exchange;
        std::string error;
    };
    mutable std::mutex mu_;
    std::vector<Entry> entries_;
    std::string sink_path_;
};

/// Per-run ceiling on the number of gateway calls.
class CallBudget {
  public:
    explicit CallBudget(long limit) : limit_(limit) {}
    bool try_acquire() { return used_.fetch_add(1) < limit_; }
    long used() const { return std::min<long>(used_.load(), limit_); }
    long limit() const { return limit_; }

  private:
    std::atomic<long> used_{0};
    long limit_;
};

class ChatGateway {
  public:
    virtual ~ChatGateway() = default;

    // Completes one chat request. Logs every call, successful or not.
    ChatExchange complete(const std::vector<ChatMessage>& messages, const DecodingParams& params);

    virtual std::string backend_id() const = 0;

    void set_log(std::shared_ptr<ExchangeLog> log) { log_ = std::move(log); }
    void set_budget(std::shared_ptr<CallBudget> budget) { budget_ = std::move(budget); }
    std::shared_ptr<ExchangeLog> log() const { return log_; }
    long calls() const { return calls_.load(); }

  protected:
    virtual ChatExchange complete_impl(const std::vector<ChatMessage>& messages,
                                       const DecodingParams& params) = 0;

  private:
    std::shared_ptr<ExchangeLog> log_;
    std::shared_ptr<CallBudget> budget_;
    std::atomic<long> calls_{0};
};

struct MockRule {
    std::string match;             // substring, or ECMAScript regex when is_regex
    bool is_regex = false;
    std::string response;
    std::optional<int> max_uses;   // absent = unlimited
};

struct MockScript {
    std::vector<MockRule> rules;

    // JSON-lines file: {"match": "...", "response": "...", "regex": bool?, "max_uses": int?}
    static MockScript load(const std::string& path);
    static MockScript from_jsonl(const std::string& content);
};

/// Deterministic scripted backend. First matching rule wins; exhausted rules
/// are skipped; no match is an error, never a silent default.
class MockGateway : public ChatGateway {
  public:
    explicit MockGateway(MockScript script) : script_(std::move(script)) {}

    std::string backend_id() const override { return "mock"; }

  protected:
    ChatExchange complete_impl(const std::vector<ChatMessage>& messages,
                               const DecodingParams& params) override;

  private:
    MockScript script_;
    std::vector<int> uses_ = std::vector<int>(script_.rules.size(), 0);
    std::mutex mu_;
};

/// Live client for the OpenAI-compatible chat-completions protocol.
class HttpGateway : public ChatGateway {
  public:
    struct Options {
        std::string endpoint; // e.g. http://127.0.0.1:8000/v1
        std::string model;
        std::string api_key;
        int retries = 2;      // transient failures retried this many times
        int backoff_ms = 250; // doubled after each failed attempt
        int timeout_s = 120;
    };

    explicit HttpGateway(Options opts);

    std::string backend_id() const override { return opts_.model + "@" + opts_.endpoint; }

    static nlohmann::json request_body(const std::vector<ChatMessage>& messages,
                                       const DecodingParams& params,
                                       const std::string& model);

  protected:
    ChatExchange complete_impl(const std::vector<ChatMessage>& messages,
                               const DecodingParams& params) override;

  private:
    Options opts_;
    std::string scheme_host_port_;
    std::string base_path_;
};

// Builds a gateway from a backend config: mock script when set, HTTP otherwise.
// Throws ConfigError when a live backend lacks its API key env var and
// require_key is true (key checks are skipped for localhost endpoints).
std::shared_ptr<ChatGateway> make_gateway(const BackendConfig& backend, const RunConfig& run);

} // namespace decoy
