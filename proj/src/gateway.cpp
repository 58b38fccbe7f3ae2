#include "decoy/gateway.hpp"

#include "decoy/text_util.hpp"

#include "httplib.h"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

namespace decoy {

namespace {

nlohmann::json exchange_to_json(const ChatExchange& ex, const std::string& error,
                                bool include_timing) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : ex.request) {
        messages.push_back({{"role", std::string(role_token(m.role))}, {"content", m.content}});
    }
    nlohmann::json j{
        {"request", std::move(messages)},
        {"temperature", ex.params.temperature},
        {"max_tokens", ex.params.max_tokens},
        {"response", ex.response},
        {"model", ex.model_id},
    };
    if (include_timing) j["latency_ms"] = ex.latency_ms;
    if (ex.usage) {
        j["usage"] = {{"prompt_tokens", ex.usage->prompt},
                      {"completion_tokens", ex.usage->completion}};
    }
    if (!error.empty()) j["error"] = error;
    return j;
}

} // namespace

std::string_view role_token(Role r) {
    switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

std::string rendered_prompt(const std::vector<ChatMessage>& messages) {
    std::string out;
    for (const auto& m : messages) {
        out += role_token(m.role);
        out += ": ";
        out += m.content;
        out += "\n\n";
    }
    if (!out.empty()) out.pop_back(); // keep a single trailing newline
    return out;
}

ExchangeLog::ExchangeLog(std::string jsonl_path) : sink_path_(std::move(jsonl_path)) {}

void ExchangeLog::append(const ChatExchange& exchange, const std::string& error) {
    std::lock_guard<std::mutex> lock(mu_);
    entries_.push_back({exchange, error});
    if (!sink_path_.empty()) {
        std::ofstream out(sink_path_, std::ios::app);
        if (out) out << exchange_to_json(exchange, error, true).dump() << '\n';
    }
}

std::size_t ExchangeLog::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
}

nlohmann::json ExchangeLog::to_json(bool include_timing) const {
    std::lock_guard<std::mutex> lock(mu_);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : entries_) arr.push_back(exchange_to_json(e.exchange, e.error, include_timing));
    return arr;
}

std::string ExchangeLog::to_jsonl(bool include_timing) const {
    std::string out;
    for (const auto& j : to_json(include_timing)) {
        out += j.dump();
        out += '\n';
    }
    return out;
}

ChatExchange ChatGateway::complete(const std::vector<ChatMessage>& messages,
                                   const DecodingParams& params) {
    if (budget_ && !budget_->try_acquire()) {
        throw BudgetExceeded("model call budget of " + std::to_string(budget_->limit()) +
                             " calls exhausted");
    }
    calls_.fetch_add(1);
    try {
        ChatExchange ex = complete_impl(messages, params);
        if (log_) log_->append(ex);
        return ex;
    } catch (const std::exception& e) {
        if (log_) {
            ChatExchange failed;
            failed.request = messages;
            failed.params = params;
            failed.model_id = backend_id();
            log_->append(failed, e.what());
        }
        throw;
    }
}

MockScript MockScript::load(const std::string& path) {
    return from_jsonl(read_file(path));
}

MockScript MockScript::from_jsonl(const std::string& content) {
    MockScript script;
    std::istringstream in(content);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        nlohmann::json j = nlohmann::json::parse(stripped, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ConfigError("mock script line " + std::to_string(line_no) + ": not a JSON object");
        }
        if (!j.contains("match") || !j.contains("response")) {
            throw ConfigError("mock script line " + std::to_string(line_no) +
                              ": needs \"match\" and \"response\"");
        }
        MockRule rule;
        rule.match = j.at("match").get<std::string>();
        rule.response = j.at("response").get<std::string>();
        rule.is_regex = j.value("regex", false);
        if (j.contains("max_uses")) rule.max_uses = j.at("max_uses").get<int>();
        if (rule.is_regex) {
            try {
                std::regex probe(rule.match);
            } catch (const std::regex_error& e) {
                throw ConfigError("mock script line " + std::to_string(line_no) +
                                  ": bad regex: " + e.what());
            }
        }
        script.rules.push_back(std::move(rule));
    }
    return script;
}

ChatExchange MockGateway::complete_impl(const std::vector<ChatMessage>& messages,
                                        const DecodingParams& params) {
    std::string prompt = rendered_prompt(messages);
    std::lock_guard<std::mutex> lock(mu_);
    for (std::size_t i = 0; i < script_.rules.size(); ++i) {
        const MockRule& rule = script_.rules[i];
        if (rule.max_uses && uses_[i] >= *rule.max_uses) continue;
        bool hit = rule.is_regex
                       ? std::regex_search(prompt, std::regex(rule.match))
                       : prompt.find(rule.match) != std::string::npos;
        if (!hit) continue;
        ++uses_[i];
        ChatExchange ex;
        ex.request = messages;
        ex.params = params;
        ex.response = rule.response;
        ex.model_id = backend_id();
        ex.latency_ms = 0.0;
        return ex;
    }
    std::string head = prompt.substr(0, 400);
    throw MockMiss("no mock rule matched prompt beginning: " + head);
}

HttpGateway::HttpGateway(Options opts) : opts_(std::move(opts)) {
    // Split "http(s)://host:port/base" into the client target and path prefix.
    const std::string& url = opts_.endpoint;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint must start with http:// or https://: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host_port_ = url;
        base_path_.clear();
    } else {
        scheme_host_port_ = url.substr(0, path_start);
        base_path_ = url.substr(path_start);
    }
    while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

nlohmann::json HttpGateway::request_body(const std::vector<ChatMessage>& messages,
                                         const DecodingParams& params,
                                         const std::string& model) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) {
        msgs.push_back({{"role", std::string(role_token(m.role))}, {"content", m.content}});
    }
    return nlohmann::json{{"model", model},
                          {"messages", std::move(msgs)},
                          {"temperature", params.temperature},
                          {"max_tokens", params.max_tokens}};
}

ChatExchange HttpGateway::complete_impl(const std::vector<ChatMessage>& messages,
                                        const DecodingParams& params) {
    std::string body = request_body(messages, params, opts_.model).dump();
    std::string path = base_path_ + "/chat/completions";

    httplib::Headers headers;
    if (!opts_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opts_.api_key);

    std::string last_error;
    int attempts = 0;
    int backoff = opts_.backoff_ms;
    for (int attempt = 0; attempt <= opts_.retries; ++attempt) {
        ++attempts;
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        auto start = std::chrono::steady_clock::now();
        httplib::Client client(scheme_host_port_);
        client.set_connection_timeout(opts_.timeout_s);
        client.set_read_timeout(opts_.timeout_s);
        auto res = client.Post(path, headers, body, "application/json");
        auto elapsed = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        if (!res) {
            last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw TransportError("HTTP " + std::to_string(res->status) + " from " +
                                     scheme_host_port_ + path + ": " + res->body.substr(0, 300),
                                 attempts);
        }
        nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded()) {
            throw TransportError("non-JSON response body from " + scheme_host_port_ + path,
                                 attempts);
        }
        try {
            ChatExchange ex;
            ex.request = messages;
            ex.params = params;
            ex.response = j.at("choices").at(0).at("message").at("content").get<std::string>();
            ex.model_id = j.value("model", opts_.model);
            ex.latency_ms = elapsed;
            if (j.contains("usage")) {
                TokenUsage usage;
                usage.prompt = j["usage"].value("prompt_tokens", 0L);
                usage.completion = j["usage"].value("completion_tokens", 0L);
                ex.usage = usage;
            }
            return ex;
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("malformed chat-completions response: ") + e.what(),
                                 attempts);
        }
    }
    throw TransportError("request failed after " + std::to_string(attempts) +
                             " attempts: " + last_error,
                         attempts);
}

std::shared_ptr<ChatGateway> make_gateway(const BackendConfig& backend, const RunConfig& run) {
    if (backend.is_mock()) {
        return std::make_shared<MockGateway>(MockScript::load(backend.mock_script));
    }
    if (backend.endpoint.empty()) {
        throw ConfigError("backend has neither an endpoint nor a mock script");
    }
    HttpGateway::Options opts;
    opts.endpoint = backend.endpoint;
    opts.model = backend.model;
    opts.retries = run.retries;
    opts.backoff_ms = run.backoff_ms;
    const char* key = std::getenv(backend.api_key_env.c_str());
    bool local = backend.endpoint.find("://127.0.0.1") != std::string::npos ||
                 backend.endpoint.find("://localhost") != std::string::npos;
    if (key) {
        opts.api_key = key;
    } else if (!local) {
        throw ConfigError("environment variable " + backend.api_key_env +
                          " is not set for endpoint " + backend.endpoint);
    }
    return std::make_shared<HttpGateway>(std::move(opts));
}

} // namespace decoy
