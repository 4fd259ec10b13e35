#pragma once

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hkfr/jsonl.hpp"

namespace hkfr {

inline constexpr const char* kApiKeyEnvVar = "HKFR_API_KEY";
inline constexpr const char* kChatCompletionsPath = "/v1/chat/completions";

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
};

struct ChatResponse {
    std::string content;
    std::string finish_reason;
};

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Retryable failures exhausted (connection errors, 429, 5xx).
class BackendUnavailable : public BackendError {
public:
    using BackendError::BackendError;
};

// Non-retryable 4xx; carries status and a body excerpt.
class BackendRejected : public BackendError {
public:
    BackendRejected(int status, const std::string& body_excerpt)
        : BackendError("backend rejected request: HTTP " + std::to_string(status) +
                       (body_excerpt.empty() ? "" : " — " + body_excerpt)),
          status_(status),
          body_excerpt_(body_excerpt) {}
    int status() const { return status_; }
    const std::string& body_excerpt() const { return body_excerpt_; }

private:
    int status_;
    std::string body_excerpt_;
};

// HTTP 200 with a body that does not carry a chat completion.
class ProtocolError : public BackendError {
public:
    using BackendError::BackendError;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{500};
    double factor = 2.0;
    bool full_jitter = true;
};

inline json chat_request_to_json(const ChatRequest& req) {
    json body;
    body["model"] = req.model;
    body["messages"] = json::array();
    for (const auto& m : req.messages) {
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }
    body["temperature"] = req.temperature;
    return body;
}

// Chat-completions client against an OpenAI-compatible endpoint.
// Retries 429/5xx and transport errors with exponential backoff and full
// jitter; other 4xx are surfaced immediately.
class ChatClient {
public:
    ChatClient(std::string endpoint, std::string api_key, RetryPolicy policy = {})
        : endpoint_(std::move(endpoint)),
          api_key_(std::move(api_key)),
          policy_(policy),
          jitter_rng_(std::random_device{}()) {}

    static ChatClient from_env(std::string endpoint, RetryPolicy policy = {}) {
        const char* key = std::getenv(kApiKeyEnvVar);
        return ChatClient(std::move(endpoint), key ? key : "", policy);
    }

    ChatResponse chat(const ChatRequest& request) {
        if (request.messages.empty()) {
            throw std::invalid_argument("chat request must carry at least one message");
        }
        if (request.temperature < 0.0 || request.temperature > 2.0) {
            throw std::invalid_argument("chat temperature must lie in [0, 2]");
        }
        const std::string body = chat_request_to_json(request).dump();

        int last_status = 0;
        std::string last_detail;
        for (int attempt = 0; attempt <= policy_.max_retries; ++attempt) {
            if (attempt > 0) sleep_before_retry(attempt);
            httplib::Client cli(endpoint_);
            cli.set_connection_timeout(10);
            cli.set_read_timeout(60);
            httplib::Headers headers;
            if (!api_key_.empty()) {
                headers.emplace("Authorization", "Bearer " + api_key_);
            }
            auto res = cli.Post(kChatCompletionsPath, headers, body, "application/json");
            if (!res) {
                last_status = 0;
                last_detail = httplib::to_string(res.error());
                continue;
            }
            if (res->status == 200) return parse_response(res->body);
            if (res->status == 429 || (res->status >= 500 && res->status < 600)) {
                last_status = res->status;
                last_detail = res->body.substr(0, 200);
                continue;
            }
            throw BackendRejected(res->status, res->body.substr(0, 200));
        }
        throw BackendUnavailable("backend unavailable after " +
                                 std::to_string(policy_.max_retries) + " retries (last: " +
                                 (last_status ? "HTTP " + std::to_string(last_status)
                                              : last_detail) +
                                 ")");
    }

    const std::string& endpoint() const { return endpoint_; }

private:
    static ChatResponse parse_response(const std::string& body) {
        json j = json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
            j["choices"].empty()) {
            throw ProtocolError("malformed chat completion body: " + body.substr(0, 200));
        }
        const json& choice = j["choices"][0];
        if (!choice.contains("message") || !choice["message"].contains("content")) {
            throw ProtocolError("chat completion choice carries no message content");
        }
        ChatResponse out;
        out.content = choice["message"]["content"].get<std::string>();
        out.finish_reason = choice.value("finish_reason", std::string());
        return out;
    }

    void sleep_before_retry(int attempt) {
        double ceiling = static_cast<double>(policy_.base_delay.count());
        for (int i = 1; i < attempt; ++i) ceiling *= policy_.factor;
        double delay_ms = ceiling;
        if (policy_.full_jitter) {
            std::uniform_real_distribution<double> dist(0.0, ceiling);
            delay_ms = dist(jitter_rng_);
        }
        std::this_thread::sleep_for(
            std::chrono::milliseconds(static_cast<std::int64_t>(delay_ms)));
    }

    std::string endpoint_;
    std::string api_key_;
    RetryPolicy policy_;
    std::mt19937_64 jitter_rng_;
};

}  // namespace hkfr
