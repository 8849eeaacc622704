// Copyright 2026 The ivos Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "ivos/errors.hpp"
#include "ivos/util.hpp"

namespace ivos {

enum class RequestKind { VisionChat, TextChat };

struct DecodeParams {
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::uint64_t> seed;
};

struct LlmRequest {
    RequestKind kind = RequestKind::TextChat;
    std::string system_prompt;
    std::string user_prompt;
    std::vector<std::string> images;  // encoded frames, VisionChat only
    DecodeParams decode;
};

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct LlmResponse {
    std::string text;
    TokenUsage usage;
    std::string backend_id;
};

class LlmBackend {
   public:
    virtual ~LlmBackend() = default;
    virtual std::string id() const = 0;
    virtual bool supports(RequestKind kind) const = 0;
    virtual LlmResponse complete_once(const LlmRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Prompt templates

// Replace every {{name}} placeholder. Placeholders without a binding raise
// MissingBinding.
inline std::string render_prompt(
    const std::string& template_text,
    const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(template_text.size());
    std::size_t pos = 0;
    while (pos < template_text.size()) {
        const std::size_t open = template_text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(template_text, pos, std::string::npos);
            break;
        }
        const std::size_t close = template_text.find("}}", open + 2);
        if (close == std::string::npos) {
            out.append(template_text, pos, std::string::npos);
            break;
        }
        out.append(template_text, pos, open - pos);
        const std::string name =
            trim(template_text.substr(open + 2, close - open - 2));
        auto it = bindings.find(name);
        if (it == bindings.end()) throw MissingBinding(name);
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

// One template file per pipeline call site, keyed by file stem.
class PromptLibrary {
   public:
    PromptLibrary() = default;

    static PromptLibrary load(const std::filesystem::path& dir) {
        PromptLibrary lib;
        if (!std::filesystem::is_directory(dir)) {
            throw ConfigError("prompt directory not found: " + dir.string());
        }
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            if (entry.path().extension() != ".txt") continue;
            lib.templates_[entry.path().stem().string()] =
                read_file(entry.path());
        }
        return lib;
    }

    void add(const std::string& id, std::string text) {
        templates_[id] = std::move(text);
    }

    bool has(const std::string& id) const { return templates_.count(id) > 0; }

    std::string render(const std::string& id,
                       const std::map<std::string, std::string>& bindings)
        const {
        auto it = templates_.find(id);
        if (it == templates_.end()) {
            throw ConfigError("unknown prompt template: " + id);
        }
        return render_prompt(it->second, bindings);
    }

   private:
    std::map<std::string, std::string> templates_;
};

// ---------------------------------------------------------------------------
// Mock backend

inline std::string request_digest(const LlmRequest& request) {
    std::uint64_t h = fnv1a64(request.system_prompt);
    h = fnv1a64(request.user_prompt, h);
    for (const auto& image : request.images) {
        h = fnv1a64(to_hex(fnv1a64(image)), h);
    }
    h = fnv1a64(request.kind == RequestKind::VisionChat ? "vision" : "text",
                h);
    return to_hex(h);
}

namespace detail {

inline std::optional<std::string> prompt_field(const std::string& prompt,
                                               const std::string& key) {
    for (const auto& raw : split_lines(prompt)) {
        const std::string line = trim(raw);
        if (line.rfind(key + ":", 0) == 0) {
            return trim(line.substr(key.size() + 1));
        }
    }
    return std::nullopt;
}

inline std::string prompt_task(const std::string& prompt) {
    return prompt_field(prompt, "### task").value_or("");
}

// Replace [k] tokens with bound descriptions, leaving unknown indices as-is.
inline std::string loose_index_substitution(
    const std::string& text,
    const std::map<std::string, std::string>& bindings) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t open = text.find('[', pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        const std::size_t close = text.find(']', open + 1);
        const std::string inner =
            close == std::string::npos
                ? ""
                : text.substr(open + 1, close - open - 1);
        const bool digits =
            !inner.empty() &&
            inner.find_first_not_of("0123456789") == std::string::npos;
        if (digits && bindings.count(inner)) {
            out.append(text, pos, open - pos);
            out.append(bindings.at(inner));
            pos = close + 1;
        } else {
            out.append(text, pos, open - pos + 1);
            pos = open + 1;
        }
    }
    return out;
}

}  // namespace detail

// Deterministic offline backend. Replies are resolved in three layers:
// exact request digests, substring patterns, then a task-aware generator
// keyed by the "### task:" header each prompt template carries. The reply is
// a pure function of the request, so reruns reproduce byte-identical output.
class MockBackend : public LlmBackend {
   public:
    std::string id() const override { return "mock"; }
    bool supports(RequestKind) const override { return true; }

    void add_digest_reply(const std::string& digest, std::string reply) {
        by_digest_[digest] = std::move(reply);
    }
    // Pattern replies match when every "&&"-separated needle occurs in the
    // prompt. First registered match wins.
    void add_pattern_reply(std::string contains, std::string reply) {
        by_pattern_.emplace_back(std::move(contains), std::move(reply));
    }

    LlmResponse complete_once(const LlmRequest& request) override {
        const std::string digest = request_digest(request);
        std::string text;
        if (auto it = by_digest_.find(digest); it != by_digest_.end()) {
            text = it->second;
        } else if (const std::string* match = match_pattern(request)) {
            text = *match;
        } else {
            text = generate(request);
        }
        LlmResponse response;
        response.text = text;
        response.usage.prompt_tokens =
            static_cast<std::int64_t>(request.user_prompt.size() / 4);
        response.usage.completion_tokens =
            static_cast<std::int64_t>(text.size() / 4);
        response.backend_id = id();
        return response;
    }

   private:
    const std::string* match_pattern(const LlmRequest& request) const {
        const std::string haystack =
            request.system_prompt + "\n" + request.user_prompt;
        for (const auto& [pattern, reply] : by_pattern_) {
            bool all = true;
            std::size_t pos = 0;
            while (all) {
                const std::size_t sep = pattern.find("&&", pos);
                const std::string needle =
                    trim(pattern.substr(pos, sep == std::string::npos
                                                 ? std::string::npos
                                                 : sep - pos));
                if (!needle.empty() &&
                    haystack.find(needle) == std::string::npos) {
                    all = false;
                }
                if (sep == std::string::npos) break;
                pos = sep + 2;
            }
            if (all) return &reply;
        }
        return nullptr;
    }

    // Valid generic replies for each known prompt task, derived only from
    // fields present in the prompt itself.
    static std::string generate(const LlmRequest& request) {
        using detail::prompt_field;
        const std::string task = detail::prompt_task(request.user_prompt);
        const std::string index =
            prompt_field(request.user_prompt, "object index").value_or("0");
        if (task == "stage1_object_caption") {
            return "CATEGORY: entity\nAPPEARANCE: the entity marked " +
                   index + "\nMOTION: the entity marked " + index +
                   " moving through the scene\n";
        }
        if (task == "stage2_single_expressions") {
            const std::string appearance =
                prompt_field(request.user_prompt, "appearance")
                    .value_or("the entity marked " + index);
            const std::string motion =
                prompt_field(request.user_prompt, "motion")
                    .value_or("the entity moving");
            return "APPEARANCE_ONLY: " + appearance + "\nMOTION_ONLY: " +
                   motion + "\nCOMBINED: " + appearance + ", " + motion +
                   "\n";
        }
        if (task == "stage2_merge_decision") {
            return "MERGE: no\n";
        }
        if (task == "stage3_interaction_detect") {
            return "NONE\n";
        }
        if (task == "stage3_interaction_describe") {
            const auto actors =
                prompt_field(request.user_prompt, "actor indices");
            const auto targets =
                prompt_field(request.user_prompt, "target indices");
            if (actors && targets) {
                return "FORWARD: Object [" + *actors +
                       "] is interacting with object [" + *targets +
                       "]\nREVERSED: Object [" + *targets +
                       "] is being acted on by object [" + *actors + "]\n";
            }
            const std::string participants =
                prompt_field(request.user_prompt, "participants")
                    .value_or("0, 1");
            return "CAPTION: Objects [" + participants +
                   "] are interacting with each other\n";
        }
        if (task == "stage4_unidirectional" ||
            task == "stage4_bidirectional") {
            const std::string caption =
                prompt_field(request.user_prompt, "caption").value_or("");
            std::map<std::string, std::string> bindings;
            for (const auto& raw : split_lines(request.user_prompt)) {
                const std::string line = trim(raw);
                if (line.size() > 2 && line[0] == '[') {
                    const std::size_t close = line.find(']');
                    const std::size_t eq = line.find('=');
                    if (close != std::string::npos &&
                        eq != std::string::npos && eq > close) {
                        bindings[trim(line.substr(1, close - 1))] =
                            trim(line.substr(eq + 1));
                    }
                }
            }
            std::string out =
                "EXPRESSION: " +
                detail::loose_index_substitution(caption, bindings) + "\n";
            if (task == "stage4_unidirectional") {
                out += "ACTOR: " + prompt_field(request.user_prompt,
                                                "actor indices")
                                       .value_or("0") +
                       "\n";
                out += "TARGET: " + prompt_field(request.user_prompt,
                                                 "target indices")
                                        .value_or("1") +
                       "\n";
            }
            return out;
        }
        // Unknown task: echo a digest-derived canned line.
        return "MOCK_REPLY " + request_digest(request) + "\n";
    }

    std::map<std::string, std::string> by_digest_;
    std::vector<std::pair<std::string, std::string>> by_pattern_;
};

// ---------------------------------------------------------------------------
// HTTP backend (chat-completion wire format)

inline constexpr const char* kApiKeyEnvVar = "INTERRVOS_LLM_KEY";

struct HttpBackendConfig {
    std::string base_url;  // e.g. http://localhost:8080
    std::string model = "default";
    std::string api_key_env = kApiKeyEnvVar;
    int timeout_seconds = 120;
    bool vision = true;
};

class HttpBackend : public LlmBackend {
   public:
    explicit HttpBackend(HttpBackendConfig config)
        : config_(std::move(config)) {
        if (config_.base_url.empty()) {
            throw ConfigError("http backend requires a base URL");
        }
    }

    std::string id() const override {
        return "http:" + config_.base_url + "#" + config_.model;
    }
    bool supports(RequestKind kind) const override {
        return kind == RequestKind::TextChat || config_.vision;
    }

    LlmResponse complete_once(const LlmRequest& request) override {
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        httplib::Headers headers;
        if (const char* key = std::getenv(config_.api_key_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        const std::string body = build_body(request);
        auto res = client.Post("/v1/chat/completions", headers, body,
                               "application/json");
        if (!res) {
            throw TransportError("request to " + config_.base_url +
                                 " failed: " + httplib::to_string(res.error()));
        }
        if (res->status == 429) {
            throw RateLimited("backend rate-limited the request");
        }
        if (res->status < 200 || res->status >= 300) {
            throw TransportError("backend returned status " +
                                 std::to_string(res->status) + ": " +
                                 res->body.substr(0, 200));
        }
        return parse_body(res->body);
    }

    std::string build_body(const LlmRequest& request) const {
        nlohmann::json messages = nlohmann::json::array();
        if (!request.system_prompt.empty()) {
            messages.push_back(
                {{"role", "system"}, {"content", request.system_prompt}});
        }
        if (request.kind == RequestKind::VisionChat) {
            nlohmann::json content = nlohmann::json::array();
            content.push_back(
                {{"type", "text"}, {"text", request.user_prompt}});
            for (const auto& image : request.images) {
                content.push_back(
                    {{"type", "image_url"},
                     {"image_url",
                      {{"url", "data:image/png;base64," +
                                   base64_encode(image)}}}});
            }
            messages.push_back({{"role", "user"}, {"content", content}});
        } else {
            messages.push_back(
                {{"role", "user"}, {"content", request.user_prompt}});
        }
        nlohmann::json body{{"model", config_.model},
                            {"messages", messages},
                            {"temperature", request.decode.temperature},
                            {"max_tokens", request.decode.max_tokens}};
        if (request.decode.seed) body["seed"] = *request.decode.seed;
        return body.dump();
    }

    LlmResponse parse_body(const std::string& body) const {
        try {
            const nlohmann::json j = nlohmann::json::parse(body);
            LlmResponse response;
            response.text = j.at("choices")
                                .at(0)
                                .at("message")
                                .at("content")
                                .get<std::string>();
            if (j.contains("usage")) {
                response.usage.prompt_tokens =
                    j["usage"].value("prompt_tokens", 0);
                response.usage.completion_tokens =
                    j["usage"].value("completion_tokens", 0);
            }
            response.backend_id = id();
            return response;
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("unparseable backend reply: ") +
                                 e.what());
        }
    }

   private:
    HttpBackendConfig config_;
};

// ---------------------------------------------------------------------------
// Client: retries, concurrency cap, audit trail

struct RetryPolicy {
    int max_attempts = 3;
    int backoff_base_ms = 200;
    int backoff_cap_ms = 5000;
};

struct TelemetrySnapshot {
    std::int64_t requests = 0;
    std::int64_t attempts = 0;
    std::int64_t retries = 0;
    std::int64_t rate_limited = 0;
    std::int64_t transport_errors = 0;
};

class LlmClient {
   public:
    explicit LlmClient(std::shared_ptr<LlmBackend> backend,
                       RetryPolicy retry = {}, int concurrency_cap = 4,
                       std::optional<std::filesystem::path> audit_dir = {},
                       std::uint64_t jitter_seed = 0)
        : backend_(std::move(backend)),
          retry_(retry),
          concurrency_cap_(concurrency_cap < 1 ? 1 : concurrency_cap),
          audit_dir_(std::move(audit_dir)),
          jitter_(jitter_seed) {
        if (retry_.max_attempts < 1) retry_.max_attempts = 1;
        if (audit_dir_) std::filesystem::create_directories(*audit_dir_);
    }

    LlmResponse complete(const LlmRequest& request) {
        if (!backend_->supports(request.kind)) {
            throw UnsupportedKind("backend " + backend_->id() +
                                  " does not support this request kind");
        }
        const Pass pass = enter();
        telemetry_.requests.fetch_add(1);
        int attempts = 0;
        for (;;) {
            ++attempts;
            telemetry_.attempts.fetch_add(1);
            try {
                LlmResponse response = backend_->complete_once(request);
                audit(request, &response, attempts, nullptr);
                return response;
            } catch (const RateLimited& e) {
                telemetry_.rate_limited.fetch_add(1);
                if (attempts >= retry_.max_attempts) {
                    audit(request, nullptr, attempts, e.what());
                    throw;
                }
            } catch (const TransportError& e) {
                telemetry_.transport_errors.fetch_add(1);
                if (attempts >= retry_.max_attempts) {
                    audit(request, nullptr, attempts, e.what());
                    throw;
                }
            }
            telemetry_.retries.fetch_add(1);
            backoff(attempts);
        }
    }

    TelemetrySnapshot telemetry() const {
        return {telemetry_.requests.load(), telemetry_.attempts.load(),
                telemetry_.retries.load(), telemetry_.rate_limited.load(),
                telemetry_.transport_errors.load()};
    }

    LlmBackend& backend() { return *backend_; }
    int concurrency_cap() const { return concurrency_cap_; }

   private:
    struct Pass {
        LlmClient* client;
        ~Pass() {
            std::lock_guard<std::mutex> lock(client->gate_mutex_);
            --client->in_flight_;
            client->gate_cv_.notify_one();
        }
    };

    Pass enter() {
        std::unique_lock<std::mutex> lock(gate_mutex_);
        gate_cv_.wait(lock,
                      [this] { return in_flight_ < concurrency_cap_; });
        ++in_flight_;
        return Pass{this};
    }

    // Exponential backoff with seeded jitter in [0, base].
    void backoff(int attempt) {
        std::int64_t delay = retry_.backoff_base_ms;
        for (int i = 1; i < attempt && delay < retry_.backoff_cap_ms; ++i) {
            delay *= 2;
        }
        delay = std::min<std::int64_t>(delay, retry_.backoff_cap_ms);
        {
            std::lock_guard<std::mutex> lock(jitter_mutex_);
            delay += static_cast<std::int64_t>(
                jitter_.bounded(static_cast<std::uint64_t>(
                    retry_.backoff_base_ms + 1)));
        }
        if (delay > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
    }

    void audit(const LlmRequest& request, const LlmResponse* response,
               int attempts, const char* error) {
        if (!audit_dir_) return;
        nlohmann::json record;
        record["request"] = {
            {"kind",
             request.kind == RequestKind::VisionChat ? "vision" : "text"},
            {"system_prompt", request.system_prompt},
            {"user_prompt", request.user_prompt},
            {"image_count", request.images.size()},
            {"digest", request_digest(request)},
            {"temperature", request.decode.temperature},
            {"max_tokens", request.decode.max_tokens},
        };
        record["attempts"] = attempts;
        if (response) {
            record["response"] = {
                {"text", response->text},
                {"prompt_tokens", response->usage.prompt_tokens},
                {"completion_tokens", response->usage.completion_tokens},
                {"backend_id", response->backend_id},
            };
        }
        if (error) record["error"] = error;
        char name[64];
        std::snprintf(name, sizeof(name), "%06lld_%s.json",
                      static_cast<long long>(audit_seq_.fetch_add(1)),
                      request_digest(request).c_str());
        write_file_atomic(*audit_dir_ / name, record.dump(2) + "\n");
    }

    struct Telemetry {
        std::atomic<std::int64_t> requests{0};
        std::atomic<std::int64_t> attempts{0};
        std::atomic<std::int64_t> retries{0};
        std::atomic<std::int64_t> rate_limited{0};
        std::atomic<std::int64_t> transport_errors{0};
    };

    std::shared_ptr<LlmBackend> backend_;
    RetryPolicy retry_;
    int concurrency_cap_;
    std::optional<std::filesystem::path> audit_dir_;
    std::mutex gate_mutex_;
    std::condition_variable gate_cv_;
    int in_flight_ = 0;
    Telemetry telemetry_;
    std::atomic<std::int64_t> audit_seq_{0};
    std::mutex jitter_mutex_;
    Rng jitter_;
};

inline LlmResponse complete(LlmClient& client, const LlmRequest& request) {
    return client.complete(request);
}

}  // namespace ivos
