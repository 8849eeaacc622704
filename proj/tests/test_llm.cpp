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

#include <gtest/gtest.h>

#include <filesystem>
#include <future>
#include <thread>

#include "ivos/llm.hpp"
#include "llm_test_backends.hpp"

namespace ivos {
namespace {

using testing::CountingBackend;
using testing::ScriptedBackend;
using testing::TextOnlyBackend;

LlmRequest text_request(const std::string& user) {
    LlmRequest req;
    req.kind = RequestKind::TextChat;
    req.user_prompt = user;
    return req;
}

TEST(RenderPrompt, Substitution) {
    EXPECT_EQ(render_prompt("no placeholders", {}), "no placeholders");
    EXPECT_EQ(render_prompt("indices: {{indices}}.",
                            {{"indices", "[0], [1], [2]"}}),
              "indices: [0], [1], [2].");
    EXPECT_THROW(render_prompt("{{missing}}", {}), MissingBinding);
    try {
        render_prompt("a {{gone}} b", {{"other", "x"}});
        FAIL();
    } catch (const MissingBinding& e) {
        EXPECT_EQ(e.placeholder, "gone");
    }
}

TEST(PromptLibrary, LoadsDirectory) {
    const auto dir = std::filesystem::temp_directory_path() / "ivos_prompts";
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "greeting.txt", "hello {{name}}");
    const PromptLibrary lib = PromptLibrary::load(dir);
    EXPECT_TRUE(lib.has("greeting"));
    EXPECT_EQ(lib.render("greeting", {{"name", "world"}}), "hello world");
    EXPECT_THROW(lib.render("absent", {}), ConfigError);
    EXPECT_THROW(PromptLibrary::load(dir / "missing"), ConfigError);
}

TEST(MockBackend, DeterministicByteIdentical) {
    MockBackend mock;
    LlmRequest req;
    req.kind = RequestKind::VisionChat;
    req.system_prompt = "sys";
    req.user_prompt = "### task: stage1_object_caption\nobject index: 2\n";
    req.images = {"imagebytes-a", "imagebytes-b"};
    const LlmResponse a = mock.complete_once(req);
    const LlmResponse b = mock.complete_once(req);
    EXPECT_EQ(a.text, b.text);
    EXPECT_EQ(a.backend_id, "mock");
    EXPECT_NE(a.text.find("MOTION:"), std::string::npos);
    // A canned digest reply overrides generation.
    mock.add_digest_reply(request_digest(req), "CANNED");
    EXPECT_EQ(mock.complete_once(req).text, "CANNED");
}

TEST(MockBackend, PatternLayerAndImageSensitivity) {
    MockBackend mock;
    mock.add_pattern_reply("mention of pelicans", "PELICAN REPLY");
    LlmRequest req = text_request("here is a mention of pelicans, ok?");
    EXPECT_EQ(mock.complete_once(req).text, "PELICAN REPLY");

    LlmRequest v1 = text_request("same text");
    v1.kind = RequestKind::VisionChat;
    v1.images = {"img1"};
    LlmRequest v2 = v1;
    v2.images = {"img2"};
    EXPECT_NE(request_digest(v1), request_digest(v2));
}

TEST(LlmClient, UnsupportedKindNotRetried) {
    auto backend = std::make_shared<TextOnlyBackend>();
    LlmClient client(backend, RetryPolicy{3, 0, 0});
    LlmRequest req;
    req.kind = RequestKind::VisionChat;
    req.images = {"img"};
    EXPECT_THROW(client.complete(req), UnsupportedKind);
    EXPECT_EQ(client.telemetry().attempts, 0);
}

TEST(LlmClient, TransientFaultThenSuccess) {
    auto backend = std::make_shared<ScriptedBackend>(
        std::vector<ScriptedBackend::Step>{ScriptedBackend::Step::Transport,
                                           ScriptedBackend::Step::Reply});
    LlmClient client(backend, RetryPolicy{3, 0, 0});
    const LlmResponse response = client.complete(text_request("q"));
    EXPECT_EQ(response.text, "ok");
    const TelemetrySnapshot t = client.telemetry();
    EXPECT_EQ(t.requests, 1);
    EXPECT_EQ(t.attempts, 2);
    EXPECT_EQ(t.retries, 1);
}

TEST(LlmClient, RateLimitedTerminalAfterMaxAttempts) {
    auto backend = std::make_shared<ScriptedBackend>(
        std::vector<ScriptedBackend::Step>(4,
                                           ScriptedBackend::Step::RateLimit));
    LlmClient client(backend, RetryPolicy{3, 0, 0});
    EXPECT_THROW(client.complete(text_request("q")), RateLimited);
    EXPECT_EQ(client.telemetry().attempts, 3);
    EXPECT_EQ(backend->calls(), 3u);
}

TEST(LlmClient, ConcurrencyCapHolds) {
    auto backend = std::make_shared<CountingBackend>();
    const int cap = 5;
    LlmClient client(std::static_pointer_cast<LlmBackend>(backend),
                     RetryPolicy{1, 0, 0}, cap);
    std::vector<std::future<void>> futures;
    futures.reserve(64);
    for (int i = 0; i < 64; ++i) {
        futures.push_back(std::async(std::launch::async, [&client] {
            client.complete(LlmRequest{});
        }));
    }
    for (auto& f : futures) f.get();
    EXPECT_LE(backend->max_concurrent(), cap);
    EXPECT_GT(backend->max_concurrent(), 0);
}

TEST(LlmClient, AuditTrailWritten) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("ivos_audit_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    auto backend = std::make_shared<MockBackend>();
    LlmClient client(backend, RetryPolicy{1, 0, 0}, 2, dir);
    client.complete(text_request("### task: stage2_merge_decision\n"));
    int files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        ++files;
        const auto record = nlohmann::json::parse(read_file(entry.path()));
        EXPECT_EQ(record["attempts"], 1);
        EXPECT_EQ(record["response"]["text"], "MERGE: no\n");
    }
    EXPECT_EQ(files, 1);
}

TEST(HttpBackend, WireFormatAgainstLocalServer) {
    httplib::Server server;
    nlohmann::json seen_body;
    std::string seen_auth;
    server.Post("/v1/chat/completions",
                [&](const httplib::Request& req, httplib::Response& res) {
                    seen_body = nlohmann::json::parse(req.body);
                    if (req.has_header("Authorization")) {
                        seen_auth = req.get_header_value("Authorization");
                    }
                    const nlohmann::json reply{
                        {"choices",
                         {{{"message", {{"content", "server says hi"}}}}}},
                        {"usage",
                         {{"prompt_tokens", 12}, {"completion_tokens", 3}}}};
                    res.set_content(reply.dump(), "application/json");
                });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&server] { server.listen_after_bind(); });
    while (!server.is_running()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }

    ::setenv(kApiKeyEnvVar, "sekrit", 1);
    HttpBackendConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port);
    config.model = "test-model";
    HttpBackend backend(config);

    LlmRequest req;
    req.kind = RequestKind::VisionChat;
    req.system_prompt = "be terse";
    req.user_prompt = "describe";
    req.images = {"rawimagebytes"};
    req.decode.max_tokens = 77;
    const LlmResponse response = backend.complete_once(req);

    EXPECT_EQ(response.text, "server says hi");
    EXPECT_EQ(response.usage.prompt_tokens, 12);
    EXPECT_EQ(response.usage.completion_tokens, 3);
    EXPECT_EQ(seen_auth, "Bearer sekrit");
    EXPECT_EQ(seen_body["model"], "test-model");
    EXPECT_EQ(seen_body["max_tokens"], 77);
    ASSERT_EQ(seen_body["messages"].size(), 2u);
    EXPECT_EQ(seen_body["messages"][0]["role"], "system");
    const auto& content = seen_body["messages"][1]["content"];
    ASSERT_TRUE(content.is_array());
    EXPECT_EQ(content[0]["type"], "text");
    EXPECT_EQ(content[1]["type"], "image_url");
    const std::string url = content[1]["image_url"]["url"];
    EXPECT_EQ(url.rfind("data:image/png;base64,", 0), 0u);

    server.stop();
    server_thread.join();
}

TEST(HttpBackend, RateLimitAndServerErrors) {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions",
                [&](const httplib::Request&, httplib::Response& res) {
                    res.status = (hits.fetch_add(1) == 0) ? 429 : 500;
                    res.set_content("busy", "text/plain");
                });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&server] { server.listen_after_bind(); });
    while (!server.is_running()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }

    HttpBackendConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port);
    HttpBackend backend(config);
    EXPECT_THROW(backend.complete_once(text_request("q")), RateLimited);
    EXPECT_THROW(backend.complete_once(text_request("q")), TransportError);

    server.stop();
    server_thread.join();
}

}  // namespace
}  // namespace ivos
