// Copyright 2026 The Translit Authors. All Rights Reserved.
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
#include <stdlib.h>

#include <sstream>
#include <thread>

#include "translit/llm_client.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace translit {
namespace {

LlmItem item(std::string text) { return {std::move(text), Direction::kRoman2Ur}; }

Sleeper recording_sleeper(std::vector<std::int64_t>& waits) {
  return [&waits](std::chrono::milliseconds d) { waits.push_back(d.count()); };
}

TEST(LlmConfig, PresetPinsSamplingParameters) {
  LlmConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.model, "gpt-4o-mini");
  c.temperature = 0.7;
  EXPECT_THROW(c.validate(), PreconditionError);
  c.fixed_sampling = false;
  EXPECT_NO_THROW(c.validate());
  LlmConfig unknown;
  unknown.prompt_template_id = "other";
  EXPECT_THROW(unknown.validate(), PreconditionError);
}

TEST(LlmRequest, CarriesOnlyModelMessageAndUnitSampling) {
  const auto req = build_request(item("kya haal hai"), LlmConfig{});
  EXPECT_EQ(req.size(), 4u);
  EXPECT_EQ(req.at("model"), "gpt-4o-mini");
  EXPECT_EQ(req.at("temperature").get<double>(), 1.0);
  EXPECT_EQ(req.at("top_p").get<double>(), 1.0);
  ASSERT_EQ(req.at("messages").size(), 1u);
  EXPECT_EQ(req.at("messages")[0].at("role"), "user");
  const auto prompt = req.at("messages")[0].at("content").get<std::string>();
  EXPECT_NE(prompt.find("kya haal hai"), std::string::npos);
  EXPECT_NE(prompt.find("Roman Urdu sentence into Urdu script"), std::string::npos);
}

TEST(LlmRequest, PromptFollowsDirection) {
  const auto p = render_prompt({"کیا", Direction::kUr2Roman});
  EXPECT_NE(p.find("Urdu script sentence into Roman Urdu"), std::string::npos);
  EXPECT_THROW(render_prompt(item("x"), "v0"), PreconditionError);
}

TEST(LlmExtract, StripsPreambleAndQuotes) {
  EXPECT_EQ(extract_transliteration("کیا"), "کیا");
  EXPECT_EQ(extract_transliteration("Here is the transliteration:\n\n\"کیا حال ہے\"\n"), "کیا حال ہے");
  EXPECT_EQ(extract_transliteration("  «کیا»  "), "کیا");
  EXPECT_EQ(extract_transliteration(""), "");
  EXPECT_EQ(extract_transliteration("Transliteration:\n\n"), "");
  EXPECT_EQ(extract_transliteration("\"\""), "");
}

TEST(LlmBatch, MockReplaysFixture) {
  std::istringstream fixture(R"({"input": "kya", "response": "کیا", "latency_ms": 12.5})" "\n");
  auto mock = MockTransport::parse(fixture);
  const std::vector<LlmItem> items = {item("kya")};
  std::vector<std::int64_t> waits;
  const auto t = transliterate_batch(items, LlmConfig{}, mock, recording_sleeper(waits));
  ASSERT_EQ(t.entries.size(), 1u);
  EXPECT_EQ(t.entries[0].extracted, "کیا");
  EXPECT_FALSE(t.entries[0].failed);
  EXPECT_EQ(t.entries[0].latency_ms, 12.5);
  EXPECT_EQ(t.template_id, kPromptTemplateId);
  EXPECT_TRUE(waits.empty());
}

TEST(LlmBatch, EmptyBodyIsFlaggedAndBatchContinues) {
  MockTransport mock;
  mock.add("a", {.response = ""});
  mock.add("b", {.response = "ب"});
  const std::vector<LlmItem> items = {item("a"), item("b")};
  std::vector<std::int64_t> waits;
  const auto t = transliterate_batch(items, LlmConfig{}, mock, recording_sleeper(waits));
  ASSERT_EQ(t.entries.size(), 2u);
  EXPECT_TRUE(t.entries[0].failed);
  EXPECT_TRUE(t.entries[0].extracted.empty());
  EXPECT_FALSE(t.entries[1].failed);
  EXPECT_EQ(t.entries[1].extracted, "ب");
}

TEST(LlmBatch, ScriptedRetriesAndLatencyAreRecordedInOrder) {
  MockTransport mock;
  mock.add("one", {.response = "", .latency_ms = 5, .fail = true});
  mock.add("one", {.response = "ون", .latency_ms = 7});
  mock.add("two", {.response = "ٹو", .latency_ms = 3});
  for (int i = 0; i < 3; ++i) mock.add("three", {.latency_ms = 100.0 + i, .fail = true});
  mock.add("three", {.response = "تھری", .latency_ms = 9});
  const std::vector<LlmItem> items = {item("one"), item("two"), item("three")};
  LlmConfig cfg;
  cfg.max_retries = 3;
  cfg.initial_backoff = std::chrono::milliseconds(100);
  std::vector<std::int64_t> waits;
  const auto t = transliterate_batch(items, cfg, mock, recording_sleeper(waits));
  ASSERT_EQ(t.entries.size(), 3u);
  EXPECT_EQ(t.entries[0].input, "one");
  EXPECT_EQ(t.entries[1].input, "two");
  EXPECT_EQ(t.entries[2].input, "three");
  EXPECT_EQ(t.entries[0].retries, 1);
  EXPECT_EQ(t.entries[1].retries, 0);
  EXPECT_EQ(t.entries[2].retries, 3);
  EXPECT_EQ(t.entries[0].latency_ms, 7.0);
  EXPECT_EQ(t.entries[1].latency_ms, 3.0);
  EXPECT_EQ(t.entries[2].latency_ms, 9.0);
  EXPECT_EQ(t.entries[2].extracted, "تھری");
  EXPECT_EQ(waits, (std::vector<std::int64_t>{100, 100, 200, 400}));
  EXPECT_EQ(mock.requests(), 7u);
}

TEST(LlmBatch, ExhaustedRetriesFlagTheItem) {
  MockTransport mock;
  for (int i = 0; i < 3; ++i) mock.add("x", {.fail = true});
  const std::vector<LlmItem> items = {item("x")};
  LlmConfig cfg;
  cfg.max_retries = 2;
  std::vector<std::int64_t> waits;
  const auto t = transliterate_batch(items, cfg, mock, recording_sleeper(waits));
  EXPECT_TRUE(t.entries[0].failed);
  EXPECT_EQ(t.entries[0].retries, 2);
  EXPECT_NE(t.entries[0].error.find("retries exhausted"), std::string::npos);
}

TEST(LlmBatch, MissingFixtureEntryFailsWithoutRetry) {
  MockTransport mock;
  const std::vector<LlmItem> items = {item("unknown")};
  std::vector<std::int64_t> waits;
  const auto t = transliterate_batch(items, LlmConfig{}, mock, recording_sleeper(waits));
  EXPECT_TRUE(t.entries[0].failed);
  EXPECT_EQ(t.entries[0].retries, 0);
  EXPECT_EQ(mock.requests(), 1u);
}

TEST(LlmBatch, MalformedFixtureNamesTheLine) {
  std::istringstream fixture("{\"input\": \"a\", \"response\": \"b\"}\nnot json\n");
  try {
    MockTransport::parse(fixture);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

Transcript sample_transcript() {
  Transcript t{"translit-v1", "gpt-4o-mini", {}};
  t.entries.push_back({"kya", Direction::kRoman2Ur, "کیا", "کیا", 10.25, 0, false, ""});
  t.entries.push_back({"hai", Direction::kRoman2Ur, "Sure:\n\"ہے\"", "ہے", 3.5, 2, false, ""});
  t.entries.push_back({"کون", Direction::kUr2Roman, "", "", 0.0, 3, true, "retries exhausted: x"});
  return t;
}

TEST(Transcript, RoundTripsLosslessly) {
  const auto t = sample_transcript();
  std::stringstream buf;
  write_transcript(buf, t);
  EXPECT_EQ(read_transcript(buf), t);
  std::istringstream headless(R"({"kind":"item"})" "\n");
  EXPECT_THROW(read_transcript(headless), FormatError);
}

TEST(ScoreTranscript, AllCorrectScoresHundred) {
  Transcript t{"translit-v1", "m", {}};
  t.entries.push_back({"kya", Direction::kRoman2Ur, "کیا", "کیا", 0, 0, false, ""});
  t.entries.push_back({"hai", Direction::kRoman2Ur, "ہے", "ہے", 0, 0, false, ""});
  const std::vector<std::string> refs = {"کیا", "ہے"};
  const auto r = score_transcript(t, refs);
  EXPECT_DOUBLE_EQ(r.char_bleu.score, 100.0);
}

TEST(ScoreTranscript, AllFailedScoresZero) {
  Transcript t{"translit-v1", "m", {}};
  t.entries.push_back({"kya", Direction::kRoman2Ur, "", "", 0, 3, true, "x"});
  t.entries.push_back({"hai", Direction::kRoman2Ur, "ہے", "ہے", 0, 0, true, "flagged"});
  const std::vector<std::string> refs = {"کیا", "ہے"};
  const auto r = score_transcript(t, refs);
  EXPECT_EQ(r.bleu.score, 0.0);
  EXPECT_EQ(r.char_bleu.score, 0.0);
  EXPECT_EQ(r.chrf.score, 0.0);
}

TEST(ScoreTranscript, MixedTranscriptDelegatesToMetrics) {
  const auto t = sample_transcript();
  const std::vector<std::string> refs = {"کیا", "ہے ہے", "kon"};
  const std::vector<std::string> hyps = {"کیا", "ہے", ""};
  const auto got = score_transcript(t, refs, "llm");
  const auto want = evaluate_metrics(hyps, refs, "llm");
  EXPECT_EQ(got.bleu.score, want.bleu.score);
  EXPECT_EQ(got.char_bleu.score, want.char_bleu.score);
  EXPECT_EQ(got.chrf.score, want.chrf.score);
  EXPECT_EQ(got.markdown_row(), want.markdown_row());
  const std::vector<std::string> short_refs = {"a"};
  EXPECT_THROW(score_transcript(t, short_refs), PreconditionError);
}

// Loopback chat-completion server for the HTTP transport.
class FakeService {
 public:
  FakeService() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = req.body;
      ++calls_;
      if (calls_ <= fail_first_) {
        res.status = 503;
        return;
      }
      if (reject_) {
        res.status = 401;
        return;
      }
      const nlohmann::json body = {
          {"choices", {{{"message", {{"role", "assistant"}, {"content", "Output:\n\"کیا\""}}}}}}};
      res.set_content(body.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeService() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

  int fail_first_ = 0;
  bool reject_ = false;
  int calls_ = 0;
  std::string last_auth_;
  std::string last_body_;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(HttpTransport, MissingKeyIsAnAuthError) {
  LlmConfig cfg;
  cfg.api_key_env = "TRANSLIT_TEST_UNSET_KEY";
  ::unsetenv("TRANSLIT_TEST_UNSET_KEY");
  EXPECT_THROW(HttpTransport{cfg}, AuthError);
}

TEST(HttpTransport, PostsBearerRequestAndRetriesServerErrors) {
  FakeService service;
  service.fail_first_ = 1;
  ::setenv("TRANSLIT_TEST_KEY", "secret-token", 1);
  LlmConfig cfg;
  cfg.endpoint = service.endpoint();
  cfg.api_key_env = "TRANSLIT_TEST_KEY";
  cfg.timeout = std::chrono::milliseconds(5000);
  HttpTransport transport(cfg);
  const std::vector<LlmItem> items = {item("kya")};
  std::vector<std::int64_t> waits;
  const auto t = transliterate_batch(items, cfg, transport, recording_sleeper(waits));
  ASSERT_EQ(t.entries.size(), 1u);
  EXPECT_EQ(t.entries[0].extracted, "کیا");
  EXPECT_EQ(t.entries[0].retries, 1);
  EXPECT_EQ(service.calls_, 2);
  EXPECT_EQ(service.last_auth_, "Bearer secret-token");
  const auto body = nlohmann::json::parse(service.last_body_);
  EXPECT_EQ(body.at("temperature").get<double>(), 1.0);
  EXPECT_EQ(body.at("top_p").get<double>(), 1.0);
}

TEST(HttpTransport, RejectedCredentialsAbortTheBatch) {
  FakeService service;
  service.reject_ = true;
  ::setenv("TRANSLIT_TEST_KEY", "bad", 1);
  LlmConfig cfg;
  cfg.endpoint = service.endpoint();
  cfg.api_key_env = "TRANSLIT_TEST_KEY";
  HttpTransport transport(cfg);
  const std::vector<LlmItem> items = {item("kya"), item("hai")};
  std::vector<std::int64_t> waits;
  EXPECT_THROW(transliterate_batch(items, cfg, transport, recording_sleeper(waits)), AuthError);
  EXPECT_EQ(service.calls_, 1);
}

}  // namespace
}  // namespace translit
