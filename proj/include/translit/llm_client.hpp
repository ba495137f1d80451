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

#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "translit/finetune.hpp"
#include "translit/metrics.hpp"

namespace translit {

/// Raised when the service rejects the credentials; aborts the batch.
class AuthError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::string_view kPromptTemplateId = "translit-v1";
/// Text of prompt template translit-v1 (also kept in prompts/).
inline constexpr std::string_view kPromptTemplate =
    "Transliterate the following {source_script} sentence into {target_script}. "
    "Output only the transliteration.\n\n{text}\n";

struct LlmConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  double temperature = 1.0;
  double top_p = 1.0;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
  std::string prompt_template_id = std::string(kPromptTemplateId);
  /// Enforces temperature == 1 and top_p == 1.
  bool fixed_sampling = true;

  void validate() const;
};

struct LlmItem {
  std::string text;
  Direction direction = Direction::kRoman2Ur;
};

std::string render_prompt(const LlmItem& item, std::string_view template_id = kPromptTemplateId);

/// Chat-completion request body: one user message, the configured
/// model, temperature and top_p, nothing else.
nlohmann::json build_request(const LlmItem& item, const LlmConfig& config);

/// Reduces a model reply to the transliteration: the last non-empty line
/// that does not end with ':', stripped of quotes and normalized. Empty
/// when nothing usable remains.
std::string extract_transliteration(std::string_view response);

struct TransportReply {
  enum class Status { kOk, kRetryable, kFailed, kAuth };
  Status status = Status::kOk;
  /// Assistant message text when status is kOk.
  std::string content;
  std::string error;
  double latency_ms = 0.0;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportReply send(const nlohmann::json& request, const LlmItem& item) = 0;
};

/// HTTPS chat-completion transport with bearer-token auth.
class HttpTransport : public Transport {
 public:
  /// Reads the key from `config.api_key_env`; throws AuthError if unset.
  explicit HttpTransport(const LlmConfig& config);
  TransportReply send(const nlohmann::json& request, const LlmItem& item) override;

 private:
  LlmConfig config_;
  std::string api_key_;
};

/// Offline transport replaying fixture lines
/// {input, response, latency_ms, fail} per input, in file order.
class MockTransport : public Transport {
 public:
  struct Entry {
    std::string response;
    double latency_ms = 0.0;
    bool fail = false;
  };

  static MockTransport from_jsonl(const std::filesystem::path& path);
  static MockTransport parse(std::istream& in);

  void add(const std::string& input, Entry entry);
  TransportReply send(const nlohmann::json& request, const LlmItem& item) override;
  std::size_t requests() const { return requests_; }

 private:
  std::map<std::string, std::deque<Entry>> queues_;
  std::size_t requests_ = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Default sleeper backed by std::this_thread::sleep_for.
Sleeper real_sleeper();

struct TranscriptEntry {
  std::string input;
  Direction direction = Direction::kRoman2Ur;
  std::string raw_response;
  std::string extracted;
  /// Latency of the final attempt.
  double latency_ms = 0.0;
  int retries = 0;
  bool failed = false;
  std::string error;

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

struct Transcript {
  std::string template_id;
  std::string model;
  std::vector<TranscriptEntry> entries;

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

/// One request per item, in input order. Retryable failures back off
/// exponentially up to `max_retries`; unusable replies flag the item and
/// the batch continues. AuthError propagates.
Transcript transliterate_batch(std::span<const LlmItem> items, const LlmConfig& config,
                               Transport& transport, const Sleeper& sleeper = real_sleeper());

/// Failed items score as empty hypotheses.
MetricReport score_transcript(const Transcript& transcript, std::span<const std::string> refs,
                              std::string label = {});

void write_transcript(std::ostream& out, const Transcript& transcript);
Transcript read_transcript(std::istream& in);

}  // namespace translit
