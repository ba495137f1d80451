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

#include "translit/llm_client.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "translit/corpus.hpp"

namespace translit {

void LlmConfig::validate() const {
  if (model.empty()) throw PreconditionError("model name is empty");
  if (max_retries < 0) throw PreconditionError("max_retries must be >= 0");
  if (backoff_factor < 1.0) throw PreconditionError("backoff_factor must be >= 1");
  if (prompt_template_id != kPromptTemplateId) {
    throw PreconditionError("unknown prompt template: " + prompt_template_id);
  }
  if (fixed_sampling && (temperature != 1.0 || top_p != 1.0)) {
    throw PreconditionError("fixed sampling requires temperature=1 and top_p=1");
  }
}

namespace {

std::string_view script_name(std::string_view lang) {
  return lang == kUrdu ? "Urdu script" : "Roman Urdu";
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

std::string render_prompt(const LlmItem& item, std::string_view template_id) {
  if (template_id != kPromptTemplateId) {
    throw PreconditionError("unknown prompt template: " + std::string(template_id));
  }
  std::string prompt(kPromptTemplate);
  replace_all(prompt, "{source_script}", script_name(input_lang(item.direction)));
  replace_all(prompt, "{target_script}", script_name(output_lang(item.direction)));
  replace_all(prompt, "{text}", item.text);
  return prompt;
}

nlohmann::json build_request(const LlmItem& item, const LlmConfig& config) {
  return {{"model", config.model},
          {"messages", nlohmann::json::array(
                           {{{"role", "user"}, {"content", render_prompt(item, config.prompt_template_id)}}})},
          {"temperature", config.temperature},
          {"top_p", config.top_p}};
}

std::string extract_transliteration(std::string_view response) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : response) {
    if (c == '\n') {
      lines.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  lines.push_back(std::move(cur));
  static const std::string_view kQuotes[] = {"\"", "'", "`", "\xE2\x80\x9C", "\xE2\x80\x9D",
                                             "\xE2\x80\x98", "\xE2\x80\x99", "\xC2\xAB", "\xC2\xBB"};
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::string line = normalize(*it);
    if (line.empty() || line.back() == ':') continue;
    bool stripped = true;
    while (stripped && !line.empty()) {
      stripped = false;
      for (auto q : kQuotes) {
        if (line.starts_with(q)) {
          line.erase(0, q.size());
          stripped = true;
        }
        if (line.ends_with(q)) {
          line.erase(line.size() - q.size());
          stripped = true;
        }
      }
    }
    line = normalize(line);
    if (!line.empty()) return line;
  }
  return {};
}

MockTransport MockTransport::from_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mock fixture " + path.string());
  return parse(in);
}

MockTransport MockTransport::parse(std::istream& in) {
  MockTransport t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Entry e;
      e.response = j.value("response", std::string{});
      e.latency_ms = j.value("latency_ms", 0.0);
      e.fail = j.value("fail", false);
      t.add(j.at("input").get<std::string>(), std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("mock fixture line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return t;
}

void MockTransport::add(const std::string& input, Entry entry) {
  queues_[input].push_back(std::move(entry));
}

TransportReply MockTransport::send(const nlohmann::json&, const LlmItem& item) {
  ++requests_;
  TransportReply reply;
  auto it = queues_.find(item.text);
  if (it == queues_.end() || it->second.empty()) {
    reply.status = TransportReply::Status::kFailed;
    reply.error = "no fixture response";
    return reply;
  }
  Entry e = std::move(it->second.front());
  it->second.pop_front();
  reply.latency_ms = e.latency_ms;
  if (e.fail) {
    reply.status = TransportReply::Status::kRetryable;
    reply.error = "injected failure";
  } else {
    reply.content = std::move(e.response);
  }
  return reply;
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Transcript transliterate_batch(std::span<const LlmItem> items, const LlmConfig& config,
                               Transport& transport, const Sleeper& sleeper) {
  config.validate();
  Transcript t;
  t.template_id = config.prompt_template_id;
  t.model = config.model;
  for (const auto& item : items) {
    TranscriptEntry entry;
    entry.input = item.text;
    entry.direction = item.direction;
    const auto request = build_request(item, config);
    auto backoff = config.initial_backoff;
    for (int attempt = 0;; ++attempt) {
      const TransportReply reply = transport.send(request, item);
      entry.latency_ms = reply.latency_ms;
      if (reply.status == TransportReply::Status::kAuth) throw AuthError(reply.error);
      if (reply.status == TransportReply::Status::kOk) {
        entry.raw_response = reply.content;
        entry.extracted = extract_transliteration(reply.content);
        if (entry.extracted.empty()) {
          entry.failed = true;
          entry.error = "no transliteration in response";
        }
        break;
      }
      if (reply.status == TransportReply::Status::kRetryable && attempt < config.max_retries) {
        ++entry.retries;
        sleeper(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<std::int64_t>(static_cast<double>(backoff.count()) * config.backoff_factor));
        continue;
      }
      entry.failed = true;
      entry.error = reply.status == TransportReply::Status::kRetryable
                        ? "retries exhausted: " + reply.error
                        : reply.error;
      break;
    }
    t.entries.push_back(std::move(entry));
  }
  return t;
}

MetricReport score_transcript(const Transcript& transcript, std::span<const std::string> refs,
                              std::string label) {
  if (transcript.entries.size() != refs.size()) {
    throw PreconditionError("transcript and references are not aligned");
  }
  std::vector<std::string> hyps;
  hyps.reserve(refs.size());
  for (const auto& e : transcript.entries) hyps.push_back(e.failed ? std::string() : e.extracted);
  return evaluate_metrics(hyps, refs, std::move(label));
}

void write_transcript(std::ostream& out, const Transcript& t) {
  out << nlohmann::json{{"kind", "header"}, {"template_id", t.template_id}, {"model", t.model}}.dump()
      << '\n';
  for (const auto& e : t.entries) {
    out << nlohmann::json{{"kind", "item"},
                          {"input", e.input},
                          {"direction", to_string(e.direction)},
                          {"raw_response", e.raw_response},
                          {"extracted", e.extracted},
                          {"latency_ms", e.latency_ms},
                          {"retries", e.retries},
                          {"failed", e.failed},
                          {"error", e.error}}
               .dump()
        << '\n';
  }
}

Transcript read_transcript(std::istream& in) {
  Transcript t;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "header") {
        t.template_id = j.at("template_id").get<std::string>();
        t.model = j.at("model").get<std::string>();
        header = true;
        continue;
      }
      TranscriptEntry e;
      e.input = j.at("input").get<std::string>();
      e.direction = parse_direction(j.at("direction").get<std::string>());
      e.raw_response = j.at("raw_response").get<std::string>();
      e.extracted = j.at("extracted").get<std::string>();
      e.latency_ms = j.at("latency_ms").get<double>();
      e.retries = j.at("retries").get<int>();
      e.failed = j.at("failed").get<bool>();
      e.error = j.value("error", std::string{});
      t.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) throw FormatError("transcript has no header line");
  return t;
}

}  // namespace translit
