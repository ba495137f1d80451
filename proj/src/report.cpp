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

#include "translit/report.hpp"

#include <cmath>
#include <fstream>

#include "translit/common.hpp"
#include "translit/metrics.hpp"

namespace translit {

namespace {

struct Column {
  const char* key;
  const char* title;
};

constexpr Column kMlmColumns[] = {{"model_variant", "Model Variant"},
                                  {"trained_on", "Trained on"},
                                  {"tested_on", "Tested on"},
                                  {"without_mlm", "Without MLM"},
                                  {"with_mlm", "With MLM"}};

constexpr Column kAppendixText[] = {
    {"configuration", "Configuration"}, {"model", "Model"}, {"epoch", "Epoch"}};

constexpr Column kAppendixScores[] = {
    {"llm_rup_bleu", "LLM RUP BLEU"},
    {"llm_dakshina_bleu", "LLM Dakshina BLEU"},
    {"llm_rup_char_bleu", "LLM RUP Char BLEU"},
    {"llm_dakshina_char_bleu", "LLM Dakshina Char BLEU"},
    {"llm_rup_chrf", "LLM RUP CHRF"},
    {"llm_dakshina_chrf", "LLM Dakshina CHRF"},
    {"rup_bleu", "RUP BLEU"},
    {"dakshina_bleu", "Dakshina BLEU"},
    {"rup_char_bleu", "RUP Char BLEU"},
    {"dakshina_char_bleu", "Dakshina Char BLEU"},
    {"rup_chrf", "RUP CHRF"},
    {"dakshina_chrf", "Dakshina CHRF"}};

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

std::string score_cell(const nlohmann::json& cell, const std::filesystem::path& base_dir,
                       int decimals) {
  if (cell.is_number()) return format_number(cell.get<double>());
  if (cell.is_string()) return cell.get<std::string>();
  if (cell.is_null()) return "–";
  if (!cell.is_object() || !cell.contains("report")) {
    throw FormatError("score cell must be a number, a string, or a report reference");
  }
  std::filesystem::path path = cell.at("report").get<std::string>();
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metric report " + path.string());
  const MetricReport report = metric_report_from_json(nlohmann::json::parse(in));
  const std::string metric = cell.value("metric", std::string("char_bleu"));
  double value = 0.0;
  if (metric == "bleu") {
    value = report.bleu.score;
  } else if (metric == "char_bleu") {
    value = report.char_bleu.score;
  } else if (metric == "chrf") {
    value = report.chrf.score;
  } else {
    throw FormatError("unknown metric " + metric);
  }
  return format_number(round_to(value, decimals));
}

std::string text_cell(const nlohmann::json& row, const char* key) {
  const auto it = row.find(key);
  if (it == row.end() || it->is_null()) return "–";
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

ReportLayout parse_report_layout(std::string_view name) {
  if (name == "comparison") return ReportLayout::kComparison;
  if (name == "mlm") return ReportLayout::kMlm;
  if (name == "appendix") return ReportLayout::kAppendix;
  throw FormatError("unknown report layout: " + std::string(name));
}

std::string_view to_string(ReportLayout layout) {
  switch (layout) {
    case ReportLayout::kComparison: return "comparison";
    case ReportLayout::kMlm: return "mlm";
    case ReportLayout::kAppendix: return "appendix";
  }
  return "comparison";
}

ReportTable build_report(const nlohmann::json& spec, const std::filesystem::path& base_dir) {
  try {
    ReportTable table;
    table.layout = parse_report_layout(spec.value("layout", std::string("comparison")));
    table.title = spec.value("title", std::string{});
    const int decimals = spec.value("decimals", 3);
    const auto& rows = spec.at("rows");
    switch (table.layout) {
      case ReportLayout::kComparison:
        table.header = {spec.value("method_header", std::string("Method")),
                        spec.value("score_header", std::string("Score"))};
        for (const auto& r : rows) {
          table.rows.push_back({r.at("method").get<std::string>(), score_cell(r.at("score"), base_dir, decimals)});
        }
        break;
      case ReportLayout::kMlm:
        for (const auto& c : kMlmColumns) table.header.emplace_back(c.title);
        for (const auto& r : rows) {
          table.rows.push_back({text_cell(r, "model_variant"), text_cell(r, "trained_on"),
                                text_cell(r, "tested_on"),
                                score_cell(r.at("without_mlm"), base_dir, decimals),
                                score_cell(r.at("with_mlm"), base_dir, decimals)});
        }
        break;
      case ReportLayout::kAppendix:
        for (const auto& c : kAppendixText) table.header.emplace_back(c.title);
        for (const auto& c : kAppendixScores) table.header.emplace_back(c.title);
        for (const auto& r : rows) {
          std::vector<std::string> cells;
          for (const auto& c : kAppendixText) cells.push_back(text_cell(r, c.key));
          for (const auto& c : kAppendixScores) {
            const auto it = r.find(c.key);
            cells.push_back(it == r.end() ? "–" : score_cell(*it, base_dir, decimals));
          }
          table.rows.push_back(std::move(cells));
        }
        break;
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report description: ") + e.what());
  }
}

std::string to_markdown(const ReportTable& table) {
  std::string out;
  if (!table.title.empty()) out += "**" + table.title + "**\n\n";
  auto line = [&](const std::vector<std::string>& cells) {
    out += '|';
    for (const auto& c : cells) out += ' ' + c + " |";
    out += '\n';
  };
  line(table.header);
  out += '|';
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    const bool numeric = i >= (table.layout == ReportLayout::kComparison ? 1u : 3u);
    out += numeric ? " ---: |" : " --- |";
  }
  out += '\n';
  for (const auto& r : table.rows) line(r);
  return out;
}

std::string to_csv(const ReportTable& table) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_field(cells[i]);
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return out;
}

}  // namespace translit
