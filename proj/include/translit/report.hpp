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

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace translit {

/// comparison: Method | Score (single-metric method comparison).
/// mlm: Model Variant | Trained on | Tested on | Without MLM | With MLM.
/// appendix: Configuration | Model | Epoch | twelve score columns.
enum class ReportLayout { kComparison, kMlm, kAppendix };

ReportLayout parse_report_layout(std::string_view name);
std::string_view to_string(ReportLayout layout);

struct ReportTable {
  ReportLayout layout = ReportLayout::kComparison;
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Builds a table from a report description:
///   {"layout": ..., "title": ..., "score_header": ..., "decimals": 3,
///    "rows": [...]}
/// Every score cell is either a literal number, printed in shortest
/// round-trip form, or {"report": <MetricReport JSON path>, "metric":
/// "bleu"|"char_bleu"|"chrf"}, rounded to `decimals`. Relative report
/// paths resolve against `base_dir`. Throws FormatError on bad input.
ReportTable build_report(const nlohmann::json& spec, const std::filesystem::path& base_dir = {});

std::string to_markdown(const ReportTable& table);
/// RFC 4180 quoting.
std::string to_csv(const ReportTable& table);

}  // namespace translit
