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
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace translit {

std::string_view toolkit_version();

struct ArtifactDigest {
  std::string path;
  std::string sha256;
};

/// Provenance record written by every CLI stage. Timestamps live here
/// and nowhere else, so stage outputs stay byte-identical across reruns.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  /// Files are hashed; directories contribute every regular file inside.
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);

  const std::vector<ArtifactDigest>& inputs() const { return inputs_; }
  const std::vector<ArtifactDigest>& outputs() const { return outputs_; }

  nlohmann::json to_json() const;
  /// Stamps the end time and writes the manifest as JSON.
  void write(const std::filesystem::path& path);

 private:
  std::string command_;
  nlohmann::json config_ = nlohmann::json::object();
  std::vector<ArtifactDigest> inputs_;
  std::vector<ArtifactDigest> outputs_;
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point steady_start_;
  double wall_seconds_ = 0.0;
};

}  // namespace translit
