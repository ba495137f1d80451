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

#include "translit/manifest.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>

#include "translit/common.hpp"
#include "translit/digest.hpp"

#ifndef TRANSLIT_VERSION
#define TRANSLIT_VERSION "0.0.0"
#endif

namespace translit {

std::string_view toolkit_version() { return TRANSLIT_VERSION; }

namespace {

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void collect(const std::filesystem::path& path, std::vector<ArtifactDigest>& out) {
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back({f.string(), file_sha256(f)});
    return;
  }
  if (!std::filesystem::exists(path)) throw IoError("missing artifact " + path.string());
  out.push_back({path.string(), file_sha256(path)});
}

nlohmann::json digests(const std::vector<ArtifactDigest>& list) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : list) out.push_back({{"path", d.path}, {"sha256", d.sha256}});
  return out;
}

}  // namespace

RunManifest::RunManifest(std::string command)
    : command_(std::move(command)),
      started_(std::chrono::system_clock::now()),
      steady_start_(std::chrono::steady_clock::now()) {}

void RunManifest::add_input(const std::filesystem::path& path) { collect(path, inputs_); }

void RunManifest::add_output(const std::filesystem::path& path) { collect(path, outputs_); }

nlohmann::json RunManifest::to_json() const {
  return {{"command", command_},
          {"toolkit_version", toolkit_version()},
          {"config", config_},
          {"inputs", digests(inputs_)},
          {"outputs", digests(outputs_)},
          {"timings", {{"started_at", iso_time(started_)}, {"wall_seconds", wall_seconds_}}}};
}

void RunManifest::write(const std::filesystem::path& path) {
  wall_seconds_ =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - steady_start_).count();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << to_json().dump(2) << '\n';
}

}  // namespace translit
