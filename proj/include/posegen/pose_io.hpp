// Copyright 2026 The Posegen Authors.
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

// JSON-lines pose records, one per line:
//   {"caption": str, "keypoints": [[x, y, e] x 128], "source_id": str?}
// e is 0/1 (booleans are accepted on input).

#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "posegen/pose.hpp"

namespace posegen {

class RecordFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json pose_to_json(const Pose& pose) {
  nlohmann::json kps = nlohmann::json::array();
  for (const auto& k : pose.slots()) kps.push_back({k.x(), k.y(), k.exists() ? 1 : 0});
  return kps;
}

inline nlohmann::json record_to_json(const PoseRecord& r) {
  nlohmann::json j;
  j["caption"] = r.caption;
  j["keypoints"] = pose_to_json(r.pose);
  if (r.source_id) j["source_id"] = *r.source_id;
  return j;
}

namespace detail {

inline Pose pose_from_json(const nlohmann::json& kps, std::size_t line) {
  const auto at = " at line " + std::to_string(line);
  if (!kps.is_array()) throw RecordFormatError("\"keypoints\" must be an array" + at);
  if (kps.size() != kNumSlots) {
    throw RecordFormatError("expected 128 slots, got " + std::to_string(kps.size()) + at);
  }
  Pose::Slots slots{};
  for (std::size_t i = 0; i < kNumSlots; ++i) {
    const auto& p = kps[i];
    if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() ||
        !(p[2].is_number() || p[2].is_boolean())) {
      throw RecordFormatError("slot " + std::to_string(i) + " must be [x, y, e]" + at);
    }
    const bool exists = p[2].is_boolean() ? p[2].get<bool>() : p[2].get<double>() != 0.0;
    if (!exists) continue;
    const double x = p[0].get<double>(), y = p[1].get<double>();
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
      throw RecordFormatError("slot " + std::to_string(i) + " coordinates outside [0,1]" + at);
    }
    slots[i] = Keypoint::present(x, y);
  }
  return Pose(slots);
}

}  // namespace detail

inline PoseRecord record_from_json(const nlohmann::json& j, std::size_t line = 0) {
  const auto at = " at line " + std::to_string(line);
  if (!j.is_object()) throw RecordFormatError("record must be a JSON object" + at);
  if (!j.contains("caption") || !j["caption"].is_string()) {
    throw RecordFormatError("missing string \"caption\"" + at);
  }
  const auto caption = j["caption"].get<std::string>();
  if (caption.empty()) throw RecordFormatError("empty caption" + at);
  if (!j.contains("keypoints")) throw RecordFormatError("missing \"keypoints\"" + at);
  std::optional<std::string> source;
  if (j.contains("source_id") && !j["source_id"].is_null()) {
    if (!j["source_id"].is_string()) throw RecordFormatError("\"source_id\" must be a string" + at);
    source = j["source_id"].get<std::string>();
  }
  return PoseRecord(caption, detail::pose_from_json(j["keypoints"], line), std::move(source));
}

inline std::vector<PoseRecord> read_records(std::istream& in) {
  std::vector<PoseRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw RecordFormatError("malformed JSON at line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(record_from_json(j, lineno));
  }
  return out;
}

inline void write_records(std::ostream& out, const std::vector<PoseRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

inline std::vector<PoseRecord> load_records(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw RecordFormatError("cannot open records file " + path.string());
  return read_records(f);
}

inline void save_records(const std::vector<PoseRecord>& records, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw RecordFormatError("cannot open " + path.string() + " for writing");
  write_records(f, records);
  if (!f) throw RecordFormatError("write failed for " + path.string());
}

}  // namespace posegen
