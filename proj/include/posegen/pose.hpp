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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace posegen {

// Canonical 128-slot layout. Slot semantics are fixed by index.
inline constexpr std::size_t kNumSlots = 128;
inline constexpr std::size_t kBodyBegin = 0, kBodyCount = 18;
inline constexpr std::size_t kFaceBegin = 18, kFaceCount = 68;
inline constexpr std::size_t kLeftHandBegin = 86, kHandCount = 21;
inline constexpr std::size_t kRightHandBegin = 107;

enum class Region { kBody, kFace, kLeftHand, kRightHand };

constexpr Region region_of(std::size_t slot) {
  if (slot < kFaceBegin) return Region::kBody;
  if (slot < kLeftHandBegin) return Region::kFace;
  if (slot < kRightHandBegin) return Region::kLeftHand;
  return Region::kRightHand;
}

/// 18-point body, OpenPose ordering.
enum BodyJoint : std::size_t {
  kNose = 0, kNeck, kRShoulder, kRElbow, kRWrist, kLShoulder, kLElbow, kLWrist,
  kRHip, kRKnee, kRAnkle, kLHip, kLKnee, kLAnkle, kREye, kLEye, kREar, kLEar,
};

/// The 17 drawn body limbs (OpenPose topology).
inline constexpr std::array<std::pair<std::size_t, std::size_t>, 17> kBodyEdges = {{
    {kNeck, kRShoulder}, {kNeck, kLShoulder}, {kRShoulder, kRElbow}, {kRElbow, kRWrist},
    {kLShoulder, kLElbow}, {kLElbow, kLWrist}, {kNeck, kRHip}, {kRHip, kRKnee},
    {kRKnee, kRAnkle}, {kNeck, kLHip}, {kLHip, kLKnee}, {kLKnee, kLAnkle},
    {kNeck, kNose}, {kNose, kREye}, {kREye, kREar}, {kNose, kLEye}, {kLEye, kLEar},
}};

/// Returns the landmark name of a slot, e.g. "r_elbow", "face_jaw_03", "left_hand_index_2".
inline std::string slot_name(std::size_t slot) {
  static const std::array<const char*, 18> body = {
      "nose",   "neck",   "r_shoulder", "r_elbow", "r_wrist", "l_shoulder",
      "l_elbow", "l_wrist", "r_hip",     "r_knee",  "r_ankle", "l_hip",
      "l_knee",  "l_ankle", "r_eye",     "l_eye",   "r_ear",   "l_ear"};
  auto two = [](std::size_t v) { return (v < 10 ? "0" : "") + std::to_string(v); };
  if (slot >= kNumSlots) throw std::out_of_range("slot " + std::to_string(slot) + " outside 0..127");
  switch (region_of(slot)) {
    case Region::kBody:
      return body[slot];
    case Region::kFace: {
      const std::size_t f = slot - kFaceBegin;
      struct Part { std::size_t begin, count; const char* name; };
      static const std::array<Part, 9> parts = {{{0, 17, "jaw"}, {17, 5, "r_brow"}, {22, 5, "l_brow"},
                                                 {27, 4, "nose_bridge"}, {31, 5, "nostril"},
                                                 {36, 6, "r_eye"}, {42, 6, "l_eye"},
                                                 {48, 12, "outer_lip"}, {60, 8, "inner_lip"}}};
      for (const auto& p : parts)
        if (f < p.begin + p.count) return std::string("face_") + p.name + "_" + two(f - p.begin);
      break;
    }
    case Region::kLeftHand:
    case Region::kRightHand: {
      const bool left = region_of(slot) == Region::kLeftHand;
      const std::size_t h = slot - (left ? kLeftHandBegin : kRightHandBegin);
      const std::string prefix = left ? "left_hand_" : "right_hand_";
      if (h == 0) return prefix + "wrist";
      static const std::array<const char*, 5> fingers = {"thumb", "index", "middle", "ring", "pinky"};
      return prefix + fingers[(h - 1) / 4] + "_" + std::to_string((h - 1) % 4 + 1);
    }
  }
  return {};
}

/**
 * One 2-D landmark in normalized image coordinates.
 *
 * A missing landmark is the placeholder (0, 0, false); a present one lies in
 * [0,1] x [0,1].
 */
class Keypoint {
 public:
  constexpr Keypoint() = default;

  static Keypoint present(double x, double y) {
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
      throw std::invalid_argument("keypoint (" + std::to_string(x) + ", " + std::to_string(y) +
                                  ") outside [0,1]x[0,1]");
    }
    return Keypoint(x, y, true);
  }
  static constexpr Keypoint absent() { return Keypoint(); }

  constexpr double x() const { return x_; }
  constexpr double y() const { return y_; }
  constexpr bool exists() const { return exists_; }

  friend constexpr bool operator==(const Keypoint&, const Keypoint&) = default;

 private:
  constexpr Keypoint(double x, double y, bool e) : x_(x), y_(y), exists_(e) {}
  double x_ = 0.0, y_ = 0.0;
  bool exists_ = false;
};

/// Exactly 128 keypoints in canonical slot order.
class Pose {
 public:
  using Slots = std::array<Keypoint, kNumSlots>;

  Pose() = default;
  explicit Pose(const Slots& slots) : slots_(slots) {}

  const Keypoint& operator[](std::size_t i) const { return slots_[i]; }
  const Slots& slots() const { return slots_; }
  static constexpr std::size_t size() { return kNumSlots; }

  std::size_t count_existing() const {
    return static_cast<std::size_t>(
        std::count_if(slots_.begin(), slots_.end(), [](const Keypoint& k) { return k.exists(); }));
  }

  friend bool operator==(const Pose&, const Pose&) = default;

 private:
  Slots slots_{};
};

struct PoseRecord {
  PoseRecord(std::string caption_in, Pose pose_in, std::optional<std::string> source = std::nullopt)
      : caption(std::move(caption_in)), pose(std::move(pose_in)), source_id(std::move(source)) {
    if (caption.empty()) throw std::invalid_argument("PoseRecord: caption must be non-empty");
  }

  std::string caption;
  Pose pose;
  std::optional<std::string> source_id;

  friend bool operator==(const PoseRecord&, const PoseRecord&) = default;
};

/// A pixel-space annotation point.
struct RawPoint {
  double x_px = 0.0;
  double y_px = 0.0;
  bool exists = false;
};

struct NormalizeResult {
  Pose pose;
  std::size_t clamped = 0;  ///< existing points that were outside the frame
};

/// Maps pixel coordinates into [0,1]^2 by dividing by the frame size.
/// Out-of-frame points are clamped and counted.
inline NormalizeResult normalize(std::span<const RawPoint> raw, double width, double height) {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw std::invalid_argument("normalize: width and height must be positive");
  }
  if (raw.size() != kNumSlots) {
    throw std::invalid_argument("normalize: expected 128 points (18 body, 68 face, 21 left hand, "
                                "21 right hand), got " + std::to_string(raw.size()));
  }
  NormalizeResult out;
  Pose::Slots slots{};
  for (std::size_t i = 0; i < kNumSlots; ++i) {
    if (!raw[i].exists) continue;
    const double x = raw[i].x_px / width;
    const double y = raw[i].y_px / height;
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw std::invalid_argument("normalize: non-finite coordinate at slot " + std::to_string(i));
    }
    const double cx = std::clamp(x, 0.0, 1.0);
    const double cy = std::clamp(y, 0.0, 1.0);
    if (cx != x || cy != y) ++out.clamped;
    slots[i] = Keypoint::present(cx, cy);
  }
  out.pose = Pose(slots);
  return out;
}

}  // namespace posegen
