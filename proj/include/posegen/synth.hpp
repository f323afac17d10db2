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

// Procedural (caption, pose) corpora. A record holds one person; for
// two-person scenes it holds one of the two (chosen uniformly), so the
// position of the next keypoint given the caption is bimodal in x.
// Caption grammar: docs/synthetic_corpus.md.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "posegen/pose.hpp"
#include "posegen/rng.hpp"

namespace posegen {

inline constexpr std::string_view kGrammarVersion = "posegen-synth-1";

enum class ArmState { kUp, kDown, kOut, kShakingHands };
enum class Position { kLeft, kCenter, kRight, kBothSides };

struct SceneSpec {
  int n_people = 1;
  ArmState arms = ArmState::kDown;
  Position position = Position::kCenter;
  bool face_present = false;
  bool hands_present = false;

  bool valid() const {
    if (n_people == 1) return arms != ArmState::kShakingHands && position != Position::kBothSides;
    if (n_people == 2) return position == Position::kBothSides;
    return false;
  }
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// Every valid spec, in a fixed order (36 one-person, then 16 two-person).
inline std::vector<SceneSpec> all_scene_specs() {
  std::vector<SceneSpec> out;
  for (Position p : {Position::kLeft, Position::kCenter, Position::kRight})
    for (ArmState a : {ArmState::kUp, ArmState::kDown, ArmState::kOut})
      for (int extras = 0; extras < 4; ++extras) out.push_back({1, a, p, (extras & 1) != 0, (extras & 2) != 0});
  for (ArmState a : {ArmState::kUp, ArmState::kDown, ArmState::kOut, ArmState::kShakingHands})
    for (int extras = 0; extras < 4; ++extras)
      out.push_back({2, a, Position::kBothSides, (extras & 1) != 0, (extras & 2) != 0});
  return out;
}

inline std::string caption_for(const SceneSpec& s) {
  if (!s.valid()) throw std::invalid_argument("caption_for: invalid scene spec");
  std::string c;
  if (s.arms == ArmState::kShakingHands) {
    c = "two people shaking hands";
  } else {
    c = s.n_people == 1 ? "one person " : "two people ";
    switch (s.position) {
      case Position::kLeft: c += "on the left"; break;
      case Position::kCenter: c += "in the center"; break;
      case Position::kRight: c += "on the right"; break;
      case Position::kBothSides: c += "on either side"; break;
    }
    c += s.arms == ArmState::kUp ? " with arms up" : s.arms == ArmState::kDown ? " with arms down" : " with arms out";
  }
  if (s.face_present && s.hands_present) {
    c += " showing face and hands";
  } else if (s.face_present) {
    c += " showing face";
  } else if (s.hands_present) {
    c += " showing hands";
  }
  return c;
}

/// Inverse of caption_for; nullopt for strings outside the grammar.
inline std::optional<SceneSpec> parse_caption(std::string_view caption) {
  for (const auto& s : all_scene_specs())
    if (caption_for(s) == caption) return s;
  return std::nullopt;
}

/// Prompt set used by the temperature and score-matrix evaluations.
inline const std::array<std::string, 5>& benchmark_prompts() {
  static const std::array<std::string, 5> p = {
      "two people shaking hands",
      "one person on the left with arms up",
      "one person in the center with arms out showing face",
      "two people on either side with arms down",
      "one person on the right with arms down showing face and hands",
  };
  return p;
}

struct SynthCorpus {
  std::vector<PoseRecord> records;
  std::uint64_t seed = 0;
  std::string grammar_version{kGrammarVersion};
};

inline constexpr double kBodyJitter = 0.01;
inline constexpr double kDetailJitter = 0.0025;

namespace detail {

struct Placement {
  double cx, neck_y, scale;
  int side;  // -1 person on the image left of a pair, +1 on the right, 0 alone
};

struct Sketch {
  std::array<std::array<double, 2>, kNumSlots> xy{};
  std::array<bool, kNumSlots> on{};
  void set(std::size_t slot, double x, double y) { xy[slot] = {x, y}, on[slot] = true; }
};

/// Offsets from the neck, in units of a scale-1 person. Positive x is the
/// person's left (image right).
inline void sketch_body(Sketch& sk, const Placement& p, ArmState arms) {
  auto put = [&](std::size_t j, double dx, double dy) { sk.set(j, p.cx + p.scale * dx, p.neck_y + p.scale * dy); };
  put(kNeck, 0, 0);
  put(kNose, 0, -0.09);
  put(kREye, -0.02, -0.11), put(kLEye, 0.02, -0.11);
  put(kREar, -0.04, -0.10), put(kLEar, 0.04, -0.10);
  put(kRShoulder, -0.07, 0), put(kLShoulder, 0.07, 0);
  put(kRHip, -0.04, 0.22), put(kLHip, 0.04, 0.22);
  put(kRKnee, -0.045, 0.36), put(kLKnee, 0.045, 0.36);
  put(kRAnkle, -0.045, 0.50), put(kLAnkle, 0.045, 0.50);
  auto arm = [&](std::size_t elbow, std::size_t wrist, double sgn, ArmState a) {
    switch (a) {
      case ArmState::kUp: put(elbow, sgn * 0.10, -0.10), put(wrist, sgn * 0.11, -0.21); break;
      case ArmState::kOut: put(elbow, sgn * 0.17, 0.0), put(wrist, sgn * 0.26, 0.0); break;
      case ArmState::kShakingHands: put(elbow, sgn * 0.19, 0.05), put(wrist, sgn * 0.31, 0.07); break;
      case ArmState::kDown: put(elbow, sgn * 0.09, 0.12), put(wrist, sgn * 0.10, 0.23); break;
    }
  };
  if (arms == ArmState::kShakingHands) {
    // The arm toward the partner reaches the middle; the other hangs down.
    arm(kLElbow, kLWrist, 1.0, p.side < 0 ? ArmState::kShakingHands : ArmState::kDown);
    arm(kRElbow, kRWrist, -1.0, p.side > 0 ? ArmState::kShakingHands : ArmState::kDown);
  } else {
    arm(kLElbow, kLWrist, 1.0, arms);
    arm(kRElbow, kRWrist, -1.0, arms);
  }
}

/// 68 landmarks around the nose: jaw, brows, nose bridge, nostrils, eyes, lips.
inline std::array<std::array<double, 2>, kFaceCount> face_template() {
  std::array<std::array<double, 2>, kFaceCount> f{};
  std::size_t k = 0;
  const double pi = std::numbers::pi;
  for (int i = 0; i < 17; ++i) {
    const double t = pi - pi * i / 16.0;
    f[k++] = {0.035 * std::cos(t), 0.005 + 0.04 * std::sin(t)};
  }
  for (int i = 0; i < 5; ++i) f[k++] = {-0.028 + 0.005 * i, -0.030 - 0.003 * std::sin(pi * i / 4.0)};
  for (int i = 0; i < 5; ++i) f[k++] = {0.008 + 0.005 * i, -0.030 - 0.003 * std::sin(pi * i / 4.0)};
  for (int i = 0; i < 4; ++i) f[k++] = {0.0, -0.020 + 0.006 * i};
  for (int i = 0; i < 5; ++i) f[k++] = {-0.008 + 0.004 * i, 0.006 + 0.002 * (i == 2)};
  for (double cx : {-0.018, 0.018})
    for (int i = 0; i < 6; ++i) {
      const double t = 2 * pi * i / 6.0;
      f[k++] = {cx - 0.007 * std::cos(t), -0.018 - 0.003 * std::sin(t)};
    }
  for (int i = 0; i < 12; ++i) {
    const double t = 2 * pi * i / 12.0;
    f[k++] = {-0.014 * std::cos(t), 0.025 - 0.006 * std::sin(t)};
  }
  for (int i = 0; i < 8; ++i) {
    const double t = 2 * pi * i / 8.0;
    f[k++] = {-0.009 * std::cos(t), 0.025 - 0.003 * std::sin(t)};
  }
  return f;
}

/// 21 hand landmarks from wrist and forearm direction: wrist, then four
/// joints per finger, thumb to pinky.
inline void sketch_hand(Sketch& sk, std::size_t base, std::array<double, 2> elbow, std::array<double, 2> wrist,
                        double scale) {
  double dx = wrist[0] - elbow[0], dy = wrist[1] - elbow[1];
  const double len = std::hypot(dx, dy);
  dx /= len, dy /= len;
  const double nx = -dy, ny = dx;
  sk.set(base, wrist[0], wrist[1]);
  for (int f = 0; f < 5; ++f) {
    const double spread = (f - 2) * 0.006;
    for (int j = 1; j <= 4; ++j) {
      const double along = (f == 0 ? 0.006 : 0.012) + 0.007 * j;
      const double across = spread * (1.0 + 0.35 * j);
      sk.set(base + 1 + 4 * f + (j - 1), wrist[0] + scale * (dx * along + nx * across),
             wrist[1] + scale * (dy * along + ny * across));
    }
  }
}

}  // namespace detail

/// Draws one pose for a spec. Body joints get N(0, 0.01^2) jitter per axis;
/// face and hand landmarks follow their jittered anchors with finer jitter.
inline Pose render_scene(const SceneSpec& spec, Rng& rng) {
  if (!spec.valid()) throw std::invalid_argument("render_scene: invalid scene spec");
  detail::Placement p{0.5, 0.35, 1.0, 0};
  if (spec.n_people == 2) {
    p.side = rng.uniform() < 0.5 ? -1 : 1;
    p = {p.side < 0 ? 0.25 : 0.75, 0.40, 0.8, p.side};
  } else {
    p.cx = spec.position == Position::kLeft ? 0.3 : spec.position == Position::kRight ? 0.7 : 0.5;
  }
  detail::Sketch sk;
  detail::sketch_body(sk, p, spec.arms);
  for (std::size_t j = 0; j < kBodyCount; ++j) {
    sk.xy[j][0] += rng.normal() * kBodyJitter;
    sk.xy[j][1] += rng.normal() * kBodyJitter;
  }
  if (spec.face_present) {
    static const auto tpl = detail::face_template();
    const auto nose = sk.xy[kNose];
    for (std::size_t i = 0; i < kFaceCount; ++i)
      sk.set(kFaceBegin + i, nose[0] + p.scale * tpl[i][0] + rng.normal() * kDetailJitter,
             nose[1] + p.scale * tpl[i][1] + rng.normal() * kDetailJitter);
  }
  if (spec.hands_present) {
    detail::sketch_hand(sk, kLeftHandBegin, sk.xy[kLElbow], sk.xy[kLWrist], p.scale);
    detail::sketch_hand(sk, kRightHandBegin, sk.xy[kRElbow], sk.xy[kRWrist], p.scale);
    for (std::size_t i = kLeftHandBegin + 1; i < kNumSlots; ++i) {
      if (i == kRightHandBegin) continue;
      sk.xy[i][0] += rng.normal() * kDetailJitter;
      sk.xy[i][1] += rng.normal() * kDetailJitter;
    }
  }
  Pose::Slots slots{};
  for (std::size_t i = 0; i < kNumSlots; ++i)
    if (sk.on[i]) slots[i] = Keypoint::present(std::clamp(sk.xy[i][0], 0.0, 1.0), std::clamp(sk.xy[i][1], 0.0, 1.0));
  return Pose(slots);
}

inline SceneSpec sample_scene_spec(Rng& rng) {
  static const auto specs = all_scene_specs();
  return specs[rng.index(specs.size())];
}

/// Record i depends only on (seed, i).
inline PoseRecord synth_record(std::uint64_t seed, std::size_t i) {
  Rng rng(derive_seed(seed, i));
  const auto spec = sample_scene_spec(rng);
  return PoseRecord(caption_for(spec), render_scene(spec, rng), "synth-" + std::to_string(seed) + "-" + std::to_string(i));
}

inline SynthCorpus generate_corpus(std::uint64_t seed, std::size_t size) {
  if (size == 0) throw std::invalid_argument("generate_corpus: size must be >= 1");
  SynthCorpus c;
  c.seed = seed;
  c.records.reserve(size);
  for (std::size_t i = 0; i < size; ++i) c.records.push_back(synth_record(seed, i));
  return c;
}

struct CorpusSplit {
  std::vector<PoseRecord> train, eval;
  std::vector<std::size_t> train_indices, eval_indices;
};

/// Seeded shuffle, then the first round(train_frac * n) records train.
inline CorpusSplit split(const std::vector<PoseRecord>& records, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw std::invalid_argument("split: train_frac must lie in (0, 1), got " + std::to_string(train_frac));
  }
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x73706c6974ULL));
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(records.size())));
  CorpusSplit out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& idx = k < n_train ? out.train_indices : out.eval_indices;
    auto& dst = k < n_train ? out.train : out.eval;
    idx.push_back(order[k]);
    dst.push_back(records[order[k]]);
  }
  return out;
}

inline CorpusSplit split(const SynthCorpus& corpus, double train_frac) {
  return split(corpus.records, train_frac, corpus.seed);
}

}  // namespace posegen
