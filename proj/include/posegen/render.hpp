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
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "posegen/pose.hpp"

namespace posegen {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

inline std::string to_hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

/// Colors and stroke sizes. Sizes are fractions of the canvas edge.
struct RenderStyle {
  std::array<Rgb, 17> limb_colors = {{
      {255, 0, 0},   {255, 85, 0},   {255, 170, 0}, {255, 255, 0}, {170, 255, 0}, {85, 255, 0},
      {0, 255, 0},   {0, 255, 85},   {0, 255, 170}, {0, 255, 255}, {0, 170, 255}, {0, 85, 255},
      {0, 0, 255},   {85, 0, 255},   {170, 0, 255}, {255, 0, 255}, {255, 0, 170},
  }};
  Rgb joint_color{255, 255, 255};
  Rgb face_color{255, 255, 255};
  std::array<Rgb, 5> finger_colors = {{{255, 60, 60}, {255, 200, 0}, {60, 255, 60}, {0, 200, 255}, {200, 60, 255}}};
  Rgb background{0, 0, 0};
  double limb_width = 0.008;
  double joint_radius = 0.008;
  double face_radius = 0.0025;
  double hand_width = 0.003;
  double hand_radius = 0.003;
};

/// A segment or dot to draw, in normalized coordinates.
struct Primitive {
  enum class Kind { kLimb, kJoint, kFaceDot, kFinger, kHandDot } kind;
  double x0, y0, x1, y1;  // dots use (x0, y0)
  Rgb color;
};

/// Drawing list for a pose, in draw order. Missing points and any segment
/// touching one are omitted.
inline std::vector<Primitive> pose_primitives(const Pose& pose, const RenderStyle& style = {}) {
  std::vector<Primitive> out;
  using K = Primitive::Kind;
  for (std::size_t e = 0; e < kBodyEdges.size(); ++e) {
    const auto& a = pose[kBodyEdges[e].first];
    const auto& b = pose[kBodyEdges[e].second];
    if (a.exists() && b.exists()) out.push_back({K::kLimb, a.x(), a.y(), b.x(), b.y(), style.limb_colors[e]});
  }
  for (std::size_t i = kBodyBegin; i < kBodyBegin + kBodyCount; ++i)
    if (pose[i].exists()) out.push_back({K::kJoint, pose[i].x(), pose[i].y(), 0, 0, style.joint_color});
  for (std::size_t i = kFaceBegin; i < kFaceBegin + kFaceCount; ++i)
    if (pose[i].exists()) out.push_back({K::kFaceDot, pose[i].x(), pose[i].y(), 0, 0, style.face_color});
  for (std::size_t base : {kLeftHandBegin, kRightHandBegin}) {
    for (std::size_t f = 0; f < 5; ++f) {
      std::size_t prev = base;
      for (std::size_t j = 0; j < 4; ++j) {
        const std::size_t cur = base + 1 + 4 * f + j;
        const auto& a = pose[prev];
        const auto& b = pose[cur];
        if (a.exists() && b.exists())
          out.push_back({K::kFinger, a.x(), a.y(), b.x(), b.y(), style.finger_colors[f]});
        prev = cur;
      }
    }
    for (std::size_t i = base; i < base + kHandCount; ++i)
      if (pose[i].exists()) out.push_back({K::kHandDot, pose[i].x(), pose[i].y(), 0, 0, style.joint_color});
  }
  return out;
}

/// Deterministic SVG document of the pose on a square canvas.
inline std::string render_svg(const Pose& pose, int size, const RenderStyle& style = {}) {
  if (size < 64) throw std::invalid_argument("render_svg: size must be >= 64, got " + std::to_string(size));
  const double s = size;
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n",
                size, size, size, size);
  out += buf;
  std::snprintf(buf, sizeof(buf), "<rect class=\"background\" width=\"%d\" height=\"%d\" fill=\"%s\"/>\n", size,
                size, to_hex(style.background).c_str());
  out += buf;
  using K = Primitive::Kind;
  for (const auto& p : pose_primitives(pose, style)) {
    switch (p.kind) {
      case K::kLimb:
      case K::kFinger:
        std::snprintf(buf, sizeof(buf),
                      "<line class=\"%s\" x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" "
                      "stroke-width=\"%.2f\" stroke-linecap=\"round\"/>\n",
                      p.kind == K::kLimb ? "limb" : "finger", p.x0 * s, p.y0 * s, p.x1 * s, p.y1 * s,
                      to_hex(p.color).c_str(), (p.kind == K::kLimb ? style.limb_width : style.hand_width) * s);
        break;
      case K::kJoint:
      case K::kFaceDot:
      case K::kHandDot: {
        const char* cls = p.kind == K::kJoint ? "joint" : p.kind == K::kFaceDot ? "face" : "hand";
        const double r = p.kind == K::kJoint ? style.joint_radius : p.kind == K::kFaceDot ? style.face_radius
                                                                                          : style.hand_radius;
        std::snprintf(buf, sizeof(buf), "<circle class=\"%s\" cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"%s\"/>\n",
                      cls, p.x0 * s, p.y0 * s, r * s, to_hex(p.color).c_str());
        break;
      }
    }
    out += buf;
  }
  out += "</svg>\n";
  return out;
}

/// 8-bit RGB raster, row-major.
struct RgbImage {
  int width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // 3 bytes per pixel
};

namespace detail {

inline void stamp_disk(RgbImage& img, double cx, double cy, double r, Rgb c) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + r)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) {
        auto* px = &img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3];
        px[0] = c.r, px[1] = c.g, px[2] = c.b;
      }
    }
}

inline void stroke(RgbImage& img, double x0, double y0, double x1, double y1, double width, Rgb c) {
  const double len = std::hypot(x1 - x0, y1 - y0);
  const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
  const double r = std::max(0.5, width / 2.0);
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    stamp_disk(img, x0 + t * (x1 - x0), y0 + t * (y1 - y0), r, c);
  }
}

}  // namespace detail

/// Rasterizes the same drawing list used for SVG output.
inline RgbImage rasterize(const Pose& pose, int size, const RenderStyle& style = {}) {
  if (size < 64) throw std::invalid_argument("rasterize: size must be >= 64, got " + std::to_string(size));
  RgbImage img{size, size, std::vector<std::uint8_t>(static_cast<std::size_t>(size) * size * 3)};
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = style.background.r, img.pixels[i + 1] = style.background.g, img.pixels[i + 2] = style.background.b;
  }
  const double s = size;
  using K = Primitive::Kind;
  for (const auto& p : pose_primitives(pose, style)) {
    switch (p.kind) {
      case K::kLimb: detail::stroke(img, p.x0 * s, p.y0 * s, p.x1 * s, p.y1 * s, style.limb_width * s, p.color); break;
      case K::kFinger: detail::stroke(img, p.x0 * s, p.y0 * s, p.x1 * s, p.y1 * s, style.hand_width * s, p.color); break;
      case K::kJoint: detail::stamp_disk(img, p.x0 * s, p.y0 * s, std::max(1.0, style.joint_radius * s), p.color); break;
      case K::kFaceDot: detail::stamp_disk(img, p.x0 * s, p.y0 * s, std::max(1.0, style.face_radius * s), p.color); break;
      case K::kHandDot: detail::stamp_disk(img, p.x0 * s, p.y0 * s, std::max(1.0, style.hand_radius * s), p.color); break;
    }
  }
  return img;
}

}  // namespace posegen
