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

// Text feature sequences consumed by the pose models.
//
// Toy encoder, fixed for all platforms:
//   1. bytes 'A'-'Z' are lowercased; a token is a maximal run of bytes that
//      are ASCII letters, ASCII digits or >= 0x80 (UTF-8 continuation and
//      lead bytes); everything else separates tokens.
//   2. row = FNV-1a-64(token bytes) mod 4096.
//   3. row r of the table is 64 standard normals drawn from
//      Rng(derive_seed(kToyTableSeed, r)) scaled by 1/sqrt(64).
//   4. at most 32 tokens are kept; remaining rows are zero padding.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "posegen/checkpoint.hpp"
#include "posegen/rng.hpp"
#include "posegen/tensor.hpp"

namespace posegen {

inline constexpr std::size_t kTextContext = 32;
inline constexpr std::size_t kToyTextDim = 64;
inline constexpr std::size_t kToyVocabRows = 4096;
inline constexpr std::uint64_t kToyTableSeed = 0x706f736567656e31ULL;

/// Padded [32, D] feature matrix; rows >= tokens_len are zero.
struct TextFeatures {
  std::size_t tokens_len = 1;
  Tensor<float> features{Shape{kTextContext, kToyTextDim}};

  std::size_t dim() const { return features.dim(1); }
  friend bool operator==(const TextFeatures&, const TextFeatures&) = default;
};

inline void check_feature_dim(const TextFeatures& f, std::size_t expected) {
  if (f.dim() != expected) {
    throw std::invalid_argument("text feature dim " + std::to_string(f.dim()) + " does not match model d_text " +
                                std::to_string(expected));
  }
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::vector<std::string> tokenize(std::string_view prompt) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : prompt) {
    const bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
    if (word) {
      cur.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::size_t toy_token_row(std::string_view token) { return fnv1a64(token) % kToyVocabRows; }

/// Row of the toy embedding table; computed on demand, so no table is stored.
inline std::vector<float> toy_table_row(std::size_t row) {
  Rng rng(derive_seed(kToyTableSeed, row));
  std::vector<float> out(kToyTextDim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kToyTextDim));
  for (float& v : out) v = static_cast<float>(rng.normal() * scale);
  return out;
}

class TextFeatureProvider {
 public:
  virtual ~TextFeatureProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual TextFeatures encode(std::string_view prompt) const = 0;
};

class ToyTextEncoder final : public TextFeatureProvider {
 public:
  std::size_t dim() const override { return kToyTextDim; }

  TextFeatures encode(std::string_view prompt) const override {
    TextFeatures f;
    const auto tokens = tokenize(prompt);
    const std::size_t n = std::min(tokens.size(), kTextContext);
    f.tokens_len = std::max<std::size_t>(n, 1);
    for (std::size_t t = 0; t < n; ++t) {
      const auto row = toy_table_row(toy_token_row(tokens[t]));
      for (std::size_t j = 0; j < kToyTextDim; ++j) f.features.at(t, j) = row[j];
    }
    return f;
  }
};

inline TextFeatures encode_toy(std::string_view prompt) { return ToyTextEncoder{}.encode(prompt); }

/// Pads an [n, D] matrix (1 <= n <= 32) to the fixed context.
inline TextFeatures features_from_matrix(const Tensor<float>& m) {
  if (m.rank() != 2) throw std::invalid_argument("text features must be rank 2, got " + shape_str(m.shape()));
  const std::size_t n = m.dim(0), d = m.dim(1);
  if (n < 1 || n > kTextContext || d < 1) {
    throw std::invalid_argument("text features must have 1..32 rows and D >= 1, got " + shape_str(m.shape()));
  }
  TextFeatures f;
  f.tokens_len = n;
  f.features = Tensor<float>(Shape{kTextContext, d});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const float v = m.at(r, j);
      if (!std::isfinite(v)) throw std::invalid_argument("text features contain a non-finite value");
      f.features.at(r, j) = v;
    }
  return f;
}

/// Writes the unpadded [tokens_len, D] matrix as tensor "features".
inline void save_features(const TextFeatures& f, const std::filesystem::path& path) {
  Tensor<float> m(Shape{f.tokens_len, f.dim()});
  for (std::size_t r = 0; r < f.tokens_len; ++r)
    for (std::size_t j = 0; j < f.dim(); ++j) m.at(r, j) = f.features.at(r, j);
  save_checkpoint(path, {{"features", std::move(m)}});
}

inline TextFeatures load_features(const std::filesystem::path& path) {
  return features_from_matrix(find_tensor(load_checkpoint(path), "features").tensor);
}

inline TextFeatures load_features(const std::filesystem::path& path, std::size_t expected_dim) {
  auto f = load_features(path);
  check_feature_dim(f, expected_dim);
  return f;
}

/// Provider backed by features precomputed elsewhere, keyed by prompt.
class PrecomputedTextProvider final : public TextFeatureProvider {
 public:
  explicit PrecomputedTextProvider(std::size_t dim) : dim_(dim) {}

  void insert(std::string prompt, TextFeatures f) {
    check_feature_dim(f, dim_);
    table_.insert_or_assign(std::move(prompt), std::move(f));
  }

  std::size_t dim() const override { return dim_; }

  TextFeatures encode(std::string_view prompt) const override {
    const auto it = table_.find(std::string(prompt));
    if (it == table_.end()) throw std::out_of_range("no precomputed features for prompt \"" + std::string(prompt) + "\"");
    return it->second;
  }

 private:
  std::size_t dim_;
  std::map<std::string, TextFeatures> table_;
};

}  // namespace posegen
