// Copyright 2026 The subflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "subflow/features.hpp"
#include "subflow/image.hpp"
#include "subflow/nn.hpp"
#include "subflow/textures.hpp"

namespace subflow {

struct EncoderConfig {
  std::uint64_t seed = 1;
  // Channels of the transfer tap used for embeddings and AdaIN (D).
  std::size_t style_dim = 32;
  std::size_t clip_dim = 64;
};

inline constexpr std::array<std::size_t, 4> kVggWidths{8, 16, 32, 64};

// Four conv blocks with a tap after each. Block 0 is a 1x1 convolution so its
// tap sees single pixels; later blocks are 3x3 with replicate padding and are
// preceded by 2x2 average pooling.
template <class Real>
class PseudoVggT {
 public:
  PseudoVggT() = default;
  explicit PseudoVggT(std::uint64_t seed, bool trainable = false);

  // images: [N, 3, H, W] in [0, 1]; H and W >= 8.
  std::vector<BasicTensor<Real>> taps(const BasicTensor<Real>& images) const;
  std::vector<BasicTensor<Real>> parameters() const;
  std::size_t tap_count() const { return blocks_.size(); }

 private:
  std::vector<Conv2dLayer<Real>> blocks_;
};

using PseudoVgg = PseudoVggT<float>;

struct TapStats {
  // [tap][channel]
  std::vector<std::vector<float>> mean;
  std::vector<std::vector<float>> std;
};

class VggEncoder {
 public:
  explicit VggEncoder(const EncoderConfig& config = {});

  const PseudoVgg& net() const { return net_; }
  std::size_t style_dim() const { return style_dim_; }
  // Index of the first tap wide enough to hold style_dim channels.
  std::size_t transfer_tap() const { return transfer_tap_; }
  // Length of a style vector: means then inverse-softplus stds of the
  // first style_dim channels of the transfer tap.
  std::size_t vector_dim() const { return 2 * style_dim_; }

  TapStats tap_stats(const Image& img) const;
  std::vector<float> style_vector(const Image& img) const;
  FeatureSet encode(const std::vector<Image>& images) const;

 private:
  PseudoVgg net_;
  std::size_t style_dim_;
  std::size_t transfer_tap_;
};

class ClipEncoder {
 public:
  explicit ClipEncoder(const EncoderConfig& config = {});

  std::size_t dim() const { return dim_; }
  std::vector<float> encode_one(const Image& img) const;
  FeatureSet encode(const std::vector<Image>& images) const;

 private:
  std::vector<float> pooled(const Image& img) const;

  std::vector<Conv2dLayer<float>> convs_;
  std::vector<float> projection_;  // dim x pooled width
  std::vector<float> baseline_;    // pooled response to a flat grey image
  std::size_t dim_;
};

std::vector<std::string> tokenize(const std::string& text);

// Hash-then-embed text encoder. Table row r is the normalised clip-like
// encoding of a seeded prototype texture, so a word and its prototype image
// land close together in the clip-like space.
class TextEncoder {
 public:
  static constexpr std::size_t kTableRows = 256;

  TextEncoder(const ClipEncoder& clip, std::uint64_t seed, int image_size = 32);

  std::size_t row_for(const std::string& token) const;
  TextureParams prototype(std::size_t row) const;
  FeatureSet encode(const std::vector<std::string>& tokens) const;

 private:
  const std::vector<float>& table_row(std::size_t row) const;

  const ClipEncoder* clip_;
  std::uint64_t seed_;
  int image_size_;
  mutable std::vector<std::vector<float>> rows_;
  mutable std::vector<float> norms_;
};

const std::vector<std::string>& concept_words();

struct ConceptPair {
  Image image;
  std::string caption;
};

// An image and a one-word caption generated from the same concept latent.
ConceptPair concept_pair(const TextEncoder& text, std::uint64_t seed, std::size_t index);

double softplus_inverse(double y);

extern template class PseudoVggT<float>;
extern template class PseudoVggT<double>;

}  // namespace subflow
