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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "subflow/rng.hpp"
#include "subflow/tensor.hpp"

namespace subflow {

enum class Activation { none, relu, tanh, sigmoid };

const char* to_string(Activation a);
Activation parse_activation(std::string_view name);

template <class Real>
BasicTensor<Real> activate(const BasicTensor<Real>& x, Activation a);

/// Fully connected stack. `hidden_activations` holds one entry per hidden
/// layer, or a single entry that applies to all of them.
struct DenseNetSpec {
  std::vector<std::size_t> layer_widths;
  std::vector<Activation> hidden_activations{Activation::relu};
  Activation output_activation = Activation::none;
  std::uint64_t seed = 0;

  void validate() const;
  Activation hidden_activation(std::size_t layer) const;
};

// Glorot-uniform draws in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
std::vector<double> glorot_uniform(std::size_t count, std::size_t fan_in, std::size_t fan_out, CounterRng& rng);

template <class Real>
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(DenseNetSpec spec);

  // x: [rows, input_width] -> [rows, output_width]
  BasicTensor<Real> forward(const BasicTensor<Real>& x) const;
  std::vector<BasicTensor<Real>> parameters() const;

  const DenseNetSpec& spec() const { return spec_; }
  std::size_t input_width() const { return spec_.layer_widths.front(); }
  std::size_t output_width() const { return spec_.layer_widths.back(); }

 private:
  DenseNetSpec spec_;
  std::vector<BasicTensor<Real>> weights_;
  std::vector<BasicTensor<Real>> biases_;
};

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 0;
  PadMode pad_mode = PadMode::zeros;
};

template <class Real>
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(ConvSpec spec, CounterRng& rng);

  BasicTensor<Real> forward(const BasicTensor<Real>& x) const;
  std::vector<BasicTensor<Real>> parameters() const { return {weight_, bias_}; }
  const ConvSpec& spec() const { return spec_; }
  // Frozen layers keep their values but stop accumulating gradients.
  void set_trainable(bool trainable);

 private:
  ConvSpec spec_;
  BasicTensor<Real> weight_;
  BasicTensor<Real> bias_;
};

// Copies parameter values across precisions (or between two instances).
template <class Dst, class Src>
void copy_parameter_values(const std::vector<BasicTensor<Src>>& from, const std::vector<BasicTensor<Dst>>& to) {
  if (from.size() != to.size()) throw std::invalid_argument("copy_parameter_values: count mismatch");
  for (std::size_t i = 0; i < from.size(); ++i) {
    BasicTensor<Dst> dst = to[i];
    auto d = dst.mutable_data();
    const auto s = from[i].data();
    if (d.size() != s.size()) throw std::invalid_argument("copy_parameter_values: size mismatch");
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = static_cast<Dst>(s[j]);
  }
}

template <class Real>
void zero_grads(const std::vector<BasicTensor<Real>>& params) {
  for (auto p : params) p.zero_grad();
}

extern template class DenseNet<float>;
extern template class DenseNet<double>;
extern template class Conv2dLayer<float>;
extern template class Conv2dLayer<double>;

}  // namespace subflow
