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

#include "subflow/nn.hpp"

#include <cmath>

#include "subflow/adam.hpp"
#include "subflow/error.hpp"

namespace subflow {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "none";
}

Activation parse_activation(std::string_view name) {
  if (name == "none") return Activation::none;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

template <class Real>
BasicTensor<Real> activate(const BasicTensor<Real>& x, Activation a) {
  switch (a) {
    case Activation::none: return x;
    case Activation::relu: return relu(x);
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
  }
  return x;
}

template Tensor activate<float>(const Tensor&, Activation);
template TensorD activate<double>(const TensorD&, Activation);

void DenseNetSpec::validate() const {
  if (layer_widths.size() < 2) throw ValidationError("DenseNetSpec: need at least input and output widths");
  for (std::size_t w : layer_widths) {
    if (w == 0) throw ValidationError("DenseNetSpec: layer widths must be positive");
  }
  const std::size_t hidden = layer_widths.size() - 2;
  if (hidden > 0 && hidden_activations.size() != 1 && hidden_activations.size() != hidden) {
    throw ValidationError("DenseNetSpec: " + std::to_string(hidden_activations.size()) +
                          " activations for " + std::to_string(hidden) + " hidden layers");
  }
}

Activation DenseNetSpec::hidden_activation(std::size_t layer) const {
  if (hidden_activations.empty()) return Activation::none;
  return hidden_activations.size() == 1 ? hidden_activations[0] : hidden_activations.at(layer);
}

std::vector<double> glorot_uniform(std::size_t count, std::size_t fan_in, std::size_t fan_out, CounterRng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> out(count);
  for (auto& v : out) v = rng.uniform(-bound, bound);
  return out;
}

template <class Real>
DenseNet<Real>::DenseNet(DenseNetSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const auto& w = spec_.layer_widths;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    CounterRng rng(spec_.seed, "dense/" + std::to_string(l));
    const auto init = glorot_uniform(w[l] * w[l + 1], w[l], w[l + 1], rng);
    weights_.push_back(BasicTensor<Real>::from({w[l], w[l + 1]}, std::vector<Real>(init.begin(), init.end()), true));
    biases_.push_back(BasicTensor<Real>::zeros({w[l + 1]}, true));
  }
}

template <class Real>
BasicTensor<Real> DenseNet<Real>::forward(const BasicTensor<Real>& x) const {
  if (x.rank() != 2 || x.dim(1) != input_width()) {
    throw ValidationError("DenseNet: input " + shape_string(x.shape()) + " does not match width " +
                          std::to_string(input_width()));
  }
  BasicTensor<Real> h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = add_bias(matmul(h, weights_[l]), biases_[l]);
    const bool last = l + 1 == weights_.size();
    h = activate(h, last ? spec_.output_activation : spec_.hidden_activation(l));
  }
  return h;
}

template <class Real>
std::vector<BasicTensor<Real>> DenseNet<Real>::parameters() const {
  std::vector<BasicTensor<Real>> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(weights_[l]);
    out.push_back(biases_[l]);
  }
  return out;
}

template <class Real>
Conv2dLayer<Real>::Conv2dLayer(ConvSpec spec, CounterRng& rng) : spec_(spec) {
  if (spec_.in_channels == 0 || spec_.out_channels == 0 || spec_.kernel == 0 || spec_.stride == 0) {
    throw ValidationError("Conv2dLayer: channel counts, kernel and stride must be positive");
  }
  const std::size_t k2 = spec_.kernel * spec_.kernel;
  const auto init = glorot_uniform(spec_.out_channels * spec_.in_channels * k2, spec_.in_channels * k2,
                                   spec_.out_channels * k2, rng);
  weight_ = BasicTensor<Real>::from({spec_.out_channels, spec_.in_channels, spec_.kernel, spec_.kernel},
                                    std::vector<Real>(init.begin(), init.end()), true);
  bias_ = BasicTensor<Real>::zeros({spec_.out_channels}, true);
}

template <class Real>
BasicTensor<Real> Conv2dLayer<Real>::forward(const BasicTensor<Real>& x) const {
  return conv2d(x, weight_, bias_, Conv2dGeometry{spec_.stride, spec_.pad, spec_.pad_mode});
}

template <class Real>
void Conv2dLayer<Real>::set_trainable(bool trainable) {
  const auto w = weight_.data();
  const auto b = bias_.data();
  weight_ = BasicTensor<Real>::from(weight_.shape(), std::vector<Real>(w.begin(), w.end()), trainable);
  bias_ = BasicTensor<Real>::from(bias_.shape(), std::vector<Real>(b.begin(), b.end()), trainable);
}

template class DenseNet<float>;
template class DenseNet<double>;
template class Conv2dLayer<float>;
template class Conv2dLayer<double>;

// ---- Adam ---------------------------------------------------------------

void adam_step(const std::vector<Tensor>& params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0f);
      state.second_moment.emplace_back(p.size(), 0.0f);
    }
  }
  if (state.first_moment.size() != params.size()) throw ValidationError("adam_step: parameter list changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw ValidationError("adam_step: parameter " + std::to_string(i) + " " + shape_string(params[i].shape()) +
                            " has no gradient");
    }
    if (state.first_moment[i].size() != params[i].size()) throw ValidationError("adam_step: moment/parameter size mismatch");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(state.beta1), t));
  const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(state.beta2), t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto value = p.mutable_data();
    const auto grad = p.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const float g = grad[j];
      m[j] = state.beta1 * m[j] + (1.0f - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0f - state.beta2) * g * g;
      const float m_hat = m[j] / c1;
      const float v_hat = v[j] / c2;
      value[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

Adam::Adam(std::vector<Tensor> params, float learning_rate) : params_(std::move(params)) {
  state_.learning_rate = learning_rate;
}

void Adam::zero_grad() { zero_grads(params_); }

}  // namespace subflow
