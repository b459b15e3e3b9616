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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace subflow {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Row-compressed sparse matrix with float values. Used for the linear map from
// per-Gaussian attributes to composited pixels.
struct SparseRows {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> offsets;  // rows + 1 entries
  std::vector<std::uint32_t> indices;
  std::vector<float> values;
};

template <class Real>
struct TensorNode {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::string op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads node.grad and accumulates into the parents' grads.
  std::function<void(TensorNode&)> backward;
};

/// Dense row-major array that records the operations applied to it when any
/// input requires a gradient. Copies share the underlying node.
template <class Real>
class BasicTensor {
 public:
  using value_type = Real;
  using Node = TensorNode<Real>;

  BasicTensor() = default;
  explicit BasicTensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, Real fill, bool requires_grad = false);
  static BasicTensor from(Shape shape, std::vector<Real> data, bool requires_grad = false);
  static BasicTensor scalar(Real v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const Real> data() const { return node_->value; }
  // Leaf tensors only (parameters, inputs); ops never mutate their inputs.
  std::span<Real> mutable_data();

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const Real> grad() const { return node_->grad; }
  std::span<Real> mutable_grad();
  void zero_grad();

  Real item() const;
  Real operator[](std::size_t i) const { return node_->value[i]; }
  BasicTensor detach() const;
  const std::string& op() const { return node_->op; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// Disables tape recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Reverse sweep from a scalar loss. Leaf gradients accumulate across calls;
// intermediate gradients are reset on every call.
template <class Real>
void backward(const BasicTensor<Real>& loss);

enum class PadMode { zeros, replicate };

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
  PadMode pad_mode = PadMode::zeros;
};

// ---- operations --------------------------------------------------------
// Shapes are checked; a mismatch throws ValidationError naming the op.

template <class Real> BasicTensor<Real> matmul(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <class Real> BasicTensor<Real> add(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <class Real> BasicTensor<Real> sub(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <class Real> BasicTensor<Real> mul(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
// a[m, n] + bias[n] broadcast over rows.
template <class Real> BasicTensor<Real> add_bias(const BasicTensor<Real>& a, const BasicTensor<Real>& bias);
template <class Real> BasicTensor<Real> scale(const BasicTensor<Real>& a, Real s);
template <class Real> BasicTensor<Real> add_scalar(const BasicTensor<Real>& a, Real s);

template <class Real> BasicTensor<Real> relu(const BasicTensor<Real>& a);
template <class Real> BasicTensor<Real> leaky_relu(const BasicTensor<Real>& a, Real slope);
template <class Real> BasicTensor<Real> tanh(const BasicTensor<Real>& a);
template <class Real> BasicTensor<Real> sigmoid(const BasicTensor<Real>& a);
template <class Real> BasicTensor<Real> softplus(const BasicTensor<Real>& a);
template <class Real> BasicTensor<Real> square(const BasicTensor<Real>& a);
// log(clamp(a, lo, hi)); zero gradient where the clamp is active.
template <class Real> BasicTensor<Real> log_clamped(const BasicTensor<Real>& a, Real lo, Real hi);

template <class Real> BasicTensor<Real> sum(const BasicTensor<Real>& a);
template <class Real> BasicTensor<Real> mean(const BasicTensor<Real>& a);
template <class Real> BasicTensor<Real> mse(const BasicTensor<Real>& a, const BasicTensor<Real>& b);

template <class Real> BasicTensor<Real> reshape(const BasicTensor<Real>& a, Shape shape);
template <class Real> BasicTensor<Real> transpose2d(const BasicTensor<Real>& a);
template <class Real> BasicTensor<Real> concat_cols(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <class Real> BasicTensor<Real> slice_cols(const BasicTensor<Real>& a, std::size_t start, std::size_t count);

// x[N, C, H, W] * weight[O, C, k, k] + bias[O] -> [N, O, H', W'].
template <class Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>& bias, Conv2dGeometry geometry);
// 2x2 mean pooling, odd trailing rows/columns dropped.
template <class Real> BasicTensor<Real> avg_pool2(const BasicTensor<Real>& x);
// Nearest-neighbour 2x upsampling.
template <class Real> BasicTensor<Real> upsample2(const BasicTensor<Real>& x);
// Spatial mean / population std per (n, c): [N, C, H, W] -> [N, C].
template <class Real> BasicTensor<Real> channel_mean(const BasicTensor<Real>& x);
template <class Real> BasicTensor<Real> channel_std(const BasicTensor<Real>& x);

// w[R, N] (constant) * x[N, C] -> [R, C].
template <class Real>
BasicTensor<Real> sparse_matmul(std::shared_ptr<const SparseRows> w, const BasicTensor<Real>& x);

#define SUBFLOW_EXTERN_TENSOR(R)                                                                  \
  extern template class BasicTensor<R>;                                                           \
  extern template void backward<R>(const BasicTensor<R>&);                                        \
  extern template BasicTensor<R> matmul<R>(const BasicTensor<R>&, const BasicTensor<R>&);         \
  extern template BasicTensor<R> add<R>(const BasicTensor<R>&, const BasicTensor<R>&);            \
  extern template BasicTensor<R> sub<R>(const BasicTensor<R>&, const BasicTensor<R>&);            \
  extern template BasicTensor<R> mul<R>(const BasicTensor<R>&, const BasicTensor<R>&);            \
  extern template BasicTensor<R> add_bias<R>(const BasicTensor<R>&, const BasicTensor<R>&);       \
  extern template BasicTensor<R> scale<R>(const BasicTensor<R>&, R);                              \
  extern template BasicTensor<R> add_scalar<R>(const BasicTensor<R>&, R);                         \
  extern template BasicTensor<R> relu<R>(const BasicTensor<R>&);                                  \
  extern template BasicTensor<R> leaky_relu<R>(const BasicTensor<R>&, R);                         \
  extern template BasicTensor<R> tanh<R>(const BasicTensor<R>&);                                  \
  extern template BasicTensor<R> sigmoid<R>(const BasicTensor<R>&);                               \
  extern template BasicTensor<R> softplus<R>(const BasicTensor<R>&);                              \
  extern template BasicTensor<R> square<R>(const BasicTensor<R>&);                                \
  extern template BasicTensor<R> log_clamped<R>(const BasicTensor<R>&, R, R);                     \
  extern template BasicTensor<R> sum<R>(const BasicTensor<R>&);                                   \
  extern template BasicTensor<R> mean<R>(const BasicTensor<R>&);                                  \
  extern template BasicTensor<R> mse<R>(const BasicTensor<R>&, const BasicTensor<R>&);            \
  extern template BasicTensor<R> reshape<R>(const BasicTensor<R>&, Shape);                        \
  extern template BasicTensor<R> transpose2d<R>(const BasicTensor<R>&);                           \
  extern template BasicTensor<R> concat_cols<R>(const BasicTensor<R>&, const BasicTensor<R>&);    \
  extern template BasicTensor<R> slice_cols<R>(const BasicTensor<R>&, std::size_t, std::size_t);  \
  extern template BasicTensor<R> conv2d<R>(const BasicTensor<R>&, const BasicTensor<R>&,          \
                                           const BasicTensor<R>&, Conv2dGeometry);                \
  extern template BasicTensor<R> avg_pool2<R>(const BasicTensor<R>&);                             \
  extern template BasicTensor<R> upsample2<R>(const BasicTensor<R>&);                             \
  extern template BasicTensor<R> channel_mean<R>(const BasicTensor<R>&);                          \
  extern template BasicTensor<R> channel_std<R>(const BasicTensor<R>&);                           \
  extern template BasicTensor<R> sparse_matmul<R>(std::shared_ptr<const SparseRows>, const BasicTensor<R>&);

SUBFLOW_EXTERN_TENSOR(float)
SUBFLOW_EXTERN_TENSOR(double)
#undef SUBFLOW_EXTERN_TENSOR

}  // namespace subflow
