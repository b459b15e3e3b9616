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

#include "subflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <type_traits>
#include <unordered_set>
#include <utility>

#include "subflow/error.hpp"
#include "subflow/simd.hpp"

namespace subflow {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

template <class Real>
using NodePtr = std::shared_ptr<TensorNode<Real>>;

template <class Real>
std::vector<Real>& grad_of(TensorNode<Real>& n) {
  if (n.grad.empty()) n.grad.assign(n.value.size(), Real(0));
  return n.grad;
}

template <class Real>
Real dot_n(const Real* a, const Real* b, std::size_t n) {
  if constexpr (std::is_same_v<Real, float>) {
    return simd::active_kernels().dot(a, b, n);
  } else {
    Real acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
  }
}

template <class Real>
void axpy_n(Real alpha, const Real* x, Real* y, std::size_t n) {
  if constexpr (std::is_same_v<Real, float>) {
    simd::active_kernels().axpy(alpha, x, y, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
  }
}

template <class Real>
BasicTensor<Real> make_result(const char* op, Shape shape, std::vector<Real> value,
                              std::vector<NodePtr<Real>> parents,
                              std::function<void(TensorNode<Real>&)> backward_fn) {
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!std::isfinite(value[i])) {
      throw NumericError(std::string(op) + ": non-finite value at element " + std::to_string(i) +
                         " of output " + shape_string(shape));
    }
  }
  auto node = std::make_shared<TensorNode<Real>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool any = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) any = any || p->requires_grad;
  }
  if (any) {
    node->requires_grad = true;
    node->is_leaf = false;
    node->parents = std::move(parents);
    node->backward = std::move(backward_fn);
  }
  return BasicTensor<Real>(std::move(node));
}

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw ValidationError(std::string(op) + ": shape mismatch, " + detail);
}

template <class Real>
void require_same_shape(const char* op, const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  if (a.shape() != b.shape()) {
    shape_error(op, shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

template <class Real>
void require_rank(const char* op, const BasicTensor<Real>& a, std::size_t rank) {
  if (a.rank() != rank) {
    shape_error(op, "expected rank " + std::to_string(rank) + ", got " + shape_string(a.shape()));
  }
}

// Elementwise unary op: f gives the value, df(x, y) the local derivative.
template <class Real, class F, class DF>
BasicTensor<Real> unary(const char* op, const BasicTensor<Real>& a, F f, DF df) {
  std::vector<Real> out(a.size());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  auto pa = a.node();
  return make_result<Real>(op, a.shape(), std::move(out), {pa}, [pa, df](TensorNode<Real>& self) {
    auto& g = grad_of(*pa);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(pa->value[i], self.value[i]);
  });
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---- BasicTensor --------------------------------------------------------

template <class Real>
BasicTensor<Real> BasicTensor<Real>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), Real(0), requires_grad);
}

template <class Real>
BasicTensor<Real> BasicTensor<Real>::full(Shape shape, Real fill, bool requires_grad) {
  std::vector<Real> data(shape_size(shape), fill);
  return from(std::move(shape), std::move(data), requires_grad);
}

template <class Real>
BasicTensor<Real> BasicTensor<Real>::from(Shape shape, std::vector<Real> data, bool requires_grad) {
  if (data.size() != shape_size(shape)) {
    throw ValidationError("tensor: data length " + std::to_string(data.size()) +
                          " does not match shape " + shape_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return BasicTensor(std::move(node));
}

template <class Real>
BasicTensor<Real> BasicTensor<Real>::scalar(Real v) {
  return from(Shape{}, std::vector<Real>{v});
}

template <class Real>
std::span<Real> BasicTensor<Real>::mutable_data() {
  if (!node_->is_leaf) throw ValidationError("tensor: mutable_data on a non-leaf tensor (" + node_->op + ")");
  return node_->value;
}

template <class Real>
std::span<Real> BasicTensor<Real>::mutable_grad() {
  return grad_of(*node_);
}

template <class Real>
void BasicTensor<Real>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
}

template <class Real>
Real BasicTensor<Real>::item() const {
  if (size() != 1) throw ValidationError("tensor: item() on shape " + shape_string(shape()));
  return node_->value[0];
}

template <class Real>
BasicTensor<Real> BasicTensor<Real>::detach() const {
  return from(shape(), node_->value, false);
}

// ---- backward -----------------------------------------------------------

template <class Real>
void backward(const BasicTensor<Real>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ValidationError("backward: loss must be scalar, got shape " +
                          (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) throw ValidationError("backward: loss is not recorded on the tape");

  using Node = TensorNode<Real>;
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (!n->is_leaf) n->grad.assign(n->value.size(), Real(0));
  }
  grad_of(*loss.node())[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf && n->backward) n->backward(*n);
  }
}

// ---- ops ----------------------------------------------------------------

template <class Real>
BasicTensor<Real> matmul(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) shape_error("matmul", shape_string(a.shape()) + " x " + shape_string(b.shape()));
  std::vector<Real> out(m * n, Real(0));
  const Real* A = a.data().data();
  const Real* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) axpy_n(A[i * k + p], B + p * n, out.data() + i * n, n);
  }
  auto pa = a.node(), pb = b.node();
  return make_result<Real>("matmul", {m, n}, std::move(out), {pa, pb}, [pa, pb, m, k, n](TensorNode<Real>& self) {
    const Real* G = self.grad.data();
    if (pa->requires_grad) {
      auto& ga = grad_of(*pa);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += dot_n(G + i * n, pb->value.data() + p * n, n);
      }
    }
    if (pb->requires_grad) {
      auto& gb = grad_of(*pb);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) axpy_n(pa->value[i * k + p], G + i * n, gb.data() + p * n, n);
      }
    }
  });
}

template <class Real>
BasicTensor<Real> add(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  require_same_shape("add", a, b);
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  auto pa = a.node(), pb = b.node();
  return make_result<Real>("add", a.shape(), std::move(out), {pa, pb}, [pa, pb](TensorNode<Real>& self) {
    for (auto* p : {pa.get(), pb.get()}) {
      if (!p->requires_grad) continue;
      auto& g = grad_of(*p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <class Real>
BasicTensor<Real> sub(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  require_same_shape("sub", a, b);
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  auto pa = a.node(), pb = b.node();
  return make_result<Real>("sub", a.shape(), std::move(out), {pa, pb}, [pa, pb](TensorNode<Real>& self) {
    if (pa->requires_grad) {
      auto& g = grad_of(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = grad_of(*pb);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <class Real>
BasicTensor<Real> mul(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  require_same_shape("mul", a, b);
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  auto pa = a.node(), pb = b.node();
  return make_result<Real>("mul", a.shape(), std::move(out), {pa, pb}, [pa, pb](TensorNode<Real>& self) {
    if (pa->requires_grad) {
      auto& g = grad_of(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      auto& g = grad_of(*pb);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value[i];
    }
  });
}

template <class Real>
BasicTensor<Real> add_bias(const BasicTensor<Real>& a, const BasicTensor<Real>& bias) {
  require_rank("add_bias", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (bias.size() != n) shape_error("add_bias", shape_string(a.shape()) + " + " + shape_string(bias.shape()));
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] + bias[j];
  }
  auto pa = a.node(), pb = bias.node();
  return make_result<Real>("add_bias", a.shape(), std::move(out), {pa, pb}, [pa, pb, m, n](TensorNode<Real>& self) {
    if (pa->requires_grad) {
      auto& g = grad_of(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = grad_of(*pb);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
      }
    }
  });
}

template <class Real>
BasicTensor<Real> scale(const BasicTensor<Real>& a, Real s) {
  return unary<Real>("scale", a, [s](Real x) { return s * x; }, [s](Real, Real) { return s; });
}

template <class Real>
BasicTensor<Real> add_scalar(const BasicTensor<Real>& a, Real s) {
  return unary<Real>("add_scalar", a, [s](Real x) { return x + s; }, [](Real, Real) { return Real(1); });
}

template <class Real>
BasicTensor<Real> relu(const BasicTensor<Real>& a) {
  // Subgradient at 0 is 0.
  return unary<Real>("relu", a, [](Real x) { return x > 0 ? x : Real(0); },
                     [](Real x, Real) { return x > 0 ? Real(1) : Real(0); });
}

template <class Real>
BasicTensor<Real> leaky_relu(const BasicTensor<Real>& a, Real slope) {
  return unary<Real>("leaky_relu", a, [slope](Real x) { return x > 0 ? x : slope * x; },
                     [slope](Real x, Real) { return x > 0 ? Real(1) : slope; });
}

template <class Real>
BasicTensor<Real> tanh(const BasicTensor<Real>& a) {
  return unary<Real>("tanh", a, [](Real x) { return std::tanh(x); },
                     [](Real, Real y) { return Real(1) - y * y; });
}

template <class Real>
BasicTensor<Real> sigmoid(const BasicTensor<Real>& a) {
  return unary<Real>(
      "sigmoid", a,
      [](Real x) {
        if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
        const Real e = std::exp(x);
        return e / (Real(1) + e);
      },
      [](Real, Real y) { return y * (Real(1) - y); });
}

template <class Real>
BasicTensor<Real> softplus(const BasicTensor<Real>& a) {
  return unary<Real>(
      "softplus", a,
      [](Real x) { return x > Real(20) ? x : std::log1p(std::exp(x)); },
      [](Real x, Real) {
        if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
        const Real e = std::exp(x);
        return e / (Real(1) + e);
      });
}

template <class Real>
BasicTensor<Real> square(const BasicTensor<Real>& a) {
  return unary<Real>("square", a, [](Real x) { return x * x; }, [](Real x, Real) { return Real(2) * x; });
}

template <class Real>
BasicTensor<Real> log_clamped(const BasicTensor<Real>& a, Real lo, Real hi) {
  return unary<Real>(
      "log_clamped", a, [lo, hi](Real x) { return std::log(std::clamp(x, lo, hi)); },
      [lo, hi](Real x, Real) { return (x > lo && x < hi) ? Real(1) / x : Real(0); });
}

template <class Real>
BasicTensor<Real> sum(const BasicTensor<Real>& a) {
  Real acc = 0;
  for (Real v : a.data()) acc += v;
  auto pa = a.node();
  return make_result<Real>("sum", Shape{}, {acc}, {pa}, [pa](TensorNode<Real>& self) {
    auto& g = grad_of(*pa);
    for (auto& v : g) v += self.grad[0];
  });
}

template <class Real>
BasicTensor<Real> mean(const BasicTensor<Real>& a) {
  if (a.size() == 0) throw ValidationError("mean: empty tensor");
  return scale(sum(a), Real(1) / static_cast<Real>(a.size()));
}

template <class Real>
BasicTensor<Real> mse(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  require_same_shape("mse", a, b);
  return mean(square(sub(a, b)));
}

template <class Real>
BasicTensor<Real> reshape(const BasicTensor<Real>& a, Shape shape) {
  if (shape_size(shape) != a.size()) shape_error("reshape", shape_string(a.shape()) + " -> " + shape_string(shape));
  auto pa = a.node();
  std::vector<Real> out(a.data().begin(), a.data().end());
  return make_result<Real>("reshape", std::move(shape), std::move(out), {pa}, [pa](TensorNode<Real>& self) {
    auto& g = grad_of(*pa);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <class Real>
BasicTensor<Real> transpose2d(const BasicTensor<Real>& a) {
  require_rank("transpose2d", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  }
  auto pa = a.node();
  return make_result<Real>("transpose2d", {n, m}, std::move(out), {pa}, [pa, m, n](TensorNode<Real>& self) {
    auto& g = grad_of(*pa);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
    }
  });
}

template <class Real>
BasicTensor<Real> concat_cols(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  require_rank("concat_cols", a, 2);
  require_rank("concat_cols", b, 2);
  if (a.dim(0) != b.dim(0)) shape_error("concat_cols", shape_string(a.shape()) + " | " + shape_string(b.shape()));
  const std::size_t m = a.dim(0), na = a.dim(1), nb = b.dim(1), n = na + nb;
  std::vector<Real> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(a.data().data() + i * na, na, out.data() + i * n);
    std::copy_n(b.data().data() + i * nb, nb, out.data() + i * n + na);
  }
  auto pa = a.node(), pb = b.node();
  return make_result<Real>("concat_cols", {m, n}, std::move(out), {pa, pb}, [pa, pb, m, na, nb, n](TensorNode<Real>& self) {
    if (pa->requires_grad) {
      auto& g = grad_of(*pa);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < na; ++j) g[i * na + j] += self.grad[i * n + j];
      }
    }
    if (pb->requires_grad) {
      auto& g = grad_of(*pb);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < nb; ++j) g[i * nb + j] += self.grad[i * n + na + j];
      }
    }
  });
}

template <class Real>
BasicTensor<Real> slice_cols(const BasicTensor<Real>& a, std::size_t start, std::size_t count) {
  require_rank("slice_cols", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (start + count > n) {
    shape_error("slice_cols", "columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                                  ") of " + shape_string(a.shape()));
  }
  std::vector<Real> out(m * count);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(a.data().data() + i * n + start, count, out.data() + i * count);
  auto pa = a.node();
  return make_result<Real>("slice_cols", {m, count}, std::move(out), {pa}, [pa, m, n, start, count](TensorNode<Real>& self) {
    auto& g = grad_of(*pa);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < count; ++j) g[i * n + start + j] += self.grad[i * count + j];
    }
  });
}

template <class Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>& bias, Conv2dGeometry geo) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", weight, 4);
  const std::size_t batch = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != C || weight.dim(3) != k) {
    shape_error("conv2d", "input " + shape_string(x.shape()) + " with kernel " + shape_string(weight.shape()));
  }
  if (bias.size() != O) shape_error("conv2d", "bias " + shape_string(bias.shape()) + " for " + std::to_string(O) + " outputs");
  if (geo.stride == 0 || H + 2 * geo.pad < k || W + 2 * geo.pad < k) {
    shape_error("conv2d", "kernel " + std::to_string(k) + " does not fit input " + shape_string(x.shape()) +
                              " with padding " + std::to_string(geo.pad));
  }
  const std::size_t Ho = (H + 2 * geo.pad - k) / geo.stride + 1;
  const std::size_t Wo = (W + 2 * geo.pad - k) / geo.stride + 1;
  const std::size_t rows = C * k * k, cols = Ho * Wo, plane = H * W;

  // Gather map from im2col position to input offset within one image, -1 for
  // zero padding.
  auto index = std::make_shared<std::vector<std::int64_t>>(rows * cols);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const std::size_t r = (c * k + ki) * k + kj;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            long iy = static_cast<long>(oy * geo.stride + ki) - static_cast<long>(geo.pad);
            long ix = static_cast<long>(ox * geo.stride + kj) - static_cast<long>(geo.pad);
            std::int64_t src = -1;
            if (geo.pad_mode == PadMode::replicate) {
              iy = std::clamp<long>(iy, 0, static_cast<long>(H) - 1);
              ix = std::clamp<long>(ix, 0, static_cast<long>(W) - 1);
            }
            if (iy >= 0 && ix >= 0 && iy < static_cast<long>(H) && ix < static_cast<long>(W)) {
              src = static_cast<std::int64_t>(c * plane + static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix));
            }
            (*index)[r * cols + oy * Wo + ox] = src;
          }
        }
      }
    }
  }

  const std::size_t in_image = C * plane, out_image = O * cols;
  std::vector<Real> out(batch * out_image);
  std::vector<Real> col(rows * cols);
  const Real* Wt = weight.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const Real* xin = x.data().data() + b * in_image;
    for (std::size_t j = 0; j < col.size(); ++j) col[j] = (*index)[j] >= 0 ? xin[(*index)[j]] : Real(0);
    Real* o = out.data() + b * out_image;
    for (std::size_t oc = 0; oc < O; ++oc) {
      std::fill_n(o + oc * cols, cols, bias[oc]);
      for (std::size_t r = 0; r < rows; ++r) axpy_n(Wt[oc * rows + r], col.data() + r * cols, o + oc * cols, cols);
    }
  }

  auto px = x.node(), pw = weight.node(), pb = bias.node();
  return make_result<Real>(
      "conv2d", {batch, O, Ho, Wo}, std::move(out), {px, pw, pb},
      [px, pw, pb, index, batch, O, rows, cols, in_image, out_image](TensorNode<Real>& self) {
        std::vector<Real> col(rows * cols);
        std::vector<Real> dcol;
        if (px->requires_grad) dcol.resize(rows * cols);
        for (std::size_t b = 0; b < batch; ++b) {
          const Real* xin = px->value.data() + b * in_image;
          const Real* G = self.grad.data() + b * out_image;
          if (pw->requires_grad) {
            for (std::size_t j = 0; j < col.size(); ++j) col[j] = (*index)[j] >= 0 ? xin[(*index)[j]] : Real(0);
            auto& gw = grad_of(*pw);
            for (std::size_t oc = 0; oc < O; ++oc) {
              for (std::size_t r = 0; r < rows; ++r) gw[oc * rows + r] += dot_n(G + oc * cols, col.data() + r * cols, cols);
            }
          }
          if (pb->requires_grad) {
            auto& gb = grad_of(*pb);
            for (std::size_t oc = 0; oc < O; ++oc) {
              Real acc = 0;
              for (std::size_t j = 0; j < cols; ++j) acc += G[oc * cols + j];
              gb[oc] += acc;
            }
          }
          if (px->requires_grad) {
            std::fill(dcol.begin(), dcol.end(), Real(0));
            for (std::size_t oc = 0; oc < O; ++oc) {
              for (std::size_t r = 0; r < rows; ++r) {
                axpy_n(pw->value[oc * rows + r], G + oc * cols, dcol.data() + r * cols, cols);
              }
            }
            auto& gx = grad_of(*px);
            Real* gxi = gx.data() + b * in_image;
            for (std::size_t j = 0; j < dcol.size(); ++j) {
              if ((*index)[j] >= 0) gxi[(*index)[j]] += dcol[j];
            }
          }
        }
      });
}

template <class Real>
BasicTensor<Real> avg_pool2(const BasicTensor<Real>& x) {
  require_rank("avg_pool2", x, 4);
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = H / 2, Wo = W / 2;
  if (Ho == 0 || Wo == 0) shape_error("avg_pool2", "input too small " + shape_string(x.shape()));
  std::vector<Real> out(N * C * Ho * Wo);
  for (std::size_t p = 0; p < N * C; ++p) {
    const Real* in = x.data().data() + p * H * W;
    Real* o = out.data() + p * Ho * Wo;
    for (std::size_t y = 0; y < Ho; ++y) {
      for (std::size_t xx = 0; xx < Wo; ++xx) {
        const Real* r0 = in + (2 * y) * W + 2 * xx;
        o[y * Wo + xx] = Real(0.25) * ((r0[0] + r0[1]) + (r0[W] + r0[W + 1]));
      }
    }
  }
  auto px = x.node();
  return make_result<Real>("avg_pool2", {N, C, Ho, Wo}, std::move(out), {px}, [px, N, C, H, W, Ho, Wo](TensorNode<Real>& self) {
    auto& g = grad_of(*px);
    for (std::size_t p = 0; p < N * C; ++p) {
      Real* gi = g.data() + p * H * W;
      const Real* go = self.grad.data() + p * Ho * Wo;
      for (std::size_t y = 0; y < Ho; ++y) {
        for (std::size_t xx = 0; xx < Wo; ++xx) {
          const Real v = Real(0.25) * go[y * Wo + xx];
          Real* r0 = gi + (2 * y) * W + 2 * xx;
          r0[0] += v;
          r0[1] += v;
          r0[W] += v;
          r0[W + 1] += v;
        }
      }
    }
  });
}

template <class Real>
BasicTensor<Real> upsample2(const BasicTensor<Real>& x) {
  require_rank("upsample2", x, 4);
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = 2 * H, Wo = 2 * W;
  std::vector<Real> out(N * C * Ho * Wo);
  for (std::size_t p = 0; p < N * C; ++p) {
    const Real* in = x.data().data() + p * H * W;
    Real* o = out.data() + p * Ho * Wo;
    for (std::size_t y = 0; y < Ho; ++y) {
      for (std::size_t xx = 0; xx < Wo; ++xx) o[y * Wo + xx] = in[(y / 2) * W + xx / 2];
    }
  }
  auto px = x.node();
  return make_result<Real>("upsample2", {N, C, Ho, Wo}, std::move(out), {px}, [px, N, C, H, W, Ho, Wo](TensorNode<Real>& self) {
    auto& g = grad_of(*px);
    for (std::size_t p = 0; p < N * C; ++p) {
      Real* gi = g.data() + p * H * W;
      const Real* go = self.grad.data() + p * Ho * Wo;
      for (std::size_t y = 0; y < Ho; ++y) {
        for (std::size_t xx = 0; xx < Wo; ++xx) gi[(y / 2) * W + xx / 2] += go[y * Wo + xx];
      }
    }
  });
}

template <class Real>
BasicTensor<Real> channel_mean(const BasicTensor<Real>& x) {
  require_rank("channel_mean", x, 4);
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  std::vector<Real> out(N * C);
  for (std::size_t p = 0; p < N * C; ++p) {
    double acc = 0;
    const Real* in = x.data().data() + p * HW;
    for (std::size_t i = 0; i < HW; ++i) acc += in[i];
    out[p] = static_cast<Real>(acc / static_cast<double>(HW));
  }
  auto px = x.node();
  return make_result<Real>("channel_mean", {N, C}, std::move(out), {px}, [px, N, C, HW](TensorNode<Real>& self) {
    auto& g = grad_of(*px);
    for (std::size_t p = 0; p < N * C; ++p) {
      const Real v = self.grad[p] / static_cast<Real>(HW);
      for (std::size_t i = 0; i < HW; ++i) g[p * HW + i] += v;
    }
  });
}

template <class Real>
BasicTensor<Real> channel_std(const BasicTensor<Real>& x) {
  require_rank("channel_std", x, 4);
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  std::vector<Real> out(N * C);
  auto means = std::make_shared<std::vector<Real>>(N * C);
  for (std::size_t p = 0; p < N * C; ++p) {
    const Real* in = x.data().data() + p * HW;
    double mu = 0;
    for (std::size_t i = 0; i < HW; ++i) mu += in[i];
    mu /= static_cast<double>(HW);
    double var = 0;
    for (std::size_t i = 0; i < HW; ++i) var += (in[i] - mu) * (in[i] - mu);
    var /= static_cast<double>(HW);
    (*means)[p] = static_cast<Real>(mu);
    out[p] = static_cast<Real>(std::sqrt(std::max(var, 0.0)));
  }
  auto px = x.node();
  return make_result<Real>("channel_std", {N, C}, std::move(out), {px}, [px, means, N, C, HW](TensorNode<Real>& self) {
    auto& g = grad_of(*px);
    for (std::size_t p = 0; p < N * C; ++p) {
      const Real sd = self.value[p];
      if (!(sd > 0)) continue;
      const Real k = self.grad[p] / (static_cast<Real>(HW) * sd);
      const Real mu = (*means)[p];
      for (std::size_t i = 0; i < HW; ++i) g[p * HW + i] += k * (px->value[p * HW + i] - mu);
    }
  });
}

template <class Real>
BasicTensor<Real> sparse_matmul(std::shared_ptr<const SparseRows> wptr, const BasicTensor<Real>& x) {
  const SparseRows& w = *wptr;
  require_rank("sparse_matmul", x, 2);
  if (x.dim(0) != w.cols || w.offsets.size() != w.rows + 1) {
    shape_error("sparse_matmul", "[" + std::to_string(w.rows) + "," + std::to_string(w.cols) + "] x " + shape_string(x.shape()));
  }
  const std::size_t C = x.dim(1);
  std::vector<Real> out(w.rows * C, Real(0));
  const Real* X = x.data().data();
  for (std::size_t r = 0; r < w.rows; ++r) {
    Real* o = out.data() + r * C;
    for (std::uint32_t e = w.offsets[r]; e < w.offsets[r + 1]; ++e) {
      const Real v = static_cast<Real>(w.values[e]);
      const Real* xr = X + static_cast<std::size_t>(w.indices[e]) * C;
      for (std::size_t c = 0; c < C; ++c) o[c] += v * xr[c];
    }
  }
  auto px = x.node();
  std::shared_ptr<const SparseRows> wp = std::move(wptr);
  return make_result<Real>("sparse_matmul", {w.rows, C}, std::move(out), {px}, [px, wp, C](TensorNode<Real>& self) {
    auto& g = grad_of(*px);
    for (std::size_t r = 0; r < wp->rows; ++r) {
      const Real* go = self.grad.data() + r * C;
      for (std::uint32_t e = wp->offsets[r]; e < wp->offsets[r + 1]; ++e) {
        const Real v = static_cast<Real>(wp->values[e]);
        Real* gx = g.data() + static_cast<std::size_t>(wp->indices[e]) * C;
        for (std::size_t c = 0; c < C; ++c) gx[c] += v * go[c];
      }
    }
  });
}

#define SUBFLOW_INSTANTIATE_TENSOR(R)                                                      \
  template class BasicTensor<R>;                                                           \
  template void backward<R>(const BasicTensor<R>&);                                        \
  template BasicTensor<R> matmul<R>(const BasicTensor<R>&, const BasicTensor<R>&);         \
  template BasicTensor<R> add<R>(const BasicTensor<R>&, const BasicTensor<R>&);            \
  template BasicTensor<R> sub<R>(const BasicTensor<R>&, const BasicTensor<R>&);            \
  template BasicTensor<R> mul<R>(const BasicTensor<R>&, const BasicTensor<R>&);            \
  template BasicTensor<R> add_bias<R>(const BasicTensor<R>&, const BasicTensor<R>&);       \
  template BasicTensor<R> scale<R>(const BasicTensor<R>&, R);                              \
  template BasicTensor<R> add_scalar<R>(const BasicTensor<R>&, R);                         \
  template BasicTensor<R> relu<R>(const BasicTensor<R>&);                                  \
  template BasicTensor<R> leaky_relu<R>(const BasicTensor<R>&, R);                         \
  template BasicTensor<R> tanh<R>(const BasicTensor<R>&);                                  \
  template BasicTensor<R> sigmoid<R>(const BasicTensor<R>&);                               \
  template BasicTensor<R> softplus<R>(const BasicTensor<R>&);                              \
  template BasicTensor<R> square<R>(const BasicTensor<R>&);                                \
  template BasicTensor<R> log_clamped<R>(const BasicTensor<R>&, R, R);                     \
  template BasicTensor<R> sum<R>(const BasicTensor<R>&);                                   \
  template BasicTensor<R> mean<R>(const BasicTensor<R>&);                                  \
  template BasicTensor<R> mse<R>(const BasicTensor<R>&, const BasicTensor<R>&);            \
  template BasicTensor<R> reshape<R>(const BasicTensor<R>&, Shape);                        \
  template BasicTensor<R> transpose2d<R>(const BasicTensor<R>&);                           \
  template BasicTensor<R> concat_cols<R>(const BasicTensor<R>&, const BasicTensor<R>&);    \
  template BasicTensor<R> slice_cols<R>(const BasicTensor<R>&, std::size_t, std::size_t);  \
  template BasicTensor<R> conv2d<R>(const BasicTensor<R>&, const BasicTensor<R>&,          \
                                    const BasicTensor<R>&, Conv2dGeometry);                \
  template BasicTensor<R> avg_pool2<R>(const BasicTensor<R>&);                             \
  template BasicTensor<R> upsample2<R>(const BasicTensor<R>&);                             \
  template BasicTensor<R> channel_mean<R>(const BasicTensor<R>&);                          \
  template BasicTensor<R> channel_std<R>(const BasicTensor<R>&);                           \
  template BasicTensor<R> sparse_matmul<R>(std::shared_ptr<const SparseRows>, const BasicTensor<R>&);

SUBFLOW_INSTANTIATE_TENSOR(float)
SUBFLOW_INSTANTIATE_TENSOR(double)

}  // namespace subflow
