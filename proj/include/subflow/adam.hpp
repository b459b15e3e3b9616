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
#include <vector>

#include "subflow/tensor.hpp"

namespace subflow {

struct AdamState {
  std::size_t step_count = 0;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

// One bias-corrected Adam update. Gradients are left untouched; moment buffers
// are created on the first call.
void adam_step(const std::vector<Tensor>& params, AdamState& state);

class Adam {
 public:
  Adam(std::vector<Tensor> params, float learning_rate);

  void step() { adam_step(params_, state_); }
  void set_learning_rate(float lr) { state_.learning_rate = lr; }
  void zero_grad();
  const AdamState& state() const { return state_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamState state_;
};

}  // namespace subflow
