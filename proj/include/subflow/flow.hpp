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
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "subflow/features.hpp"
#include "subflow/nn.hpp"

namespace subflow {

inline constexpr std::size_t kTimeEmbedDim = 8;

struct FlowConfig {
  std::size_t euler_steps = 8;  // H
  std::size_t rounds = 3;       // r
  std::size_t train_steps = 3000;
  std::size_t mapping_steps = 2000;
  std::size_t batch_size = 256;
  float learning_rate = 1e-3f;
  std::size_t hidden_width = 128;
  std::uint64_t seed = 1;

  void validate() const;
};

// sin(pi k t), cos(pi k t) for k = 1..4.
std::array<float, kTimeEmbedDim> time_embedding(double t);

class MappingNet {
 public:
  MappingNet() = default;
  MappingNet(std::size_t in_dim, std::size_t out_dim, std::size_t hidden, std::uint64_t seed);

  Tensor forward(const Tensor& x) const { return net_.forward(x); }
  FeatureSet apply(const FeatureSet& f) const;
  std::vector<float> apply(std::span<const float> x) const;
  std::vector<Tensor> parameters() const { return net_.parameters(); }
  std::size_t in_dim() const { return net_.input_width(); }
  std::size_t out_dim() const { return net_.output_width(); }
  bool trained = false;

 private:
  DenseNet<float> net_;
};

class VelocityField {
 public:
  VelocityField() = default;
  VelocityField(std::size_t dim, std::size_t hidden, std::uint64_t seed);

  std::size_t dim() const { return dim_; }
  // x: [B, dim], t: one time per row.
  Tensor forward(const Tensor& x, std::span<const float> t) const;
  std::vector<float> eval(std::span<const float> x, double t) const;
  std::vector<Tensor> parameters() const { return net_.parameters(); }

 private:
  std::size_t dim_ = 0;
  DenseNet<float> net_;
};

struct TrainLog {
  std::vector<float> losses;
  float first() const { return losses.empty() ? 0.0f : losses.front(); }
  float last() const { return losses.empty() ? 0.0f : losses.back(); }
  // Mean of the last `window` losses.
  float tail_mean(std::size_t window) const;
};

MappingNet train_mapping(const FeatureSet& clip, const FeatureSet& vgg, const FlowConfig& cfg, TrainLog* log = nullptr);

// Regresses v((1 - t) start + t target, t) onto target - start.
VelocityField train_velocity(const FeatureSet& start, const FeatureSet& target, const FlowConfig& cfg,
                             std::uint64_t round_seed, TrainLog* log = nullptr);

using VelocityFn = std::function<std::vector<float>(std::span<const float> x, double t)>;

// X_{i+1} = X_i + v(X_i, i / H) / H; returns all H + 1 points.
std::vector<std::vector<float>> euler_integrate(const VelocityFn& v, std::span<const float> x0, std::size_t steps);
std::vector<std::vector<float>> euler_integrate(const VelocityField& v, std::span<const float> x0, std::size_t steps);
// Endpoints for every row, batched through the network.
FeatureSet integrate_endpoints(const VelocityField& v, const FeatureSet& start, std::size_t steps);

struct FlowRoundReport {
  std::size_t round = 0;
  double sim_before = 0.0;
  double sim_after = 0.0;
  double fid_before = 0.0;
  double fid_after = 0.0;
  double displacement = 0.0;
  double final_loss = 0.0;
};

struct FlowPipeline {
  FlowConfig config;
  MappingNet mapping;
  std::vector<VelocityField> rounds;
  // Tail-mean regression loss of the last round.
  double final_loss = 0.0;

  bool trained() const { return mapping.trained && rounds.size() == config.rounds; }
};

struct FlowResult {
  FlowPipeline pipeline;
  FeatureSet mapped;
  FeatureSet aligned;
  std::vector<FlowRoundReport> reports;
};

FlowResult run_subdivisive_flow(const FeatureSet& clip, const FeatureSet& vgg, const FlowConfig& cfg);

// Mapping followed by every round's integration.
std::vector<float> align_feature(const FlowPipeline& pipeline, std::span<const float> x);

void write_round_csv(std::ostream& out, const std::vector<FlowRoundReport>& reports);
void save_pipeline(const FlowPipeline& pipeline, const std::filesystem::path& dir);
FlowPipeline load_pipeline(const std::filesystem::path& dir);

}  // namespace subflow
