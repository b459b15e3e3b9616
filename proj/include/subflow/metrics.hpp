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

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "subflow/features.hpp"
#include "subflow/image.hpp"
#include "subflow/rasterizer.hpp"
#include "subflow/scene.hpp"

namespace subflow {

struct GaussianFit {
  std::vector<double> mean;
  // Row-major d x d, unbiased (M - 1) estimator.
  std::vector<double> covariance;
  std::size_t dim() const { return mean.size(); }
};

GaussianFit fit_gaussian(const FeatureSet& f);

// Mean over rows of the cosine between paired rows; zero rows contribute 0.
double cosine_sim(const FeatureSet& a, const FeatureSet& b);
double frechet_distance(const GaussianFit& a, const GaussianFit& b);
double frechet_distance(const FeatureSet& a, const FeatureSet& b);

enum class ViewRange { short_range, long_range };
std::string to_string(ViewRange r);

struct ConsistencyReport {
  ViewRange range = ViewRange::short_range;
  std::size_t src = 0;
  std::size_t dst = 0;
  double masked_rmse = 0.0;
  double valid_pixel_fraction = 0.0;
};

// RMSE over valid pixels of img_a(p) - img_b(warp(p)), bilinear in img_b.
ConsistencyReport masked_rmse(const Image& img_a, const Image& img_b, const WarpMap& warp);

using RenderFn = std::function<RenderOutput(const Camera&)>;

// Short range: consecutive cameras; long range: cameras half a ring apart.
std::vector<ConsistencyReport> eval_consistency(const std::vector<Camera>& cams, const RenderFn& render_fn);
std::vector<ConsistencyReport> eval_consistency(const GaussianScene& scene, const std::vector<Camera>& cams);
double mean_rmse(const std::vector<ConsistencyReport>& reports, ViewRange range);

// Rows of "metric,range_or_round,value".
struct MetricRow {
  std::string metric;
  std::string key;
  double value;
};
void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows);
std::string format_value(double v);

}  // namespace subflow
