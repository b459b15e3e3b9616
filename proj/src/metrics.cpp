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

#include "subflow/metrics.hpp"

#include <cmath>
#include <cstdio>

#include <Eigen/Dense>

#include "subflow/error.hpp"

namespace subflow {

namespace {

Eigen::MatrixXd to_matrix(const std::vector<double>& v, std::size_t d) {
  Eigen::MatrixXd m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = v[i * d + j];
  return m;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) throw NumericError(std::string("frechet_distance: eigensolver failed on ") + what);
  Eigen::VectorXd ev = solver.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-8) {
      throw NumericError(std::string("frechet_distance: ") + what + " is not positive semi-definite (eigenvalue " +
                         std::to_string(ev(i)) + ")");
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return solver.eigenvectors() * ev.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace

GaussianFit fit_gaussian(const FeatureSet& f) {
  f.validate();
  const std::size_t m = f.count(), d = f.dim;
  GaussianFit fit;
  fit.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) fit.mean[j] += f.row(i)[j];
  for (auto& v : fit.mean) v /= static_cast<double>(m);
  fit.covariance.assign(d * d, 0.0);
  if (m < 2) return fit;
  std::vector<double> centred(d);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) centred[j] = f.row(i)[j] - fit.mean[j];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) fit.covariance[a * d + b] += centred[a] * centred[b];
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      fit.covariance[a * d + b] /= static_cast<double>(m - 1);
      fit.covariance[b * d + a] = fit.covariance[a * d + b];
    }
  return fit;
}

double cosine_sim(const FeatureSet& a, const FeatureSet& b) {
  if (a.count() != b.count()) {
    throw ValidationError("cosine_sim: row counts differ (" + std::to_string(a.count()) + " vs " +
                          std::to_string(b.count()) + ")");
  }
  if (a.dim != b.dim) throw ValidationError("cosine_sim: dimensions differ");
  if (a.count() == 0) throw ValidationError("cosine_sim: empty feature sets");
  double total = 0.0;
  for (std::size_t i = 0; i < a.count(); ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    const auto ra = a.row(i), rb = b.row(i);
    for (std::size_t j = 0; j < a.dim; ++j) {
      dot += static_cast<double>(ra[j]) * rb[j];
      na += static_cast<double>(ra[j]) * ra[j];
      nb += static_cast<double>(rb[j]) * rb[j];
    }
    if (na > 0.0 && nb > 0.0) total += dot / std::sqrt(na * nb);
  }
  return total / static_cast<double>(a.count());
}

double frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  if (a.dim() != b.dim()) {
    throw ValidationError("frechet_distance: dimensions differ (" + std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()) + ")");
  }
  const std::size_t d = a.dim();
  const Eigen::MatrixXd sa = to_matrix(a.covariance, d), sb = to_matrix(b.covariance, d);
  const Eigen::MatrixXd root_a = psd_sqrt(sa, "first covariance");
  Eigen::MatrixXd inner = root_a * sb * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(inner, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("frechet_distance: eigensolver failed");
  double trace_root = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double ev = solver.eigenvalues()(i);
    if (ev < -1e-8) throw NumericError("frechet_distance: covariance product is not positive semi-definite");
    trace_root += std::sqrt(std::max(ev, 0.0));
  }
  double mean_term = 0.0;
  for (std::size_t i = 0; i < d; ++i) mean_term += (a.mean[i] - b.mean[i]) * (a.mean[i] - b.mean[i]);
  const double value = mean_term + sa.trace() + sb.trace() - 2.0 * trace_root;
  return std::max(value, 0.0);
}

double frechet_distance(const FeatureSet& a, const FeatureSet& b) {
  if (a.dim != b.dim) {
    throw ValidationError("frechet_distance: dimensions differ (" + std::to_string(a.dim) + " vs " +
                          std::to_string(b.dim) + ")");
  }
  return frechet_distance(fit_gaussian(a), fit_gaussian(b));
}

std::string to_string(ViewRange r) { return r == ViewRange::short_range ? "short" : "long"; }

ConsistencyReport masked_rmse(const Image& img_a, const Image& img_b, const WarpMap& warp) {
  if (img_a.width != warp.width || img_a.height != warp.height) {
    throw ValidationError("masked_rmse: warp map does not match the first image");
  }
  if (img_a.channels != img_b.channels) throw ValidationError("masked_rmse: channel counts differ");
  double sum = 0.0;
  std::size_t valid = 0;
  for (int y = 0; y < img_a.height; ++y) {
    for (int x = 0; x < img_a.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * img_a.width + x;
      if (!warp.valid[p]) continue;
      ++valid;
      for (int c = 0; c < img_a.channels; ++c) {
        const double diff = img_a.at(x, y, c) - img_b.sample(warp.x[p], warp.y[p], c);
        sum += diff * diff;
      }
    }
  }
  if (valid == 0) throw ValidationError("masked_rmse: no valid correspondences");
  ConsistencyReport r;
  r.masked_rmse = std::sqrt(sum / static_cast<double>(valid * img_a.channels));
  r.valid_pixel_fraction = static_cast<double>(valid) / static_cast<double>(img_a.pixel_count());
  return r;
}

std::vector<ConsistencyReport> eval_consistency(const std::vector<Camera>& cams, const RenderFn& render_fn) {
  if (cams.size() < 4) throw ValidationError("eval_consistency: need at least 4 cameras");
  std::vector<RenderOutput> renders;
  renders.reserve(cams.size());
  for (const auto& cam : cams) renders.push_back(render_fn(cam));
  std::vector<ConsistencyReport> out;
  auto run = [&](const std::vector<std::pair<std::size_t, std::size_t>>& pairs, ViewRange range) {
    for (auto [i, j] : pairs) {
      const auto warp = warp_map(cams[i], cams[j], renders[i].depth, &renders[j].depth);
      auto r = masked_rmse(renders[i].rgb, renders[j].rgb, warp);
      r.range = range;
      r.src = i;
      r.dst = j;
      out.push_back(r);
    }
  };
  run(short_range_pairs(cams.size()), ViewRange::short_range);
  run(long_range_pairs(cams.size()), ViewRange::long_range);
  return out;
}

std::vector<ConsistencyReport> eval_consistency(const GaussianScene& scene, const std::vector<Camera>& cams) {
  RenderOptions options;
  options.features = false;
  return eval_consistency(cams, [&](const Camera& cam) { return render(scene, cam, options); });
}

double mean_rmse(const std::vector<ConsistencyReport>& reports, ViewRange range) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : reports) {
    if (r.range != range) continue;
    sum += r.masked_rmse;
    ++n;
  }
  if (n == 0) throw ValidationError("mean_rmse: no reports for range " + to_string(range));
  return sum / static_cast<double>(n);
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << "metric,range_or_round,value\n";
  for (const auto& r : rows) out << r.metric << ',' << r.key << ',' << format_value(r.value) << '\n';
}

}  // namespace subflow
