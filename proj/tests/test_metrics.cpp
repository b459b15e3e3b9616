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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "subflow/error.hpp"
#include "subflow/metrics.hpp"
#include "subflow/rng.hpp"
#include "subflow/scene.hpp"

using namespace subflow;

namespace {

FeatureSet random_set(std::uint64_t seed, std::size_t m, std::size_t d, double mix) {
  CounterRng rng(seed, "metrics/set");
  FeatureSet f(FeatureDomain::vgg_like, d);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<float> r(d);
    double shared = rng.normal();
    for (std::size_t j = 0; j < d; ++j) r[j] = static_cast<float>(rng.normal() * (1.0 + 0.3 * j) + mix * shared + 0.1 * j);
    f.append(r);
  }
  return f;
}

Eigen::MatrixXd covariance_of(const FeatureSet& f, Eigen::VectorXd& mean) {
  const auto m = static_cast<Eigen::Index>(f.count()), d = static_cast<Eigen::Index>(f.dim);
  Eigen::MatrixXd x(m, d);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = f.row(static_cast<std::size_t>(i))[static_cast<std::size_t>(j)];
  mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd c = x.rowwise() - mean.transpose();
  return c.transpose() * c / static_cast<double>(m - 1);
}

// Denman-Beavers iteration for the principal square root of a matrix with
// positive real spectrum.
Eigen::MatrixXd sqrtm_iterative(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd y = a, z = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  for (int k = 0; k < 60; ++k) {
    const Eigen::MatrixXd yi = y.inverse(), zi = z.inverse();
    y = 0.5 * (y + zi);
    z = 0.5 * (z + yi);
  }
  return y;
}

double fid_oracle(const FeatureSet& a, const FeatureSet& b) {
  Eigen::VectorXd ma, mb;
  const auto ca = covariance_of(a, ma), cb = covariance_of(b, mb);
  return (ma - mb).squaredNorm() + (ca + cb - 2.0 * sqrtm_iterative(ca * cb)).trace();
}

FeatureSet rows(std::size_t d, std::initializer_list<std::vector<float>> r) {
  FeatureSet f(FeatureDomain::clip_like, d);
  for (const auto& v : r) f.append(v);
  return f;
}

}  // namespace

TEST_CASE("cosine similarity examples") {
  const auto a = rows(2, {{1, 2}, {3, -1}, {0.5f, 0.5f}});
  CHECK(cosine_sim(a, a) == doctest::Approx(1.0));
  auto neg = a;
  for (auto& v : neg.vectors) v = -v;
  CHECK(cosine_sim(a, neg) == doctest::Approx(-1.0));
  CHECK(cosine_sim(rows(2, {{1, 0}, {0, 2}}), rows(2, {{0, 3}, {-1, 0}})) == doctest::Approx(0.0));
  CHECK(cosine_sim(rows(2, {{0, 0}, {1, 0}}), rows(2, {{1, 0}, {1, 0}})) == doctest::Approx(0.5));

  auto scaled = a;
  const float s[] = {2.0f, 0.1f, 7.0f};
  for (std::size_t i = 0; i < scaled.count(); ++i)
    for (auto& v : scaled.row(i)) v *= s[i];
  const auto b = rows(2, {{0.3f, 1}, {-2, 1}, {1, 0}});
  CHECK(cosine_sim(scaled, b) == doctest::Approx(cosine_sim(a, b)).epsilon(1e-7));
  CHECK_THROWS_AS(cosine_sim(a, rows(2, {{1, 0}})), ValidationError);
}

TEST_CASE("frechet distance closed forms") {
  const auto a = random_set(1, 500, 5, 0.7);
  CHECK(std::abs(frechet_distance(a, a)) < 1e-6);

  auto shifted = a;
  const std::vector<float> delta{0.5f, -1.0f, 0.25f, 2.0f, 0.0f};
  for (std::size_t i = 0; i < shifted.count(); ++i)
    for (std::size_t j = 0; j < 5; ++j) shifted.row(i)[j] += delta[j];
  double dd = 0.0;
  for (float v : delta) dd += double(v) * v;
  CHECK(frechet_distance(a, shifted) == doctest::Approx(dd).epsilon(1e-5 / dd));

  // Unbiased variance exactly 1 and 4 with equal means.
  FeatureSet one(FeatureDomain::clip_like, 1), four(FeatureDomain::clip_like, 1);
  one.vectors = {-1.0f, 0.0f, 1.0f};
  four.vectors = {-2.0f, 0.0f, 2.0f};
  CHECK(frechet_distance(one, four) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("frechet distance matches an iterative matrix square root") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto a = random_set(10 + s, 400, 6, 0.5);
    const auto b = random_set(20 + s, 300, 6, 1.5 * static_cast<double>(s));
    const double oracle = fid_oracle(a, b);
    CHECK(frechet_distance(a, b) == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(frechet_distance(a, b) == doctest::Approx(frechet_distance(b, a)).epsilon(1e-6));
  }
}

TEST_CASE("frechet distance handles degenerate sets") {
  FeatureSet single(FeatureDomain::clip_like, 3);
  single.append(std::vector<float>{1, 2, 3});
  const auto a = random_set(3, 50, 3, 0.1);
  CHECK(std::isfinite(frechet_distance(a, single)));
  CHECK(frechet_distance(a, single) >= 0.0);
  CHECK_THROWS_AS(frechet_distance(a, random_set(3, 50, 4, 0.1)), ValidationError);
}

TEST_CASE("masked RMSE examples") {
  Image a(8, 6, 3);
  CounterRng rng(5, "metrics/image");
  for (auto& v : a.data) v = static_cast<float>(rng.uniform() * 0.8);
  WarpMap identity;
  identity.width = 8;
  identity.height = 6;
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) {
      identity.x.push_back(static_cast<float>(x));
      identity.y.push_back(static_cast<float>(y));
      identity.valid.push_back(1);
    }
  CHECK(masked_rmse(a, a, identity).masked_rmse == doctest::Approx(0.0));
  auto b = a;
  for (auto& v : b.data) v += 0.1f;
  const auto r = masked_rmse(a, b, identity);
  CHECK(r.masked_rmse == doctest::Approx(0.1).epsilon(1e-5));
  CHECK(r.valid_pixel_fraction == doctest::Approx(1.0));

  for (std::size_t p = 0; p < identity.valid.size(); p += 2) identity.valid[p] = 0;
  CHECK(masked_rmse(a, b, identity).valid_pixel_fraction == doctest::Approx(0.5));
  std::fill(identity.valid.begin(), identity.valid.end(), 0);
  CHECK_THROWS_AS(masked_rmse(a, b, identity), ValidationError);
}

TEST_CASE("consistency protocol on toy scenes") {
  RingOptions opts;
  opts.elevation_deg = 50.0;
  const auto cams = camera_ring({0, 0, 0}, 6.0, 8, opts);

  SUBCASE("textured slab") {
    const auto scene = generate_toy_scene(ToySceneKind::textured_slab, 256, 3);
    const auto reports = eval_consistency(scene, cams);
    CHECK(reports.size() == short_range_pairs(8).size() + long_range_pairs(8).size());
    const double short_mean = mean_rmse(reports, ViewRange::short_range);
    const double long_mean = mean_rmse(reports, ViewRange::long_range);
    MESSAGE("slab short " << short_mean << " long " << long_mean);
    CHECK(short_mean < 0.02);
    CHECK(short_mean <= long_mean + 0.05);
    for (const auto& r : reports) {
      CHECK(r.masked_rmse >= 0.0);
      CHECK(r.valid_pixel_fraction > 0.0);
      CHECK(r.valid_pixel_fraction <= 1.0);
    }
  }
  SUBCASE("short range is no worse than long range") {
    for (auto kind : {ToySceneKind::lattice, ToySceneKind::two_clusters}) {
      const auto scene = generate_toy_scene(kind, 64, 3);
      const auto reports = eval_consistency(scene, cams);
      const double short_mean = mean_rmse(reports, ViewRange::short_range);
      const double long_mean = mean_rmse(reports, ViewRange::long_range);
      MESSAGE(to_string(kind) << " short " << short_mean << " long " << long_mean);
      CHECK(short_mean <= long_mean + 0.05);
    }
  }
  SUBCASE("needs four cameras") {
    const auto scene = generate_toy_scene(ToySceneKind::lattice, 8, 3);
    CHECK_THROWS_AS(eval_consistency(scene, camera_ring({0, 0, 0}, 6.0, 3, opts)), ValidationError);
  }
}

TEST_CASE("metrics csv") {
  std::ostringstream out;
  write_metrics_csv(out, {{"rmse", "short", 0.0125}, {"fid", "3", 1.0 / 3.0}});
  CHECK(out.str() == "metric,range_or_round,value\nrmse,short,0.0125\nfid,3,0.333333333\n");
}
