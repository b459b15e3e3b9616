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

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <limits>
#include <numbers>
#include <sstream>

#include "subflow/encoders.hpp"
#include "subflow/error.hpp"
#include "subflow/flow.hpp"
#include "subflow/metrics.hpp"
#include "subflow/rng.hpp"
#include "support/flow_tasks.hpp"

using namespace subflow;
using subflow::testing::line_set;

namespace {

FlowConfig small_config() {
  FlowConfig cfg;
  cfg.hidden_width = 64;
  cfg.train_steps = 1500;
  cfg.mapping_steps = 1500;
  cfg.batch_size = 128;
  return cfg;
}

FeatureSet repeated(const std::vector<float>& v, std::size_t m, FeatureDomain d) {
  FeatureSet f(d, v.size());
  for (std::size_t i = 0; i < m; ++i) f.append(v);
  return f;
}

double held_out_mse(const MappingNet& net, const FeatureSet& x, const FeatureSet& y) {
  const auto pred = net.apply(x);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.vectors.size(); ++i) {
    const double d = static_cast<double>(pred.vectors[i]) - y.vectors[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.vectors.size());
}

std::pair<FeatureSet, FeatureSet> affine_task(std::size_t m, std::uint64_t seed, bool identity) {
  constexpr std::size_t d = 4;
  CounterRng coef(99, "affine/coefficients");
  std::vector<double> a(d * d), b(d);
  for (auto& v : a) v = 0.5 * coef.normal();
  for (auto& v : b) v = coef.normal();
  CounterRng rng(seed, "affine/rows");
  FeatureSet x(FeatureDomain::clip_like, d), y(FeatureDomain::vgg_like, d);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<float> xi(d), yi(d);
    for (auto& v : xi) v = static_cast<float>(rng.normal());
    for (std::size_t r = 0; r < d; ++r) {
      double s = b[r];
      for (std::size_t c = 0; c < d; ++c) s += a[r * d + c] * xi[c];
      yi[r] = identity ? xi[r] : static_cast<float>(s);
    }
    x.append(xi);
    y.append(yi);
  }
  return {x, y};
}

}  // namespace

TEST_CASE("time embedding is sin/cos of pi*k*t") {
  const auto e0 = time_embedding(0.0);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(e0[2 * k] == doctest::Approx(0.0));
    CHECK(e0[2 * k + 1] == doctest::Approx(1.0));
  }
  const auto e = time_embedding(0.25);
  CHECK(e[0] == doctest::Approx(std::sin(std::numbers::pi * 0.25)));
  CHECK(e[7] == doctest::Approx(std::cos(std::numbers::pi * 4 * 0.25)).epsilon(1e-6));
}

TEST_CASE("euler integration on closed-form fields") {
  const std::vector<float> x0{1.0f, -2.0f};
  SUBCASE("zero field is constant") {
    const auto traj = euler_integrate([](std::span<const float> x, double) { return std::vector<float>(x.size(), 0.0f); },
                                      x0, 5);
    REQUIRE(traj.size() == 6);
    for (const auto& x : traj) CHECK(x == x0);
  }
  SUBCASE("constant field is exact for any H") {
    for (std::size_t h : {1u, 3u, 8u, 64u}) {
      const auto traj =
          euler_integrate([](std::span<const float>, double) { return std::vector<float>{0.5f, 2.0f}; }, x0, h);
      CHECK(traj.back()[0] == doctest::Approx(1.5).epsilon(1e-6));
      CHECK(traj.back()[1] == doctest::Approx(0.0).epsilon(1e-6));
    }
  }
  auto linear = [](std::span<const float> x, double) { return std::vector<float>(x.begin(), x.end()); };
  SUBCASE("linear field compounds") {
    const std::vector<float> one{1.0f};
    CHECK(euler_integrate(linear, one, 100).back()[0] == doctest::Approx(std::pow(1.01, 100)).epsilon(1e-5));
  }
  SUBCASE("first-order convergence") {
    const std::vector<float> one{1.0f};
    for (std::size_t h : {8u, 16u, 32u}) {
      const double e1 = std::exp(1.0) - euler_integrate(linear, one, h).back()[0];
      const double e2 = std::exp(1.0) - euler_integrate(linear, one, 2 * h).back()[0];
      CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.2));
    }
  }
  SUBCASE("non-finite state names the step") {
    auto blowup = [](std::span<const float> x, double t) {
      return std::vector<float>(x.size(), t >= 0.5 ? std::numeric_limits<float>::infinity() : 1.0f);
    };
    try {
      euler_integrate(blowup, x0, 4);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("step 3") != std::string::npos);
    }
  }
  CHECK_THROWS_AS(euler_integrate(linear, x0, 0), ValidationError);
}

TEST_CASE("flow config validation") {
  FlowConfig cfg;
  cfg.euler_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = FlowConfig{};
  cfg.rounds = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("mapping network regression") {
  FlowConfig cfg;
  cfg.mapping_steps = 2000;
  SUBCASE("affine target") {
    auto [x, y] = affine_task(2048, 1, false);
    auto [hx, hy] = affine_task(512, 2, false);
    TrainLog log;
    const auto net = train_mapping(x, y, cfg, &log);
    CHECK(log.last() < log.first());
    CHECK(held_out_mse(net, hx, hy) < 1e-3);
  }
  SUBCASE("identity target") {
    auto [x, y] = affine_task(2048, 1, true);
    auto [hx, hy] = affine_task(512, 2, true);
    CHECK(held_out_mse(train_mapping(x, y, cfg), hx, hy) < 1e-4);
  }
  SUBCASE("zero steps leaves the initialisation") {
    auto [x, y] = affine_task(64, 1, false);
    cfg.mapping_steps = 0;
    const auto net = train_mapping(x, y, cfg);
    const MappingNet fresh(4, 4, cfg.hidden_width, derive_seed(cfg.seed, "mapping"));
    const auto p = net.parameters(), q = fresh.parameters();
    REQUIRE(p.size() == q.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(std::vector<float>(p[i].data().begin(), p[i].data().end()) ==
            std::vector<float>(q[i].data().begin(), q[i].data().end()));
    }
  }
  SUBCASE("size mismatch") {
    auto [x, y] = affine_task(64, 1, false);
    y.vectors.resize(y.vectors.size() - 4);
    CHECK_THROWS_AS(train_mapping(x, y, cfg), ValidationError);
  }
}

TEST_CASE("velocity regression oracles") {
  const auto cfg = small_config();
  SUBCASE("zero drift") {
    CounterRng rng(3, "zero-drift");
    FeatureSet s(FeatureDomain::clip_mapped, 3);
    for (int i = 0; i < 512; ++i) s.append(std::vector<float>{float(rng.normal()), float(rng.normal()), float(rng.normal())});
    const auto v = train_velocity(s, s, cfg, 5);
    double mean_norm = 0.0;
    for (std::size_t i = 0; i < s.count(); ++i) {
      const auto out = v.eval(s.row(i), static_cast<double>(i % 11) / 10.0);
      double n = 0.0;
      for (float o : out) n += double(o) * o;
      mean_norm += std::sqrt(n);
    }
    CHECK(mean_norm / s.count() < 0.05);
  }
  SUBCASE("point mass") {
    const std::vector<float> a{0.5f, -1.0f, 2.0f}, b{3.0f, 1.0f, -1.0f};
    TrainLog log;
    const auto v = train_velocity(repeated(a, 256, FeatureDomain::clip_mapped), repeated(b, 256, FeatureDomain::vgg_like),
                                  cfg, 5, &log);
    CHECK(log.tail_mean(50) < log.first());
    const auto end = euler_integrate(v, a, cfg.euler_steps).back();
    double err = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      err += (end[j] - b[j]) * (end[j] - b[j]);
      norm += b[j] * b[j];
    }
    CHECK(std::sqrt(err / norm) < 0.02);
  }
  SUBCASE("1D monotone coupling") {
    CounterRng rng(8, "gauss1d");
    std::vector<float> s(2048), g(2048);
    for (auto& x : s) x = static_cast<float>(rng.normal());
    for (auto& x : g) x = static_cast<float>(5.0 + rng.normal());
    std::sort(s.begin(), s.end());
    std::sort(g.begin(), g.end());
    const auto start = line_set(s, FeatureDomain::clip_mapped);
    const auto v = train_velocity(start, line_set(g, FeatureDomain::vgg_like), cfg, 5);
    const auto end = integrate_endpoints(v, start, cfg.euler_steps);
    const auto fit = fit_gaussian(end);
    CHECK(fit.mean[0] == doctest::Approx(5.0).epsilon(0.2 / 5.0));
    CHECK(std::sqrt(fit.covariance[0]) == doctest::Approx(1.0).epsilon(0.2));
  }
  SUBCASE("dimension mismatch") {
    FeatureSet a(FeatureDomain::clip_mapped, 2), b(FeatureDomain::vgg_like, 3);
    a.append(std::vector<float>{1, 2});
    b.append(std::vector<float>{1, 2, 3});
    CHECK_THROWS_AS(train_velocity(a, b, cfg, 1), ValidationError);
  }
}

TEST_CASE("subdivisive flow rounds") {
  auto cfg = small_config();
  cfg.rounds = 2;
  cfg.train_steps = 400;
  cfg.mapping_steps = 400;
  const auto task = subflow::testing::mixture_to_gaussian(4, 512);

  SUBCASE("one report per round and determinism") {
    const auto a = run_subdivisive_flow(task.clip, task.vgg, cfg);
    const auto b = run_subdivisive_flow(task.clip, task.vgg, cfg);
    REQUIRE(a.reports.size() == 2);
    REQUIRE(a.pipeline.rounds.size() == 2);
    CHECK(a.reports[1].fid_before == doctest::Approx(a.reports[0].fid_after).epsilon(1e-12));
    CHECK(a.aligned.vectors == b.aligned.vectors);
    std::ostringstream ca, cb;
    write_round_csv(ca, a.reports);
    write_round_csv(cb, b.reports);
    CHECK(ca.str() == cb.str());
    CHECK(ca.str().rfind("round,sim_before,sim_after,fid_before,fid_after,displacement\n", 0) == 0);
    CHECK(a.aligned.domain == FeatureDomain::clip_mapped);
  }

  SUBCASE("single round equals one regression plus integration") {
    cfg.rounds = 1;
    const auto r = run_subdivisive_flow(task.clip, task.vgg, cfg);
    const auto v = train_velocity(r.mapped, task.vgg, cfg, derive_seed(cfg.seed, "round/1"));
    CHECK(integrate_endpoints(v, r.mapped, cfg.euler_steps).vectors == r.aligned.vectors);
  }

  SUBCASE("matched domains barely move") {
    cfg.rounds = 3;
    cfg.mapping_steps = 1500;
    const auto r = run_subdivisive_flow(task.vgg, task.vgg, cfg);
    const auto fit = fit_gaussian(task.vgg);
    double var = 0.0;
    for (std::size_t j = 0; j < fit.dim(); ++j) var += fit.covariance[j * fit.dim() + j];
    const double spread = std::sqrt(var / static_cast<double>(fit.dim()));
    for (const auto& rep : r.reports) {
      CHECK(rep.fid_after < 0.01 * var);
      CHECK(rep.displacement < 0.05 * spread * std::sqrt(static_cast<double>(fit.dim())));
    }
  }

  SUBCASE("pipeline checkpoint round trip") {
    const auto r = run_subdivisive_flow(task.clip, task.vgg, cfg);
    const auto dir = std::filesystem::temp_directory_path() / "subflow_test_pipeline";
    std::filesystem::remove_all(dir);
    save_pipeline(r.pipeline, dir);
    const auto loaded = load_pipeline(dir);
    CHECK(loaded.rounds.size() == 2);
    CHECK(loaded.config.euler_steps == cfg.euler_steps);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(align_feature(loaded, task.clip.row(i)) == align_feature(r.pipeline, task.clip.row(i)));
      const auto aligned = align_feature(r.pipeline, task.clip.row(i));
      for (std::size_t j = 0; j < aligned.size(); ++j) CHECK(aligned[j] == r.aligned.row(i)[j]);
    }
    std::filesystem::remove_all(dir);
  }

  SUBCASE("inference errors") {
    FlowPipeline empty;
    CHECK_THROWS_AS(align_feature(empty, task.clip.row(0)), ValidationError);
    const auto r = run_subdivisive_flow(task.clip, task.vgg, cfg);
    const std::vector<float> wrong(3, 0.0f);
    CHECK_THROWS_AS(align_feature(r.pipeline, wrong), ValidationError);
  }
}

TEST_CASE("identity-trained pipeline is near identity") {
  auto cfg = small_config();
  cfg.rounds = 1;
  cfg.mapping_steps = 2000;
  auto [x, y] = affine_task(2048, 1, true);
  const auto r = run_subdivisive_flow(x, y, cfg);
  auto [hx, hy] = affine_task(100, 2, true);
  for (std::size_t i = 0; i < hx.count(); ++i) {
    const auto out = align_feature(r.pipeline, hx.row(i));
    double err = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < out.size(); ++j) {
      err += (out[j] - hx.row(i)[j]) * (out[j] - hx.row(i)[j]);
      norm += hx.row(i)[j] * hx.row(i)[j];
    }
    CHECK(std::sqrt(err) <= 0.05 * std::max(std::sqrt(norm), 1.0));
  }
}

TEST_CASE("captions and their images align to nearby style vectors") {
  const EncoderConfig ecfg;
  const ClipEncoder clip(ecfg);
  const VggEncoder vgg(ecfg);
  const TextEncoder text(clip, ecfg.seed);
  std::vector<Image> train_images;
  for (std::size_t i = 0; i < 300; ++i) train_images.push_back(concept_pair(text, 21, i).image);
  auto cfg = small_config();
  cfg.rounds = 2;
  cfg.mapping_steps = 800;
  cfg.train_steps = 600;
  const auto r = run_subdivisive_flow(clip.encode(train_images), vgg.encode(train_images), cfg);

  double worst = 1.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto pair = concept_pair(text, 77, i);
    const auto t = align_feature(r.pipeline, text.encode(tokenize(pair.caption)).vectors);
    const auto im = align_feature(r.pipeline, clip.encode_one(pair.image));
    double dot = 0.0, nt = 0.0, ni = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) {
      dot += double(t[j]) * im[j];
      nt += double(t[j]) * t[j];
      ni += double(im[j]) * im[j];
    }
    worst = std::min(worst, dot / std::sqrt(nt * ni));
  }
  MESSAGE("worst aligned caption/image cosine " << worst);
  CHECK(worst >= 0.8);
}
