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


// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "subflow/error.hpp"
#include "subflow/flow.hpp"
#include "subflow/gradcheck.hpp"
#include "subflow/metrics.hpp"
#include "subflow/rasterizer.hpp"
#include "subflow/rng.hpp"
#include "subflow/stylization.hpp"
#include "subflow/textures.hpp"
#include "support/flow_tasks.hpp"
#include "support/scene_checks.hpp"

namespace fs = std::filesystem;
using namespace subflow;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (ok ? "" : "FAILED ") << what << "; ";
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

BasicTensor<double> random_double(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  CounterRng rng(seed, "acceptance/tensor");
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return BasicTensor<double>::from(shape, v);
}

// 1. Finite differences on every trainable architecture, in double.
void autodiff(Outcome& o) {
  auto dense = [](std::vector<std::size_t> widths, Activation out) {
    DenseNetSpec s;
    s.layer_widths = widths;
    s.output_activation = out;
    s.seed = 3;
    return DenseNet<double>(s);
  };
  const auto colour = dense({8, 16, 16, 3}, Activation::sigmoid);
  o.require(finite_diff_check(colour, random_double({5, 8}, 1), 1e-6) < 1e-3, "colour decoder");
  const auto mapping = dense({12, 16, 16, 6}, Activation::none);
  o.require(finite_diff_check(mapping, random_double({5, 12}, 2), 1e-6) < 1e-3, "mapping net");
  const auto velocity = dense({6 + kTimeEmbedDim, 16, 16, 6}, Activation::none);
  o.require(finite_diff_check(velocity, random_double({5, 6 + kTimeEmbedDim}, 3), 1e-6) < 1e-3, "velocity field");

  const PseudoVggT<double> vgg(1, true);
  const auto img = random_double({1, 3, 16, 16}, 4, 0.0, 1.0);
  auto tap_energy = [&] {
    auto total = BasicTensor<double>::scalar(0.0);
    for (const auto& t : vgg.taps(img)) total = add(total, mean(square(t)));
    return total;
  };
  o.require(finite_diff_check<double>(vgg.parameters(), tap_energy, 1e-6) < 1e-3, "pseudo-vgg");

  const DiscriminatorT<double> disc(3);
  const auto other = random_double({1, 3, 16, 16}, 5, 0.0, 1.0);
  o.require(finite_diff_check<double>(
                disc.parameters(), [&] { return suppression_loss<double>(img, other, disc).disc_loss; }, 1e-6) < 1e-3,
            "discriminator");

  const Decoder2dT<double> dec(4, 8);
  const auto feats = random_double({1, kVggWidths[kGeneratorTap], 8, 8}, 6);
  o.require(finite_diff_check<double>(
                dec.parameters(), [&] { return mean(square(sub(dec.forward(feats), other))); }, 1e-6) < 1e-3,
            "image decoder");

  // Stylized objective through splatting, taps, losses and the discriminator.
  GaussianScene scene;
  scene.embed_dim = 8;
  CounterRng rng(7, "acceptance/scene");
  for (int i = 0; i < 4; ++i) {
    GaussianPrimitive g;
    g.position = {0.7f * (i % 2) - 0.35f, 0.7f * (i / 2) - 0.35f, 0.0f};
    g.scale = {0.45f, 0.4f, 0.1f};
    g.opacity = 0.7f;
    for (auto& c : g.color) c = static_cast<float>(rng.uniform());
    for (int j = 0; j < 8; ++j) g.embedding.push_back(static_cast<float>(rng.normal()));
    scene.gaussians.push_back(g);
  }
  Camera cam;
  cam.position = {0, 0, 3};
  cam.orientation = {0, 1, 0, 0};
  cam.width = cam.height = 16;
  cam.focal = 16;
  const auto pw = pixel_weights(scene, cam);
  std::vector<double> emb;
  for (const auto& g : scene.gaussians) emb.insert(emb.end(), g.embedding.begin(), g.embedding.end());
  const auto inputs = BasicTensor<double>::from({4, 8}, emb);
  const PseudoVggT<double> net(1);
  const auto content_taps = net.taps(random_double({1, 3, 16, 16}, 8, 0.0, 1.0));
  const auto generated_taps = net.taps(other);
  TapStats ref;
  for (const auto& t : net.taps(random_double({1, 3, 16, 16}, 9, 0.0, 1.0))) {
    const auto m = channel_mean(t), s = channel_std(t);
    ref.mean.emplace_back(m.data().begin(), m.data().end());
    ref.std.emplace_back(s.data().begin(), s.data().end());
  }
  const LossWeights w;
  auto stylized = [&] {
    const auto rendered = reshape(transpose2d(sparse_matmul<double>(pw.weights, colour.forward(inputs))), {1, 3, 16, 16});
    const auto taps = net.taps(rendered);
    const auto total = total_stylized_loss<double>(content_loss<double>(taps, content_taps), style_loss<double>(taps, ref),
                                                   observation_loss<double>(generated_taps, taps),
                                                   BasicTensor<double>::scalar(0.2), w);
    return add(total, scale(suppression_loss<double>(other, rendered, disc).gen_signal, w.suppression));
  };
  o.require(finite_diff_check<double>(colour.parameters(), stylized, 1e-6) < 1e-3, "stylized objective");
}

// 2. Tiled renderer against the per-pixel reference, and compositing linearity.
void rasterizer(Outcome& o) {
  auto scene = generate_toy_scene(ToySceneKind::two_clusters, 50, 21, 5);
  CounterRng rng(21, "acceptance/embeddings");
  for (auto& g : scene.gaussians)
    for (auto& e : g.embedding) e = static_cast<float>(rng.uniform(-1, 1));
  RingOptions opts;
  opts.elevation_deg = 20.0;
  opts.focal = 40.0;
  double worst = 0.0, worst_lin = 0.0;
  auto other = scene;
  for (auto& g : other.gaussians)
    for (auto& e : g.embedding) e = static_cast<float>(rng.uniform(-1, 1));
  auto mix = scene;
  for (std::size_t i = 0; i < mix.size(); ++i)
    for (std::size_t k = 0; k < 5; ++k)
      mix.gaussians[i].embedding[k] = 0.7f * scene.gaussians[i].embedding[k] - 1.3f * other.gaussians[i].embedding[k];
  for (const auto& cam : camera_ring({0, 0, 0}, 8.0, 4, opts)) {
    const auto tiled = render(scene, cam), ref = render_reference(scene, cam);
    for (auto [a, b] : {std::pair{&tiled.rgb, &ref.rgb}, {&tiled.features, &ref.features}, {&tiled.alpha_mask, &ref.alpha_mask}})
      for (std::size_t i = 0; i < a->data.size(); ++i) worst = std::max(worst, double(std::abs(a->data[i] - b->data[i])));
    const auto ro = render(other, cam), rm = render(mix, cam);
    for (std::size_t i = 0; i < rm.features.data.size(); ++i)
      worst_lin = std::max(worst_lin, double(std::abs(0.7f * tiled.features.data[i] - 1.3f * ro.features.data[i] -
                                                       rm.features.data[i])));
  }
  o.require(worst < 1e-6, "tiled vs reference max " + fmt(worst));
  o.require(worst_lin < 1e-5, "linearity max " + fmt(worst_lin));
}

// 3. AdaIN output moments equal the target statistics.
void adain_moments(Outcome& o) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CounterRng rng(seed, "acceptance/adain");
    const std::size_t n = 2 + rng.below(100), d = 1 + rng.below(32);
    std::vector<float> e(n * d);
    const double spread = 0.01 + 5.0 * rng.uniform();
    for (auto& x : e) x = static_cast<float>(rng.normal() * spread + rng.uniform() - 0.5);
    StyleStats s;
    for (std::size_t j = 0; j < d; ++j) {
      s.mu.push_back(static_cast<float>(rng.normal()));
      s.sigma.push_back(static_cast<float>(0.05 + 2.0 * rng.uniform()));
    }
    const auto out = adain(e, n, s).values;
    for (std::size_t j = 0; j < d; ++j) {
      double m = 0.0, v = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += out[i * d + j];
      m /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) v += std::pow(out[i * d + j] - m, 2);
      worst = std::max({worst, std::abs(m - s.mu[j]), std::abs(std::sqrt(v / static_cast<double>(n)) - s.sigma[j])});
    }
  }
  o.require(worst < 1e-5, "max moment error " + fmt(worst));
}

FlowConfig oracle_config() {
  FlowConfig cfg;
  cfg.hidden_width = 64;
  cfg.train_steps = 1500;
  cfg.mapping_steps = 1500;
  cfg.batch_size = 128;
  return cfg;
}

// 4. Flow oracles: point mass, 1D Gaussian transport, Euler order.
void flow_oracles(Outcome& o) {
  const auto cfg = oracle_config();
  const std::vector<float> a{0.5f, -1.0f, 2.0f}, b{3.0f, 1.0f, -1.0f};
  FeatureSet sa(FeatureDomain::clip_mapped, 3), sb(FeatureDomain::vgg_like, 3);
  for (int i = 0; i < 256; ++i) {
    sa.append(a);
    sb.append(b);
  }
  const auto v = train_velocity(sa, sb, cfg, 5);
  const auto end = euler_integrate(v, a, cfg.euler_steps).back();
  double err = 0.0, norm = 0.0;
  for (int j = 0; j < 3; ++j) {
    err += std::pow(end[j] - b[j], 2);
    norm += b[j] * b[j];
  }
  o.require(std::sqrt(err / norm) < 0.02, "point mass rel err " + fmt(std::sqrt(err / norm)));

  CounterRng rng(8, "gauss1d");
  std::vector<float> s(2048), g(2048);
  for (auto& x : s) x = static_cast<float>(rng.normal());
  for (auto& x : g) x = static_cast<float>(5.0 + rng.normal());
  std::sort(s.begin(), s.end());
  std::sort(g.begin(), g.end());
  const auto start = testing::line_set(s, FeatureDomain::clip_mapped);
  const auto v1 = train_velocity(start, testing::line_set(g, FeatureDomain::vgg_like), cfg, 5);
  const auto fit = fit_gaussian(integrate_endpoints(v1, start, cfg.euler_steps));
  const double sd = std::sqrt(fit.covariance[0]);
  o.require(std::abs(fit.mean[0] - 5.0) <= 0.2 && std::abs(sd - 1.0) <= 0.2,
            "1D endpoint mean " + fmt(fit.mean[0]) + " std " + fmt(sd));

  auto linear = [](std::span<const float> x, double) { return std::vector<float>(x.begin(), x.end()); };
  const std::vector<float> one{1.0f};
  bool ok = true;
  std::string ratios;
  for (std::size_t h : {8u, 16u, 32u}) {
    const double r = (std::exp(1.0) - euler_integrate(linear, one, h).back()[0]) /
                     (std::exp(1.0) - euler_integrate(linear, one, 2 * h).back()[0]);
    ok = ok && std::abs(r - 2.0) <= 0.4;
    ratios += fmt(r) + " ";
  }
  o.require(ok, "error ratios " + ratios);
}

// 5. Subdivisive rounds on the mixture-to-Gaussian task.
void flow_rounds(Outcome& o) {
  const auto task = testing::mixture_to_gaussian(11, 4096);
  FlowConfig cfg;
  const auto r = run_subdivisive_flow(task.clip, task.vgg, cfg);
  const double baseline = r.reports.front().fid_before;
  bool fid_ok = true, sim_ok = true;
  double prev_fid = baseline, prev_sim = r.reports.front().sim_before;
  std::string fids = fmt(baseline), sims = fmt(prev_sim);
  for (const auto& rep : r.reports) {
    if (&rep != &r.reports.front()) fid_ok = fid_ok && rep.fid_after <= prev_fid + 1e-3;
    sim_ok = sim_ok && rep.sim_after >= prev_sim - 1e-3;
    prev_fid = rep.fid_after;
    prev_sim = rep.sim_after;
    fids += " " + fmt(rep.fid_after);
    sims += " " + fmt(rep.sim_after);
  }
  o.require(r.reports.size() == 3 && cfg.euler_steps == 8, "r=3 H=8");
  o.require(fid_ok, "after-round FID non-increasing: " + fids);
  o.require(prev_fid < 0.25 * baseline, "final FID " + fmt(prev_fid) + " < 0.25 x mapped " + fmt(baseline));
  o.require(sim_ok, "SIM non-decreasing: " + sims);
}

// 6. Frechet distance closed forms.
void fid_closed_forms(Outcome& o) {
  CounterRng rng(1, "acceptance/fid");
  FeatureSet a(FeatureDomain::vgg_like, 5);
  for (int i = 0; i < 500; ++i) {
    std::vector<float> r(5);
    const double shared = rng.normal();
    for (std::size_t j = 0; j < 5; ++j) r[j] = static_cast<float>(rng.normal() * (1.0 + 0.3 * j) + 0.7 * shared);
    a.append(r);
  }
  const double same = frechet_distance(a, a);
  o.require(std::abs(same) < 1e-6, "identical " + fmt(same));
  auto shifted = a;
  const float delta[5] = {0.5f, -1.0f, 0.25f, 2.0f, 0.0f};
  double dd = 0.0;
  for (float v : delta) dd += double(v) * v;
  for (std::size_t i = 0; i < shifted.count(); ++i)
    for (std::size_t j = 0; j < 5; ++j) shifted.row(i)[j] += delta[j];
  const double shift = frechet_distance(a, shifted);
  o.require(std::abs(shift - dd) < 1e-5, "mean shift " + fmt(shift) + " vs " + fmt(dd));
  FeatureSet one(FeatureDomain::vgg_like, 1), four(FeatureDomain::vgg_like, 1);
  one.vectors = {-1.0f, 0.0f, 1.0f};
  four.vectors = {-2.0f, 0.0f, 2.0f};
  const double var = frechet_distance(one, four);
  o.require(std::abs(var - 1.0) < 1e-5, "1D variances 1 vs 4 gives " + fmt(var));
}

// 7. Stylization leaves geometry untouched on every toy scene.
void geometry(Outcome& o) {
  const VggEncoder enc;
  RingOptions ro;
  ro.elevation_deg = 50.0;
  const auto cams = camera_ring({0, 0, 0}, 6.0, 8, ro);
  DistillConfig dc;
  dc.steps = 50;
  for (auto kind : {ToySceneKind::lattice, ToySceneKind::two_clusters, ToySceneKind::textured_slab}) {
    const auto d = distill_embeddings(generate_toy_scene(kind, 128, 2), cams, enc, dc);
    CounterRng rng(9, "acceptance/style");
    StyleStats s;
    for (std::size_t j = 0; j < enc.style_dim(); ++j) {
      s.mu.push_back(static_cast<float>(rng.normal()));
      s.sigma.push_back(static_cast<float>(0.2 + rng.uniform()));
    }
    const auto out = stylize_scene(d.scene, s, d.decoder);
    const auto diff = testing::geometry_mismatch(d.scene, out);
    bool colours_changed = false;
    for (std::size_t i = 0; i < out.size(); ++i) colours_changed |= out.gaussians[i].color != d.scene.gaussians[i].color;
    o.require(diff.empty() && colours_changed, to_string(kind) + (diff.empty() ? " identical" : " differs at " + diff));
  }
}

// Shared seeded run behind criteria 8 and 9: textured slab, 8-camera ring,
// full objective against the run without observation and suppression terms.
struct StandardRun {
  double content_short = 0.0;
  double full_short = 0.0, ablated_short = 0.0;
  double full_style = 0.0, ablated_style = 0.0;
  double initial_style = 0.0;
  double total_start = 0.0, total_end = 0.0;
};

double mean_style(const GaussianScene& s, const std::vector<Camera>& cams, const VggEncoder& vgg, const TapStats& ref,
                  int size) {
  double t = 0.0;
  for (const auto& c : cams) {
    const auto pw = pixel_weights(s, resized(c, size, size));
    t += style_loss(composite_attributes(pw, color_matrix(s), 3), ref, vgg.net());
  }
  return t / static_cast<double>(cams.size());
}

const StandardRun& standard_run() {
  static const StandardRun run = [] {
    StandardRun r;
    RingOptions ro;
    ro.elevation_deg = 60.0;
    const auto cams = camera_ring({0, 0, 0}, 3.5, 8, ro);
    const VggEncoder vgg;
    const ClipEncoder clip;
    const auto scene = generate_toy_scene(ToySceneKind::textured_slab, 256, 3);
    const auto d = distill_embeddings(scene, cams, vgg);
    const auto corpus = texture_corpus(300, 32, 17);
    FlowConfig fc;
    fc.mapping_steps = 800;
    fc.train_steps = 600;
    fc.hidden_width = 64;
    fc.batch_size = 128;
    const auto flow = run_subdivisive_flow(clip.encode(corpus), vgg.encode(corpus), fc);
    const auto generator = pretrain_decoder2d(vgg.net());
    CounterRng sr(5, "style");
    const auto style = render_texture(random_texture(sr), 32);
    const auto stats = stats_from_vector(align_feature(flow.pipeline, clip.encode_one(style)));
    const auto ref = vgg.tap_stats(style);
    StylizationConfig sc;
    sc.flow_loss = flow.pipeline.final_loss;
    r.content_short = mean_rmse(eval_consistency(scene, cams), ViewRange::short_range);
    r.initial_style = mean_style(stylize_scene(d.scene, stats, d.decoder), cams, vgg, ref, sc.image_size);

    LossWeights ablated;
    ablated.lambda_obs = 0.0;
    ablated.suppression = 0.0;
    const auto full = train_stylization(d.scene, cams, style, stats, d.decoder, vgg, generator, LossWeights{}, sc);
    const auto abl = train_stylization(d.scene, cams, style, stats, d.decoder, vgg, generator, ablated, sc);
    const auto full_scene = stylize_scene(d.scene, stats, full.decoder);
    const auto abl_scene = stylize_scene(d.scene, stats, abl.decoder);
    r.full_short = mean_rmse(eval_consistency(full_scene, cams), ViewRange::short_range);
    r.ablated_short = mean_rmse(eval_consistency(abl_scene, cams), ViewRange::short_range);
    r.full_style = mean_style(full_scene, cams, vgg, ref, sc.image_size);
    r.ablated_style = mean_style(abl_scene, cams, vgg, ref, sc.image_size);
    r.total_start = window_mean(full.log, &StylizationLogRow::total, false);
    r.total_end = window_mean(full.log, &StylizationLogRow::total, true);
    return r;
  }();
  return run;
}

// 8. Consistency of the stylized slab against the content slab.
void consistency(Outcome& o) {
  const auto& r = standard_run();
  o.require(r.content_short < 0.05, "content short-range RMSE " + fmt(r.content_short));
  o.require(r.full_short < 0.05, "stylized " + fmt(r.full_short));
  o.require(r.full_short <= r.content_short + 0.02, "stylized <= content + 0.02");
}

// 9. Removing the observation and suppression terms does not improve style match.
void ablation(Outcome& o) {
  const auto& r = standard_run();
  o.require(r.full_style <= 1.05 * r.ablated_style,
            "final style full " + fmt(r.full_style) + " vs ablated " + fmt(r.ablated_style) + " (+5% allowed)");
  o.require(r.full_short <= r.ablated_short + 0.01,
            "short RMSE full " + fmt(r.full_short) + " vs ablated " + fmt(r.ablated_short));
  std::printf("  note: style loss before training %s, after %s (ratio %s); total loss window mean %s -> %s\n",
              fmt(r.initial_style).c_str(), fmt(r.full_style).c_str(), fmt(r.full_style / r.initial_style).c_str(),
              fmt(r.total_start).c_str(), fmt(r.total_end).c_str());
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 10. Two executions of the pipeline script produce identical artifacts.
void determinism(Outcome& o) {
  const auto root = fs::temp_directory_path() / ("subflow_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const auto cfg = root / "run.cfg";
  std::ofstream(cfg) << "scene.count=96\ndistill.steps=300\nflow.corpus_size=150\nflow.train_steps=300\n"
                        "flow.mapping_steps=300\ngenerator.steps=200\ngenerator.style_steps=100\nstyle.steps=150\n";
  std::vector<fs::path> files;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("sh ") + SUBFLOW_PIPELINE_SCRIPT + " " + SUBFLOW_CLI_PATH + " " + cfg.string() +
                            " " + (root / run).string() + " > " + (root / run).string() + ".log 2>&1";
    const int rc = std::system(cmd.c_str());
    o.require(rc == 0, std::string("run ") + run + " exit " + std::to_string(rc));
  }
  std::size_t compared = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    const auto ext = e.path().extension();
    if (ext != ".csv" && ext != ".ppm") continue;
    const auto twin = root / "b" / fs::relative(e.path(), root / "a");
    ++compared;
    if (!fs::exists(twin) || read_bytes(e.path()) != read_bytes(twin)) {
      ++differing;
      o.require(false, "differs: " + fs::relative(e.path(), root / "a").string());
    }
  }
  o.require(compared >= 20, std::to_string(compared) + " CSV/PPM files compared, " + std::to_string(differing) + " differ");
  if (o.pass) fs::remove_all(root);
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "autodiff finite differences", autodiff},
      {2, "rasterizer oracle equivalence", rasterizer},
      {3, "AdaIN moment identity", adain_moments},
      {4, "flow oracles", flow_oracles},
      {5, "subdivisive segmentation trend", flow_rounds},
      {6, "FID closed forms", fid_closed_forms},
      {7, "geometry immutability", geometry},
      {8, "consistency protocol", consistency},
      {9, "loss-ablation direction", ablation},
      {10, "determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s [PRIMARY] %d. %s: %s(%.1fs)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str(), sec);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
