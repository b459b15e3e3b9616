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

#include "subflow/flow.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "subflow/adam.hpp"
#include "subflow/checkpoint.hpp"
#include "subflow/error.hpp"
#include "subflow/kv.hpp"
#include "subflow/metrics.hpp"
#include "subflow/rng.hpp"

namespace subflow {

namespace {

DenseNetSpec mlp(std::size_t in, std::size_t hidden, std::size_t out, std::uint64_t seed) {
  DenseNetSpec spec;
  spec.layer_widths = {in, hidden, hidden, out};
  spec.hidden_activations = {Activation::relu};
  spec.output_activation = Activation::none;
  spec.seed = seed;
  return spec;
}

void check_pair(const FeatureSet& a, const FeatureSet& b, const char* who) {
  a.validate();
  b.validate();
  if (a.count() != b.count()) {
    throw ValidationError(std::string(who) + ": paired sets differ in size (" + std::to_string(a.count()) + " vs " +
                          std::to_string(b.count()) + ")");
  }
}

Tensor gather_rows(const FeatureSet& f, const std::vector<std::size_t>& idx) {
  std::vector<float> out;
  out.reserve(idx.size() * f.dim);
  for (std::size_t i : idx) {
    const auto r = f.row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return Tensor::from({idx.size(), f.dim}, std::move(out));
}

std::vector<std::size_t> draw_batch(CounterRng& rng, std::size_t m, std::size_t batch) {
  std::vector<std::size_t> idx(std::min(batch, m));
  for (auto& i : idx) i = rng.below(m);
  return idx;
}

void check_finite_rows(const std::vector<float>& v, std::size_t step) {
  for (float x : v)
    if (!std::isfinite(x)) throw NumericError("euler_integrate: non-finite state at step " + std::to_string(step));
}

// Cosine decay from the configured rate down to 5% of it.
float scheduled_rate(const FlowConfig& cfg, std::size_t step, std::size_t total) {
  const double frac = total <= 1 ? 0.0 : static_cast<double>(step) / static_cast<double>(total - 1);
  return static_cast<float>(cfg.learning_rate * (0.05 + 0.95 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac))));
}

double mean_displacement(const FeatureSet& a, const FeatureSet& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.count(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.dim; ++j) {
      const double diff = static_cast<double>(a.row(i)[j]) - b.row(i)[j];
      d += diff * diff;
    }
    total += std::sqrt(d);
  }
  return total / static_cast<double>(a.count());
}

}  // namespace

void FlowConfig::validate() const {
  if (euler_steps < 1) throw ValidationError("flow: euler_steps (H) must be >= 1");
  if (rounds < 1) throw ValidationError("flow: rounds (r) must be >= 1");
  if (batch_size < 1) throw ValidationError("flow: batch_size must be >= 1");
  if (hidden_width < 1) throw ValidationError("flow: hidden_width must be >= 1");
  if (!(learning_rate > 0.0f) || !std::isfinite(learning_rate)) throw ValidationError("flow: learning_rate must be > 0");
}

std::array<float, kTimeEmbedDim> time_embedding(double t) {
  std::array<float, kTimeEmbedDim> e{};
  for (std::size_t k = 1; k <= kTimeEmbedDim / 2; ++k) {
    e[2 * (k - 1)] = static_cast<float>(std::sin(std::numbers::pi * k * t));
    e[2 * (k - 1) + 1] = static_cast<float>(std::cos(std::numbers::pi * k * t));
  }
  return e;
}

float TrainLog::tail_mean(std::size_t window) const {
  if (losses.empty()) return 0.0f;
  const std::size_t n = std::min(window, losses.size());
  double s = 0.0;
  for (std::size_t i = losses.size() - n; i < losses.size(); ++i) s += losses[i];
  return static_cast<float>(s / static_cast<double>(n));
}

MappingNet::MappingNet(std::size_t in_dim, std::size_t out_dim, std::size_t hidden, std::uint64_t seed)
    : net_(mlp(in_dim, hidden, out_dim, seed)) {}

FeatureSet MappingNet::apply(const FeatureSet& f) const {
  if (f.dim != in_dim()) {
    throw ValidationError("mapping: expected " + std::to_string(in_dim()) + "-dim features, got " +
                          std::to_string(f.dim));
  }
  NoGradGuard guard;
  auto out = FeatureSet::from_tensor(forward(f.to_tensor()), FeatureDomain::clip_mapped, f.provenance);
  return out;
}

std::vector<float> MappingNet::apply(std::span<const float> x) const {
  FeatureSet f(FeatureDomain::clip_like, x.size());
  f.append(x);
  return apply(f).vectors;
}

VelocityField::VelocityField(std::size_t dim, std::size_t hidden, std::uint64_t seed)
    : dim_(dim), net_(mlp(dim + kTimeEmbedDim, hidden, dim, seed)) {}

Tensor VelocityField::forward(const Tensor& x, std::span<const float> t) const {
  if (x.rank() != 2 || x.dim(1) != dim_ || x.dim(0) != t.size()) {
    throw ValidationError("velocity field: expected [" + std::to_string(t.size()) + "," + std::to_string(dim_) +
                          "] input, got " + shape_string(x.shape()));
  }
  std::vector<float> emb;
  emb.reserve(t.size() * kTimeEmbedDim);
  for (float ti : t) {
    const auto e = time_embedding(ti);
    emb.insert(emb.end(), e.begin(), e.end());
  }
  return net_.forward(concat_cols(x, Tensor::from({t.size(), kTimeEmbedDim}, std::move(emb))));
}

std::vector<float> VelocityField::eval(std::span<const float> x, double t) const {
  NoGradGuard guard;
  const float tf = static_cast<float>(t);
  const auto out = forward(Tensor::from({1, dim_}, std::vector<float>(x.begin(), x.end())), {&tf, 1});
  return {out.data().begin(), out.data().end()};
}

MappingNet train_mapping(const FeatureSet& clip, const FeatureSet& vgg, const FlowConfig& cfg, TrainLog* log) {
  cfg.validate();
  check_pair(clip, vgg, "train_mapping");
  MappingNet net(clip.dim, vgg.dim, cfg.hidden_width, derive_seed(cfg.seed, "mapping"));
  Adam opt(net.parameters(), cfg.learning_rate);
  CounterRng rng(cfg.seed, "mapping/batches");
  for (std::size_t step = 0; step < cfg.mapping_steps; ++step) {
    const auto idx = draw_batch(rng, clip.count(), cfg.batch_size);
    opt.zero_grad();
    const auto loss = mse(net.forward(gather_rows(clip, idx)), gather_rows(vgg, idx));
    backward(loss);
    opt.step();
    if (log) log->losses.push_back(loss.item());
  }
  net.trained = true;
  return net;
}

VelocityField train_velocity(const FeatureSet& start, const FeatureSet& target, const FlowConfig& cfg,
                             std::uint64_t round_seed, TrainLog* log) {
  cfg.validate();
  check_pair(start, target, "train_velocity");
  if (start.dim != target.dim) throw ValidationError("train_velocity: start and target dimensions differ");
  const std::size_t d = start.dim;
  VelocityField v(d, cfg.hidden_width, derive_seed(round_seed, "velocity/init"));
  Adam opt(v.parameters(), cfg.learning_rate);
  CounterRng rng(round_seed, "velocity/batches");
  for (std::size_t step = 0; step < cfg.train_steps; ++step) {
    const auto idx = draw_batch(rng, start.count(), cfg.batch_size);
    std::vector<float> t(idx.size());
    std::vector<float> xt(idx.size() * d), drift(idx.size() * d);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      t[b] = static_cast<float>(rng.uniform());
      const auto s = start.row(idx[b]), g = target.row(idx[b]);
      for (std::size_t j = 0; j < d; ++j) {
        xt[b * d + j] = (1.0f - t[b]) * s[j] + t[b] * g[j];
        drift[b * d + j] = g[j] - s[j];
      }
    }
    opt.set_learning_rate(scheduled_rate(cfg, step, cfg.train_steps));
    opt.zero_grad();
    const auto pred = v.forward(Tensor::from({idx.size(), d}, std::move(xt)), t);
    const auto loss = mse(pred, Tensor::from({idx.size(), d}, std::move(drift)));
    backward(loss);
    opt.step();
    if (log) log->losses.push_back(loss.item());
  }
  return v;
}

std::vector<std::vector<float>> euler_integrate(const VelocityFn& v, std::span<const float> x0, std::size_t steps) {
  if (steps < 1) throw ValidationError("euler_integrate: H must be >= 1");
  std::vector<std::vector<float>> traj;
  traj.reserve(steps + 1);
  traj.emplace_back(x0.begin(), x0.end());
  check_finite_rows(traj.back(), 0);
  const double dt = 1.0 / static_cast<double>(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const auto& x = traj.back();
    const auto vel = v(x, static_cast<double>(i) * dt);
    if (vel.size() != x.size()) throw ValidationError("euler_integrate: velocity has the wrong dimension");
    std::vector<float> next(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) next[j] = static_cast<float>(x[j] + dt * vel[j]);
    check_finite_rows(next, i + 1);
    traj.push_back(std::move(next));
  }
  return traj;
}

std::vector<std::vector<float>> euler_integrate(const VelocityField& v, std::span<const float> x0, std::size_t steps) {
  if (x0.size() != v.dim()) throw ValidationError("euler_integrate: start vector has the wrong dimension");
  return euler_integrate([&](std::span<const float> x, double t) { return v.eval(x, t); }, x0, steps);
}

FeatureSet integrate_endpoints(const VelocityField& v, const FeatureSet& start, std::size_t steps) {
  if (steps < 1) throw ValidationError("euler_integrate: H must be >= 1");
  if (start.dim != v.dim()) throw ValidationError("integrate_endpoints: dimension mismatch");
  NoGradGuard guard;
  const std::size_t m = start.count(), d = start.dim;
  std::vector<float> x = start.vectors;
  const double dt = 1.0 / static_cast<double>(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const std::vector<float> t(m, static_cast<float>(static_cast<double>(i) * dt));
    const auto vel = v.forward(Tensor::from({m, d}, x), t);
    const auto vd = vel.data();
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = static_cast<float>(x[j] + dt * vd[j]);
    check_finite_rows(x, i + 1);
  }
  FeatureSet out(FeatureDomain::clip_mapped, d, start.provenance);
  out.vectors = std::move(x);
  return out;
}

FlowResult run_subdivisive_flow(const FeatureSet& clip, const FeatureSet& vgg, const FlowConfig& cfg) {
  cfg.validate();
  check_pair(clip, vgg, "run_subdivisive_flow");
  FlowResult result;
  result.pipeline.config = cfg;
  result.pipeline.mapping = train_mapping(clip, vgg, cfg);
  result.mapped = result.pipeline.mapping.apply(clip);
  FeatureSet current = result.mapped;
  for (std::size_t k = 1; k <= cfg.rounds; ++k) {
    TrainLog log;
    const auto round_seed = derive_seed(cfg.seed, "round/" + std::to_string(k));
    auto v = train_velocity(current, vgg, cfg, round_seed, &log);
    auto end = integrate_endpoints(v, current, cfg.euler_steps);
    FlowRoundReport r;
    r.round = k;
    r.sim_before = cosine_sim(current, vgg);
    r.sim_after = cosine_sim(end, vgg);
    r.fid_before = frechet_distance(current, vgg);
    r.fid_after = frechet_distance(end, vgg);
    r.displacement = mean_displacement(current, end);
    r.final_loss = log.tail_mean(100);
    result.pipeline.final_loss = r.final_loss;
    result.reports.push_back(r);
    result.pipeline.rounds.push_back(std::move(v));
    current = std::move(end);
  }
  result.aligned = std::move(current);
  return result;
}

std::vector<float> align_feature(const FlowPipeline& pipeline, std::span<const float> x) {
  if (!pipeline.trained()) throw ValidationError("align_feature: flow pipeline is not trained");
  if (x.size() != pipeline.mapping.in_dim()) {
    throw ValidationError("align_feature: expected a " + std::to_string(pipeline.mapping.in_dim()) +
                          "-dim vector, got " + std::to_string(x.size()));
  }
  auto current = pipeline.mapping.apply(x);
  for (const auto& v : pipeline.rounds) current = euler_integrate(v, current, pipeline.config.euler_steps).back();
  return current;
}

void write_round_csv(std::ostream& out, const std::vector<FlowRoundReport>& reports) {
  out << "round,sim_before,sim_after,fid_before,fid_after,displacement\n";
  for (const auto& r : reports) {
    out << r.round << ',' << format_value(r.sim_before) << ',' << format_value(r.sim_after) << ','
        << format_value(r.fid_before) << ',' << format_value(r.fid_after) << ',' << format_value(r.displacement)
        << '\n';
  }
}

void save_pipeline(const FlowPipeline& pipeline, const std::filesystem::path& dir) {
  if (!pipeline.trained()) throw ValidationError("save_pipeline: pipeline is not trained");
  std::filesystem::create_directories(dir);
  const auto& c = pipeline.config;
  std::ostringstream m;
  m << "clip_dim=" << pipeline.mapping.in_dim() << '\n'
    << "style_dim=" << pipeline.mapping.out_dim() << '\n'
    << "hidden_width=" << c.hidden_width << '\n'
    << "euler_steps=" << c.euler_steps << '\n'
    << "rounds=" << c.rounds << '\n'
    << "train_steps=" << c.train_steps << '\n'
    << "mapping_steps=" << c.mapping_steps << '\n'
    << "batch_size=" << c.batch_size << '\n'
    << "learning_rate=" << format_value(c.learning_rate) << '\n'
    << "seed=" << c.seed << '\n'
    << "final_loss=" << format_value(pipeline.final_loss) << '\n';
  write_text_file((dir / "manifest.txt").string(), m.str());
  save_parameters(dir / "mapping.prms", pipeline.mapping.parameters());
  for (std::size_t k = 0; k < pipeline.rounds.size(); ++k) {
    save_parameters(dir / ("velocity_" + std::to_string(k + 1) + ".prms"), pipeline.rounds[k].parameters());
  }
}

FlowPipeline load_pipeline(const std::filesystem::path& dir) {
  const auto manifest_path = (dir / "manifest.txt").string();
  const auto kv = parse_key_values(read_text_file(manifest_path), manifest_path);
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError(manifest_path + ": missing key " + key);
    return it->second;
  };
  FlowPipeline p;
  auto& c = p.config;
  c.hidden_width = parse_size("hidden_width", get("hidden_width"));
  c.euler_steps = parse_size("euler_steps", get("euler_steps"));
  c.rounds = parse_size("rounds", get("rounds"));
  c.train_steps = parse_size("train_steps", get("train_steps"));
  c.mapping_steps = parse_size("mapping_steps", get("mapping_steps"));
  c.batch_size = parse_size("batch_size", get("batch_size"));
  c.learning_rate = static_cast<float>(parse_double("learning_rate", get("learning_rate")));
  c.seed = parse_u64("seed", get("seed"));
  c.validate();
  p.final_loss = parse_double("final_loss", get("final_loss"));
  const std::size_t clip_dim = parse_size("clip_dim", get("clip_dim"));
  const std::size_t style_dim = parse_size("style_dim", get("style_dim"));
  p.mapping = MappingNet(clip_dim, style_dim, c.hidden_width, 0);
  load_parameters_into(dir / "mapping.prms", p.mapping.parameters());
  p.mapping.trained = true;
  for (std::size_t k = 1; k <= c.rounds; ++k) {
    VelocityField v(style_dim, c.hidden_width, 0);
    load_parameters_into(dir / ("velocity_" + std::to_string(k) + ".prms"), v.parameters());
    p.rounds.push_back(std::move(v));
  }
  return p;
}

}  // namespace subflow
