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


#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "subflow/checkpoint.hpp"
#include "subflow/config.hpp"
#include "subflow/error.hpp"
#include "subflow/features.hpp"
#include "subflow/image.hpp"
#include "subflow/kv.hpp"
#include "subflow/metrics.hpp"
#include "subflow/rng.hpp"
#include "subflow/textures.hpp"

namespace fs = std::filesystem;
using namespace subflow;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> rounds;
  std::optional<std::size_t> steps;
  std::string out;
};

struct StyleArgs {
  std::string image;
  std::string text;
  std::string feat;
  std::string scene;
  std::string decoder;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "key=value config file");
  cmd->add_option("--seed", a.seed, "master seed");
  cmd->add_option("--rounds", a.rounds, "flow rounds");
  cmd->add_option("--steps", a.steps, "training steps of this command");
  cmd->add_option("--out", a.out, "output directory");
}

RunConfig resolve(const CommonArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.rounds) cfg.flow.rounds = *a.rounds;
  if (!a.out.empty()) cfg.out = a.out;
  cfg.validate();
  return cfg;
}

fs::path out_path(const RunConfig& cfg, const std::string& name) { return fs::path(cfg.out) / name; }

fs::path require(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p)) throw ValidationError("missing input " + p.string() + " (run " + producer + " first)");
  return p;
}

void note(const std::string& msg) { std::cerr << "subflow: " << msg << '\n'; }

void write_csv(const fs::path& p, const std::string& text) {
  write_text_file(p.string(), text);
  note("wrote " + p.string());
}

ColorDecoder load_color_decoder(const RunConfig& cfg, const fs::path& p) {
  ColorDecoder dec(cfg.encoder.style_dim, cfg.distill.hidden_width, 0);
  load_parameters_into(p, dec.parameters());
  return dec;
}

std::vector<Image> concept_images(const TextEncoder& text, const RunConfig& cfg) {
  std::vector<Image> images;
  const auto seed = derive_seed(cfg.seed, "corpus");
  for (std::size_t i = 0; i < cfg.corpus_size; ++i) images.push_back(concept_pair(text, seed, i).image);
  return images;
}

Image default_style_image(const RunConfig& cfg) {
  CounterRng rng(cfg.style_texture_seed, "style");
  return render_texture(random_texture(rng), cfg.stylization.image_size);
}

Decoder2d cached_generator(const RunConfig& cfg, const VggEncoder& vgg) {
  auto gcfg = cfg.generator;
  gcfg.seed = cfg.encoder.seed;
  const auto stem = "generator_e" + std::to_string(cfg.encoder.seed);
  const auto params = out_path(cfg, stem + ".prms");
  const auto manifest = out_path(cfg, stem + ".txt");
  std::ostringstream m;
  m << "corpus_size=" << gcfg.corpus_size << "\nsteps=" << gcfg.steps << "\nstyle_steps=" << gcfg.style_steps
    << "\nbatch_size=" << gcfg.batch_size << "\nwidth=" << gcfg.width << "\nlearning_rate="
    << format_value(gcfg.learning_rate) << "\nstyle_weight=" << format_value(gcfg.style_weight) << '\n';
  if (fs::exists(params) && fs::exists(manifest) && read_text_file(manifest.string()) == m.str()) {
    Decoder2d g(0, gcfg.width);
    load_parameters_into(params, g.parameters());
    g.trained = true;
    note("loaded 2D generator prior " + params.string());
    return g;
  }
  note("pretraining 2D generator prior");
  auto g = pretrain_decoder2d(vgg.net(), gcfg);
  save_parameters(params, g.parameters());
  write_text_file(manifest.string(), m.str());
  return g;
}

StyleStats style_from_image(const FlowPipeline& flow, const ClipEncoder& clip, const Image& img) {
  return stats_from_vector(align_feature(flow, clip.encode_one(img)));
}

StyleStats style_from_feat(const RunConfig& cfg, const fs::path& path, const VggEncoder& vgg) {
  const auto f = import_features(path);
  if (f.count() == 0) throw ValidationError(path.string() + ": no feature rows");
  std::vector<float> mean(f.dim, 0.0f);
  for (std::size_t i = 0; i < f.count(); ++i)
    for (std::size_t j = 0; j < f.dim; ++j) mean[j] += f.row(i)[j] / static_cast<float>(f.count());
  switch (f.domain) {
    case FeatureDomain::vgg_like:
      if (f.dim != vgg.style_dim()) {
        throw ValidationError(path.string() + ": vgg-domain rows must have " + std::to_string(vgg.style_dim()) + " channels");
      }
      return stats_from_feature(f);
    case FeatureDomain::clip_mapped:
      if (f.dim != vgg.vector_dim()) {
        throw ValidationError(path.string() + ": aligned rows must have " + std::to_string(vgg.vector_dim()) + " values");
      }
      return stats_from_vector(mean);
    case FeatureDomain::clip_like: {
      const auto flow = load_pipeline(require(out_path(cfg, "flow"), "train-flow"));
      return stats_from_vector(align_feature(flow, mean));
    }
  }
  throw ValidationError(path.string() + ": unknown feature domain");
}

int cmd_gen_scene(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  const auto scene = generate_toy_scene(cfg.scene_kind, cfg.scene_count, derive_seed(cfg.seed, "scene"), cfg.encoder.style_dim);
  save_scene(scene, out_path(cfg, "scene.gscn"));
  note("wrote " + out_path(cfg, "scene.gscn").string());
  return 0;
}

int cmd_embed(RunConfig cfg, const CommonArgs& a) {
  if (a.steps) cfg.distill.steps = *a.steps;
  const auto scene = load_scene(require(out_path(cfg, "scene.gscn"), "gen-scene"));
  const VggEncoder vgg(cfg.encoder);
  auto dc = cfg.distill;
  dc.seed = derive_seed(cfg.seed, "distill");
  const auto r = distill_embeddings(scene, cfg.cameras(), vgg, dc);
  save_scene(r.scene, out_path(cfg, "distilled.gscn"));
  save_parameters(out_path(cfg, "color_decoder.prms"), r.decoder.parameters());
  note("reconstruction error " + format_value(reconstruction_error(r.scene, r.decoder)));
  return 0;
}

int cmd_train_flow(RunConfig cfg, const CommonArgs& a) {
  if (a.steps) cfg.flow.train_steps = *a.steps;
  fs::create_directories(cfg.out);
  const ClipEncoder clip(cfg.encoder);
  const VggEncoder vgg(cfg.encoder);
  const TextEncoder text(clip, cfg.encoder.seed);
  const auto images = concept_images(text, cfg);
  auto fc = cfg.flow;
  fc.seed = derive_seed(cfg.seed, "flow");
  const auto r = run_subdivisive_flow(clip.encode(images), vgg.encode(images), fc);
  save_pipeline(r.pipeline, out_path(cfg, "flow"));
  std::ostringstream csv;
  write_round_csv(csv, r.reports);
  write_csv(out_path(cfg, "flow_rounds.csv"), csv.str());
  return 0;
}

int cmd_train_style(RunConfig cfg, const CommonArgs& a, const StyleArgs& s) {
  if (a.steps) cfg.stylization.steps = *a.steps;
  if (!s.text.empty() || !s.feat.empty()) {
    throw ValidationError("train-style: the style losses need a style image; use --image or the configured texture");
  }
  const auto scene = load_scene(require(out_path(cfg, "distilled.gscn"), "embed"));
  const auto decoder = load_color_decoder(cfg, require(out_path(cfg, "color_decoder.prms"), "embed"));
  const auto flow = load_pipeline(require(out_path(cfg, "flow"), "train-flow"));
  const ClipEncoder clip(cfg.encoder);
  const VggEncoder vgg(cfg.encoder);
  const Image style = s.image.empty() ? default_style_image(cfg) : load_ppm(s.image);
  save_ppm(style, out_path(cfg, "style.ppm"));
  const auto generator = cached_generator(cfg, vgg);
  auto sc = cfg.stylization;
  sc.seed = derive_seed(cfg.seed, "stylize");
  sc.flow_loss = flow.final_loss;
  const auto r = train_stylization(scene, cfg.cameras(), style, style_from_image(flow, clip, style), decoder, vgg,
                                   generator, cfg.weights, sc);
  save_parameters(out_path(cfg, "style_decoder.prms"), r.decoder.parameters());
  save_parameters(out_path(cfg, "discriminator.prms"), r.discriminator.parameters());
  std::ostringstream csv;
  write_training_csv(csv, r.log);
  write_csv(out_path(cfg, "training.csv"), csv.str());
  return 0;
}

int cmd_stylize(const RunConfig& cfg, const StyleArgs& s) {
  const int given = !s.image.empty() + !s.text.empty() + !s.feat.empty();
  if (given != 1) throw ValidationError("stylize: give exactly one of --image, --text, --feat");
  const auto scene_path = s.scene.empty() ? out_path(cfg, "distilled.gscn") : fs::path(s.scene);
  const auto scene = load_scene(require(scene_path, "embed"));
  const auto decoder_path = s.decoder.empty() ? out_path(cfg, "style_decoder.prms") : fs::path(s.decoder);
  const auto decoder = load_color_decoder(cfg, require(decoder_path, "train-style"));
  const ClipEncoder clip(cfg.encoder);
  const VggEncoder vgg(cfg.encoder);
  StyleStats stats;
  if (!s.feat.empty()) {
    stats = style_from_feat(cfg, require(s.feat, "an external feature export"), vgg);
  } else {
    const auto flow = load_pipeline(require(out_path(cfg, "flow"), "train-flow"));
    if (!s.image.empty()) {
      stats = style_from_image(flow, clip, load_ppm(require(s.image, "an image export")));
    } else {
      const TextEncoder text(clip, cfg.encoder.seed);
      stats = stats_from_vector(align_feature(flow, text.encode(tokenize(s.text)).vectors));
    }
  }
  bool degenerate = false;
  const auto out = stylize_scene(scene, stats, decoder, &degenerate);
  if (degenerate) note("warning: some embedding channels are constant; their spread was floored");
  save_scene(out, out_path(cfg, "stylized.gscn"));
  note("wrote " + out_path(cfg, "stylized.gscn").string());
  return 0;
}

fs::path scene_arg(const RunConfig& cfg, const StyleArgs& s) {
  return s.scene.empty() ? require(out_path(cfg, "stylized.gscn"), "stylize") : require(s.scene, "gen-scene");
}

int cmd_render(const RunConfig& cfg, const StyleArgs& s) {
  const auto path = scene_arg(cfg, s);
  const auto scene = load_scene(path);
  const auto dir = out_path(cfg, "renders");
  fs::create_directories(dir);
  const auto cams = cfg.cameras();
  RenderOptions opts;
  opts.features = false;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "_%02zu.ppm", i);
    save_ppm(render(scene, cams[i], opts).rgb, dir / (path.stem().string() + name));
  }
  note("wrote " + std::to_string(cams.size()) + " views to " + dir.string());
  return 0;
}

int cmd_eval_align(const RunConfig& cfg) {
  const auto flow = load_pipeline(require(out_path(cfg, "flow"), "train-flow"));
  const ClipEncoder clip(cfg.encoder);
  const VggEncoder vgg(cfg.encoder);
  const TextEncoder text(clip, cfg.encoder.seed);
  std::vector<Image> images;
  const auto seed = derive_seed(cfg.seed, "eval");
  for (std::size_t i = 0; i < cfg.corpus_size; ++i) images.push_back(concept_pair(text, seed, i).image);
  const auto target = vgg.encode(images);
  auto current = flow.mapping.apply(clip.encode(images));
  std::vector<MetricRow> rows{{"sim", "mapped", cosine_sim(current, target)},
                              {"fid", "mapped", frechet_distance(current, target)}};
  for (std::size_t k = 0; k < flow.rounds.size(); ++k) {
    current = integrate_endpoints(flow.rounds[k], current, flow.config.euler_steps);
    rows.push_back({"sim", "round_" + std::to_string(k + 1), cosine_sim(current, target)});
    rows.push_back({"fid", "round_" + std::to_string(k + 1), frechet_distance(current, target)});
  }
  std::ostringstream csv;
  write_metrics_csv(csv, rows);
  write_csv(out_path(cfg, "align.csv"), csv.str());
  return 0;
}

int cmd_eval_consistency(const RunConfig& cfg, const StyleArgs& s) {
  const auto path = scene_arg(cfg, s);
  const auto reports = eval_consistency(load_scene(path), cfg.cameras());
  std::vector<MetricRow> rows;
  for (auto range : {ViewRange::short_range, ViewRange::long_range}) {
    rows.push_back({"masked_rmse", to_string(range), mean_rmse(reports, range)});
  }
  for (const auto& r : reports) {
    rows.push_back({"masked_rmse", to_string(r.range) + "_" + std::to_string(r.src) + "_" + std::to_string(r.dst),
                    r.masked_rmse});
  }
  std::ostringstream csv;
  write_metrics_csv(csv, rows);
  write_csv(out_path(cfg, "consistency_" + path.stem().string() + ".csv"), csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal style transfer for Gaussian-splat scenes"};
  app.require_subcommand(1);
  CommonArgs common;
  StyleArgs style;

  auto* gen = app.add_subcommand("gen-scene", "generate a toy scene");
  auto* embed = app.add_subcommand("embed", "distill per-Gaussian embeddings and the colour decoder");
  auto* flow = app.add_subcommand("train-flow", "train the mapping and subdivisive flow");
  auto* train = app.add_subcommand("train-style", "train the stylization decoder");
  auto* stylize = app.add_subcommand("stylize", "stylize the distilled scene");
  auto* rend = app.add_subcommand("render", "render a scene from every ring camera");
  auto* align = app.add_subcommand("eval-align", "SIM/FID per flow round on held-out pairs");
  auto* consist = app.add_subcommand("eval-consistency", "masked RMSE between warped views");
  auto* dump = app.add_subcommand("dump-config", "print the resolved config");
  for (auto* c : {gen, embed, flow, train, stylize, rend, align, consist, dump}) add_common(c, common);
  for (auto* c : {train, stylize}) {
    c->add_option("--image", style.image, "style image (PPM)");
    c->add_option("--text", style.text, "style text");
    c->add_option("--feat", style.feat, "style features (FEAT)");
  }
  stylize->add_option("--decoder", style.decoder, "colour decoder checkpoint");
  for (auto* c : {stylize, rend, consist}) c->add_option("--scene", style.scene, "scene file (GSCN)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const auto cfg = resolve(common);
    if (*gen) return cmd_gen_scene(cfg);
    if (*embed) return cmd_embed(cfg, common);
    if (*flow) return cmd_train_flow(cfg, common);
    if (*train) return cmd_train_style(cfg, common, style);
    if (*stylize) return cmd_stylize(cfg, style);
    if (*rend) return cmd_render(cfg, style);
    if (*align) return cmd_eval_align(cfg);
    if (*consist) return cmd_eval_consistency(cfg, style);
    if (*dump) {
      std::cout << dump_config(cfg);
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "subflow: error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "subflow: numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "subflow: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
