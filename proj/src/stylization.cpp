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

#include "subflow/stylization.hpp"

#include <algorithm>

#include "subflow/adam.hpp"
#include "subflow/error.hpp"
#include "subflow/metrics.hpp"
#include "subflow/rasterizer.hpp"
#include "subflow/rng.hpp"

namespace subflow {

namespace {

struct TrainingView {
  PixelWeights weights;
  Tensor generated;
  Taps<float> content_taps;
  Taps<float> generated_taps;
};

Taps<float> detached(const Taps<float>& taps) {
  Taps<float> out;
  for (const auto& t : taps) out.push_back(t.detach());
  return out;
}

}  // namespace

StylizationResult train_stylization(const GaussianScene& scene, const std::vector<Camera>& cams,
                                    const Image& style_image, const StyleStats& transfer_stats,
                                    const ColorDecoder& decoder, const VggEncoder& vgg, const Decoder2d& generator,
                                    const LossWeights& weights, const StylizationConfig& cfg) {
  weights.validate();
  if (cams.empty()) throw ValidationError("train_stylization: no cameras");
  if (!is_distilled(scene)) throw ValidationError("train_stylization: scene has no distilled embeddings");
  if (cfg.image_size < 8 || cfg.image_size % 8 != 0) throw ValidationError("train_stylization: image_size must be a multiple of 8");
  const auto& net = vgg.net();
  const int size = cfg.image_size;
  const auto style = resize_bilinear(style_image, size, size);
  const auto reference = vgg.tap_stats(style);

  std::vector<TrainingView> views;
  {
    NoGradGuard guard;
    RenderOptions opts;
    opts.features = false;
    for (const auto& cam : cams) {
      TrainingView v;
      v.weights = pixel_weights(scene, resized(cam, size, size), opts);
      const auto content = composite_attributes(v.weights, color_matrix(scene), 3);
      v.content_taps = detached(net.taps(image_to_tensor(content)));
      // The prior only covers rendered pixels; background stays black as in the renders.
      auto generated = generator_2d(content, style, net, generator);
      for (std::size_t p = 0; p < generated.pixel_count(); ++p)
        for (int c = 0; c < 3; ++c) generated.data[p * 3 + c] *= v.weights.alpha[p];
      v.generated = image_to_tensor(generated);
      v.generated_taps = detached(net.taps(v.generated));
      views.push_back(std::move(v));
    }
  }

  const std::size_t n = scene.gaussians.size();
  const auto transferred = adain(embedding_matrix(scene), n, transfer_stats);
  const auto inputs = Tensor::from({n, scene.embed_dim}, transferred.values);
  const auto flow = Tensor::scalar(static_cast<float>(cfg.flow_loss));

  StylizationResult result;
  result.decoder = decoder.clone();
  result.discriminator = Discriminator(derive_seed(cfg.seed, "stylize/discriminator"));
  const bool adversarial = weights.suppression > 0.0;
  Adam opt(result.decoder.parameters(), cfg.learning_rate);
  Adam disc_opt(result.discriminator.parameters(), cfg.disc_learning_rate);
  CounterRng rng(cfg.seed, "stylize/cameras");

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto& v = views[rng.below(views.size())];
    opt.zero_grad();
    const auto rendered = splat_attributes(v.weights, result.decoder.forward(inputs));
    const auto taps = net.taps(rendered);
    const auto content = content_loss<float>(taps, v.content_taps);
    const auto style_term = style_loss<float>(taps, reference);
    const auto obs = observation_loss<float>(v.generated_taps, taps);
    auto total = total_stylized_loss<float>(content, style_term, obs, flow, weights);

    StylizationLogRow row;
    row.step = step;
    if (adversarial) {
      const auto sup = suppression_loss<float>(v.generated, rendered, result.discriminator);
      total = add(total, scale(sup.gen_signal, static_cast<float>(weights.suppression)));
      row.sup_disc = sup.disc_loss.item();
      row.sup_gen = sup.gen_signal.item();
    }
    backward(total);
    opt.step();

    if (adversarial) {
      disc_opt.zero_grad();
      const auto sup = suppression_loss<float>(v.generated, rendered.detach(), result.discriminator);
      backward(sup.disc_loss);
      disc_opt.step();
    }
    row.content = content.item();
    row.style = style_term.item();
    row.obs = obs.item();
    row.flow = cfg.flow_loss;
    row.total = total.item();
    result.log.push_back(row);
  }
  return result;
}

void write_training_csv(std::ostream& out, const std::vector<StylizationLogRow>& rows) {
  out << "step,content,style,obs,flow,sup_disc,sup_gen,total\n";
  for (const auto& r : rows) {
    out << r.step << ',' << format_value(r.content) << ',' << format_value(r.style) << ',' << format_value(r.obs) << ','
        << format_value(r.flow) << ',' << format_value(r.sup_disc) << ',' << format_value(r.sup_gen) << ','
        << format_value(r.total) << '\n';
  }
}

double window_mean(const std::vector<StylizationLogRow>& rows, double StylizationLogRow::*field, bool at_end,
                   std::size_t window) {
  if (rows.empty()) throw ValidationError("window_mean: empty log");
  const std::size_t w = std::min(window, rows.size());
  const std::size_t begin = at_end ? rows.size() - w : 0;
  double s = 0.0;
  for (std::size_t i = begin; i < begin + w; ++i) s += rows[i].*field;
  return s / static_cast<double>(w);
}

}  // namespace subflow
