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
#include <ostream>
#include <vector>

#include "subflow/encoders.hpp"
#include "subflow/image.hpp"
#include "subflow/losses.hpp"
#include "subflow/scene.hpp"
#include "subflow/transfer.hpp"

namespace subflow {

struct StylizationConfig {
  std::size_t steps = 1000;
  float learning_rate = 1e-3f;
  float disc_learning_rate = 3e-5f;
  int image_size = 32;
  std::uint64_t seed = 1;
  // Final regression loss of the alignment flow; enters the total as a constant.
  double flow_loss = 0.0;
};

struct StylizationLogRow {
  std::size_t step = 0;
  double content = 0.0;
  double style = 0.0;
  double obs = 0.0;
  double flow = 0.0;
  double sup_disc = 0.0;
  double sup_gen = 0.0;
  double total = 0.0;
};

struct StylizationResult {
  ColorDecoder decoder;
  Discriminator discriminator;
  std::vector<StylizationLogRow> log;
};

// Fine-tunes a copy of the colour decoder. Each step renders the stylized
// scene from a random training camera; the discriminator is updated after
// the decoder whenever the suppression weight is positive.
StylizationResult train_stylization(const GaussianScene& scene, const std::vector<Camera>& cams,
                                    const Image& style_image, const StyleStats& transfer_stats,
                                    const ColorDecoder& decoder, const VggEncoder& vgg, const Decoder2d& generator,
                                    const LossWeights& weights, const StylizationConfig& cfg = {});

void write_training_csv(std::ostream& out, const std::vector<StylizationLogRow>& rows);

// Mean of a column over the first or last `window` rows.
double window_mean(const std::vector<StylizationLogRow>& rows, double StylizationLogRow::*field, bool at_end,
                   std::size_t window = 100);

}  // namespace subflow
