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
#include <string>
#include <vector>

#include "subflow/encoders.hpp"
#include "subflow/flow.hpp"
#include "subflow/losses.hpp"
#include "subflow/scene.hpp"
#include "subflow/stylization.hpp"
#include "subflow/transfer.hpp"

namespace subflow {

struct RingConfig {
  std::size_t count = 8;
  double radius = 3.5;
  double elevation_deg = 60.0;
  int image_size = 64;
};

struct RunConfig {
  std::uint64_t seed = 1;
  EncoderConfig encoder;
  ToySceneKind scene_kind = ToySceneKind::textured_slab;
  std::size_t scene_count = 256;
  RingConfig ring;
  DistillConfig distill;
  // Concept image/caption pairs the flow is trained on.
  std::size_t corpus_size = 300;
  FlowConfig flow;
  Decoder2dConfig generator;
  LossWeights weights;
  StylizationConfig stylization;
  // Procedural style texture used when no style image is given.
  std::uint64_t style_texture_seed = 5;
  std::string out = "run";

  RunConfig();
  void validate() const;
  std::vector<Camera> cameras() const;
};

std::vector<std::string> config_keys();
// key=value lines in schema order.
std::string dump_config(const RunConfig& cfg);
// Starts from defaults; unknown keys and unparsable values are errors naming the key.
RunConfig parse_config(const std::string& text, const std::string& label = "config");
RunConfig load_config(const std::filesystem::path& path);

}  // namespace subflow
