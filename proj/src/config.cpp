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


#include "subflow/config.hpp"

#include <functional>
#include <sstream>

#include "subflow/error.hpp"
#include "subflow/kv.hpp"
#include "subflow/metrics.hpp"

namespace subflow {
namespace {

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class T>
using Access = std::function<T&(RunConfig&)>;

RunConfig& mut(const RunConfig& c) { return const_cast<RunConfig&>(c); }

Field size_field(std::string key, Access<std::size_t> at) {
  return {key, [at](const RunConfig& c) { return std::to_string(at(mut(c))); },
          [at, key](RunConfig& c, const std::string& v) { at(c) = parse_size(key, v); }};
}

Field u64_field(std::string key, Access<std::uint64_t> at) {
  return {key, [at](const RunConfig& c) { return std::to_string(at(mut(c))); },
          [at, key](RunConfig& c, const std::string& v) { at(c) = parse_u64(key, v); }};
}

Field int_field(std::string key, Access<int> at) {
  return {key, [at](const RunConfig& c) { return std::to_string(at(mut(c))); },
          [at, key](RunConfig& c, const std::string& v) {
            const auto n = parse_size(key, v);
            if (n > 1u << 16) throw ValidationError(key + ": value " + v + " is too large");
            at(c) = static_cast<int>(n);
          }};
}

Field double_field(std::string key, Access<double> at) {
  return {key, [at](const RunConfig& c) { return format_value(at(mut(c))); },
          [at, key](RunConfig& c, const std::string& v) { at(c) = parse_double(key, v); }};
}

Field float_field(std::string key, Access<float> at) {
  return {key, [at](const RunConfig& c) { return format_value(at(mut(c))); },
          [at, key](RunConfig& c, const std::string& v) { at(c) = static_cast<float>(parse_double(key, v)); }};
}

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = {
      u64_field("seed", [](RunConfig& c) -> auto& { return c.seed; }),
      {"out", [](const RunConfig& c) { return c.out; }, [](RunConfig& c, const std::string& v) { c.out = v; }},
      u64_field("encoder.seed", [](RunConfig& c) -> auto& { return c.encoder.seed; }),
      size_field("encoder.style_dim", [](RunConfig& c) -> auto& { return c.encoder.style_dim; }),
      size_field("encoder.clip_dim", [](RunConfig& c) -> auto& { return c.encoder.clip_dim; }),
      {"scene.kind", [](const RunConfig& c) { return to_string(c.scene_kind); },
       [](RunConfig& c, const std::string& v) { c.scene_kind = parse_toy_scene_kind(v); }},
      size_field("scene.count", [](RunConfig& c) -> auto& { return c.scene_count; }),
      size_field("ring.count", [](RunConfig& c) -> auto& { return c.ring.count; }),
      double_field("ring.radius", [](RunConfig& c) -> auto& { return c.ring.radius; }),
      double_field("ring.elevation_deg", [](RunConfig& c) -> auto& { return c.ring.elevation_deg; }),
      int_field("ring.image_size", [](RunConfig& c) -> auto& { return c.ring.image_size; }),
      size_field("distill.steps", [](RunConfig& c) -> auto& { return c.distill.steps; }),
      float_field("distill.learning_rate", [](RunConfig& c) -> auto& { return c.distill.learning_rate; }),
      float_field("distill.projection_weight", [](RunConfig& c) -> auto& { return c.distill.projection_weight; }),
      int_field("distill.image_size", [](RunConfig& c) -> auto& { return c.distill.image_size; }),
      size_field("distill.hidden_width", [](RunConfig& c) -> auto& { return c.distill.hidden_width; }),
      size_field("flow.corpus_size", [](RunConfig& c) -> auto& { return c.corpus_size; }),
      size_field("flow.euler_steps", [](RunConfig& c) -> auto& { return c.flow.euler_steps; }),
      size_field("flow.rounds", [](RunConfig& c) -> auto& { return c.flow.rounds; }),
      size_field("flow.train_steps", [](RunConfig& c) -> auto& { return c.flow.train_steps; }),
      size_field("flow.mapping_steps", [](RunConfig& c) -> auto& { return c.flow.mapping_steps; }),
      size_field("flow.batch_size", [](RunConfig& c) -> auto& { return c.flow.batch_size; }),
      float_field("flow.learning_rate", [](RunConfig& c) -> auto& { return c.flow.learning_rate; }),
      size_field("flow.hidden_width", [](RunConfig& c) -> auto& { return c.flow.hidden_width; }),
      size_field("generator.corpus_size", [](RunConfig& c) -> auto& { return c.generator.corpus_size; }),
      size_field("generator.steps", [](RunConfig& c) -> auto& { return c.generator.steps; }),
      size_field("generator.style_steps", [](RunConfig& c) -> auto& { return c.generator.style_steps; }),
      size_field("generator.batch_size", [](RunConfig& c) -> auto& { return c.generator.batch_size; }),
      size_field("generator.width", [](RunConfig& c) -> auto& { return c.generator.width; }),
      float_field("generator.learning_rate", [](RunConfig& c) -> auto& { return c.generator.learning_rate; }),
      float_field("generator.style_weight", [](RunConfig& c) -> auto& { return c.generator.style_weight; }),
      double_field("loss.lambda_style", [](RunConfig& c) -> auto& { return c.weights.lambda_style; }),
      double_field("loss.lambda_obs", [](RunConfig& c) -> auto& { return c.weights.lambda_obs; }),
      double_field("loss.lambda_flow", [](RunConfig& c) -> auto& { return c.weights.lambda_flow; }),
      double_field("loss.suppression", [](RunConfig& c) -> auto& { return c.weights.suppression; }),
      size_field("style.steps", [](RunConfig& c) -> auto& { return c.stylization.steps; }),
      float_field("style.learning_rate", [](RunConfig& c) -> auto& { return c.stylization.learning_rate; }),
      float_field("style.disc_learning_rate", [](RunConfig& c) -> auto& { return c.stylization.disc_learning_rate; }),
      int_field("style.image_size", [](RunConfig& c) -> auto& { return c.stylization.image_size; }),
      u64_field("style.texture_seed", [](RunConfig& c) -> auto& { return c.style_texture_seed; }),
  };
  return fields;
}

}  // namespace

RunConfig::RunConfig() {
  flow.hidden_width = 64;
  flow.train_steps = 600;
  flow.mapping_steps = 800;
  flow.batch_size = 128;
}

void RunConfig::validate() const {
  if (encoder.style_dim < 8 || encoder.style_dim > 64) throw ValidationError("encoder.style_dim must be in [8, 64]");
  if (encoder.clip_dim < 1) throw ValidationError("encoder.clip_dim must be >= 1");
  if (scene_count < 1) throw ValidationError("scene.count must be >= 1");
  if (ring.count < 4) throw ValidationError("ring.count must be >= 4");
  if (!(ring.radius > 0.0)) throw ValidationError("ring.radius must be > 0");
  if (ring.image_size < 8) throw ValidationError("ring.image_size must be >= 8");
  if (corpus_size < 2) throw ValidationError("flow.corpus_size must be >= 2");
  if (out.empty()) throw ValidationError("out must not be empty");
  flow.validate();
  weights.validate();
}

std::vector<Camera> RunConfig::cameras() const {
  RingOptions o;
  o.elevation_deg = ring.elevation_deg;
  o.width = o.height = ring.image_size;
  o.focal = ring.image_size;
  return camera_ring({0, 0, 0}, ring.radius, ring.count, o);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : schema()) keys.push_back(f.key);
  return keys;
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& f : schema()) out << f.key << '=' << f.get(cfg) << '\n';
  return out.str();
}

RunConfig parse_config(const std::string& text, const std::string& label) {
  RunConfig cfg;
  for (const auto& [key, value] : parse_key_values(text, label)) {
    const Field* field = nullptr;
    for (const auto& f : schema())
      if (f.key == key) field = &f;
    if (!field) throw ValidationError(label + ": unknown key \"" + key + "\"");
    try {
      field->set(cfg, value);
    } catch (const ValidationError& e) {
      throw ValidationError(label + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path.string()), path.string()); }

}  // namespace subflow
