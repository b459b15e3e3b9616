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

#include <cstring>
#include <string>

#include "subflow/scene.hpp"

namespace subflow::testing {

// Empty when position, rotation, scale and opacity agree byte for byte.
inline std::string geometry_mismatch(const GaussianScene& a, const GaussianScene& b) {
  if (a.gaussians.size() != b.gaussians.size()) return "gaussian count differs";
  for (std::size_t i = 0; i < a.gaussians.size(); ++i) {
    const auto& x = a.gaussians[i];
    const auto& y = b.gaussians[i];
    if (std::memcmp(x.position.data(), y.position.data(), sizeof x.position) != 0) return "position of " + std::to_string(i);
    if (std::memcmp(x.rotation.data(), y.rotation.data(), sizeof x.rotation) != 0) return "rotation of " + std::to_string(i);
    if (std::memcmp(x.scale.data(), y.scale.data(), sizeof x.scale) != 0) return "scale of " + std::to_string(i);
    if (std::memcmp(&x.opacity, &y.opacity, sizeof x.opacity) != 0) return "opacity of " + std::to_string(i);
  }
  return {};
}

}  // namespace subflow::testing
