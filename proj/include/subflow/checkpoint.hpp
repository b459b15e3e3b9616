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

#include <filesystem>
#include <vector>

#include "subflow/tensor.hpp"

namespace subflow {

struct StoredTensor {
  Shape shape;
  std::vector<float> data;
};

// PRMS parameter checkpoint: "PRMS", u32 version=1, u32 count, then per tensor
// u32 rank, u32 dims[rank], f32 data (all little-endian).
std::vector<std::uint8_t> encode_parameters(const std::vector<Tensor>& params);
std::vector<StoredTensor> decode_parameters(std::vector<std::uint8_t> bytes, const std::string& label = "PRMS");

void save_parameters(const std::filesystem::path& path, const std::vector<Tensor>& params);
std::vector<StoredTensor> load_parameters(const std::filesystem::path& path);

// Overwrites leaf parameter values in place; shapes must match one to one.
void assign_parameters(const std::vector<Tensor>& params, const std::vector<StoredTensor>& stored);
void load_parameters_into(const std::filesystem::path& path, const std::vector<Tensor>& params);

}  // namespace subflow
