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

// Interleaved H x W x C float image.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f);

  float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  // Bilinear sample at continuous pixel-index coordinates, clamped to the border.
  float sample(double x, double y, int c) const;
  bool operator==(const Image&) const = default;
};

// [1, C, H, W] tensor and back.
Tensor image_to_tensor(const Image& img, bool requires_grad = false);
Image tensor_to_image(const Tensor& t);
// Stack images into an [N, C, H, W] batch; all must share a shape.
Tensor images_to_batch(const std::vector<Image>& images);

Image resize_bilinear(const Image& img, int width, int height);

// Binary PPM (P6, maxval 255). Values are round(255 * clamp(x, 0, 1)).
std::vector<std::uint8_t> encode_ppm(const Image& rgb);
Image decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& label = "ppm");
void save_ppm(const Image& rgb, const std::filesystem::path& path);
Image load_ppm(const std::filesystem::path& path);

// Raw float map: "FMAP", u32 H, u32 W, u32 C, f32 data.
std::vector<std::uint8_t> encode_fmap(const Image& map);
Image decode_fmap(const std::vector<std::uint8_t>& bytes, const std::string& label = "fmap");
void save_fmap(const Image& map, const std::filesystem::path& path);
Image load_fmap(const std::filesystem::path& path);

}  // namespace subflow
