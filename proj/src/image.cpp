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

#include "subflow/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "subflow/binary_io.hpp"
#include "subflow/error.hpp"

namespace subflow {

Image::Image(int w, int h, int c, float fill) : width(w), height(h), channels(c) {
  if (w < 1 || h < 1 || c < 1) throw ValidationError("image: dimensions must be positive");
  data.assign(static_cast<std::size_t>(w) * h * c, fill);
}

float Image::sample(double x, double y, int c) const {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = (1 - fx) * at(x0, y0, c) + fx * at(x1, y0, c);
  const double bottom = (1 - fx) * at(x0, y1, c) + fx * at(x1, y1, c);
  return static_cast<float>((1 - fy) * top + fy * bottom);
}

Tensor image_to_tensor(const Image& img, bool requires_grad) {
  auto batch = images_to_batch({img});
  if (!requires_grad) return batch;
  const auto d = batch.data();
  return Tensor::from(batch.shape(), std::vector<float>(d.begin(), d.end()), true);
}

Tensor images_to_batch(const std::vector<Image>& images) {
  if (images.empty()) throw ValidationError("images_to_batch: no images");
  const auto& first = images.front();
  const std::size_t c = first.channels, h = first.height, w = first.width;
  std::vector<float> v(images.size() * c * h * w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = images[n];
    if (img.channels != first.channels || img.height != first.height || img.width != first.width) {
      throw ValidationError("images_to_batch: image " + std::to_string(n) + " has a different shape");
    }
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) v[((n * c + ch) * h + y) * w + x] = img.data[(y * w + x) * c + ch];
  }
  return Tensor::from({images.size(), c, h, w}, std::move(v));
}

Image tensor_to_image(const Tensor& t) {
  if (t.rank() != 4 || t.shape()[0] != 1) {
    throw ValidationError("tensor_to_image: expected [1,C,H,W], got " + shape_string(t.shape()));
  }
  const int c = static_cast<int>(t.shape()[1]), h = static_cast<int>(t.shape()[2]), w = static_cast<int>(t.shape()[3]);
  Image img(w, h, c);
  const auto d = t.data();
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(x, y, ch) = d[(static_cast<std::size_t>(ch) * h + y) * w + x];
  return img;
}

Image resize_bilinear(const Image& img, int width, int height) {
  Image out(width, height, img.channels);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = img.sample((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5, c);
  return out;
}

std::vector<std::uint8_t> encode_ppm(const Image& rgb) {
  if (rgb.channels != 3) throw ValidationError("encode_ppm: image must have 3 channels");
  const std::string header = "P6\n" + std::to_string(rgb.width) + " " + std::to_string(rgb.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + rgb.data.size());
  for (float v : rgb.data) {
    const float c = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
    out.push_back(static_cast<std::uint8_t>(std::lround(255.0f * c)));
  }
  return out;
}

Image decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& label) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    const std::size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && value < 1'000'000) value = value * 10 + (bytes[pos++] - '0');
    if (pos == start) throw FormatError(label + ": expected " + std::string(what), start);
    return value;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError(label + ": not a binary PPM (P6)", 0);
  pos = 2;
  const long w = read_int("width");
  const long h = read_int("height");
  const std::size_t maxval_pos = pos;
  const long maxval = read_int("maxval");
  if (w < 1 || h < 1) throw FormatError(label + ": invalid dimensions", maxval_pos);
  if (maxval != 255) throw FormatError(label + ": only maxval 255 is supported", maxval_pos);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError(label + ": missing header terminator", pos);
  ++pos;
  Image img(static_cast<int>(w), static_cast<int>(h), 3);
  if (bytes.size() - pos < img.data.size()) throw FormatError(label + ": truncated pixel data", bytes.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
  return img;
}

void save_ppm(const Image& rgb, const std::filesystem::path& path) { write_file_bytes(path, encode_ppm(rgb)); }

Image load_ppm(const std::filesystem::path& path) { return decode_ppm(read_file_bytes(path), path.string()); }

std::vector<std::uint8_t> encode_fmap(const Image& map) {
  ByteWriter out;
  out.magic("FMAP");
  out.u32(static_cast<std::uint32_t>(map.height));
  out.u32(static_cast<std::uint32_t>(map.width));
  out.u32(static_cast<std::uint32_t>(map.channels));
  for (float v : map.data) out.f32(v);
  return out.take();
}

Image decode_fmap(const std::vector<std::uint8_t>& bytes, const std::string& label) {
  ByteReader in(bytes, label);
  in.expect_magic("FMAP");
  const std::size_t dims_offset = in.offset();
  const std::uint32_t h = in.u32("height");
  const std::uint32_t w = in.u32("width");
  const std::uint32_t c = in.u32("channels");
  if (h == 0 || w == 0 || c == 0) throw FormatError(label + ": zero dimension", dims_offset);
  Image img(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  for (auto& v : img.data) v = in.f32("data");
  in.expect_end();
  return img;
}

void save_fmap(const Image& map, const std::filesystem::path& path) { write_file_bytes(path, encode_fmap(map)); }

Image load_fmap(const std::filesystem::path& path) { return decode_fmap(read_file_bytes(path), path.string()); }

}  // namespace subflow
