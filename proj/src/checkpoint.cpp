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

#include "subflow/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "subflow/binary_io.hpp"

namespace subflow {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string() + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("write failed for " + path.string());
}

std::vector<std::uint8_t> encode_parameters(const std::vector<Tensor>& params) {
  ByteWriter w;
  w.magic("PRMS");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.rank()));
    for (std::size_t d : p.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : p.data()) w.f32(v);
  }
  return w.take();
}

std::vector<StoredTensor> decode_parameters(std::vector<std::uint8_t> bytes, const std::string& label) {
  ByteReader r(std::move(bytes), label);
  r.expect_magic("PRMS");
  const std::size_t version_at = r.offset();
  if (r.u32("version") != 1) throw FormatError(label + ": unsupported version", version_at);
  const std::uint32_t count = r.u32("tensor count");
  std::vector<StoredTensor> out;
  out.reserve(std::min<std::uint32_t>(count, 4096));
  for (std::uint32_t t = 0; t < count; ++t) {
    StoredTensor st;
    const std::uint32_t rank = r.u32("rank");
    for (std::uint32_t d = 0; d < rank; ++d) st.shape.push_back(r.u32("dimension"));
    const std::size_t n = shape_size(st.shape);
    if (n * 4 > r.remaining()) throw FormatError(label + ": truncated tensor data", r.offset());
    st.data.resize(n);
    for (auto& v : st.data) v = r.f32("tensor data");
    out.push_back(std::move(st));
  }
  r.expect_end();
  return out;
}

void save_parameters(const std::filesystem::path& path, const std::vector<Tensor>& params) {
  write_file_bytes(path, encode_parameters(params));
}

std::vector<StoredTensor> load_parameters(const std::filesystem::path& path) {
  return decode_parameters(read_file_bytes(path), path.string());
}

void assign_parameters(const std::vector<Tensor>& params, const std::vector<StoredTensor>& stored) {
  if (params.size() != stored.size()) {
    throw ValidationError("checkpoint holds " + std::to_string(stored.size()) + " tensors, model expects " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != stored[i].shape) {
      throw ValidationError("checkpoint tensor " + std::to_string(i) + " has shape " + shape_string(stored[i].shape) +
                            ", model expects " + shape_string(params[i].shape()));
    }
    Tensor p = params[i];
    std::copy(stored[i].data.begin(), stored[i].data.end(), p.mutable_data().begin());
  }
}

void load_parameters_into(const std::filesystem::path& path, const std::vector<Tensor>& params) {
  assign_parameters(params, load_parameters(path));
}

}  // namespace subflow
