// Copyright 2026 The PureToy Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "puretoy/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "puretoy/errors.hpp"

namespace puretoy {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'U', 'R', 'E', 'T', 'O', 'Y', '1'};

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in, const char* what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw DataError(std::string("checkpoint truncated while reading ") + what);
  }
  return value;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const char* what) {
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw DataError(std::string("checkpoint truncated while reading ") + what);
  }
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const nlohmann::json& config,
                      const ParameterStore& params) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string text = config.dump();
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint64_t>(out, params.size());
  for (const auto& [name, t] : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    const auto data = t.data();
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed to write checkpoint");
}

void save_checkpoint(const std::string& path, const nlohmann::json& config,
                     const ParameterStore& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint '" + path + "' for writing");
  write_checkpoint(out, config, params);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw DataError("not a checkpoint: bad magic");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto json_len = get<std::uint64_t>(in, "config length");
  const std::string text = get_bytes(in, json_len, "config");
  try {
    ck.config = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  const auto count = get<std::uint64_t>(in, "tensor count");
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = get<std::uint32_t>(in, "tensor name length");
    std::string name = get_bytes(in, name_len, "tensor name");
    const auto rank = get<std::uint32_t>(in, "tensor rank");
    if (rank > 8) throw DataError("tensor '" + name + "' has implausible rank");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(get<std::uint64_t>(in, "dims"));
    std::vector<double> values(shape_numel(shape));
    if (!values.empty() &&
        !in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw DataError("checkpoint truncated in tensor '" + name + "'");
    }
    if (ck.params.contains(name)) throw DataError("duplicate tensor '" + name + "' in checkpoint");
    ck.params.add(std::move(name), Tensor::from(std::move(shape), std::move(values), true));
  }
  return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

void check_layout(const ParameterStore& loaded, const ParameterStore& expected) {
  for (const auto& [name, t] : expected) {
    if (!loaded.contains(name)) {
      throw ConfigError("checkpoint is missing tensor '" + name + "' required by the config");
    }
    const auto& got = loaded.get(name);
    if (got.shape() != t.shape()) {
      throw ConfigError("tensor '" + name + "' has shape " + shape_string(got.shape()) +
                        " in the checkpoint but the config expects " + shape_string(t.shape()));
    }
  }
  for (const auto& [name, t] : loaded) {
    if (!expected.contains(name)) {
      throw ConfigError("checkpoint tensor '" + name + "' is not part of the configured model");
    }
  }
}

}  // namespace puretoy
