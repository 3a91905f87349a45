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

#pragma once

// Binary checkpoint:
//   "PURETOY1" | u32 version | u64 json_len | config JSON | u64 tensor count
//   per tensor: u32 name_len | name | u32 rank | u64 dims[rank] | f64 data
// All integers and floats little-endian.

#include <cstdint>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "puretoy/tensor.hpp"

namespace puretoy {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json config;  // run config snapshot plus "kind" and "vocab"
  ParameterStore params;
};

void write_checkpoint(std::ostream& out, const nlohmann::json& config,
                      const ParameterStore& params);
void save_checkpoint(const std::string& path, const nlohmann::json& config,
                     const ParameterStore& params);

// Throws DataError on a bad magic, version or truncated file.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

// Throws ConfigError naming the first tensor that is missing, unexpected, or
// shaped differently from the layout the current config produces.
void check_layout(const ParameterStore& loaded, const ParameterStore& expected);

}  // namespace puretoy
