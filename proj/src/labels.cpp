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

#include "puretoy/labels.hpp"

#include <algorithm>

#include "puretoy/errors.hpp"

namespace puretoy {

LabelSet::LabelSet(std::vector<std::string> names, std::vector<std::string> symmetric)
    : names_(std::move(names)), symmetric_(names_.size(), false) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw ConfigError("label set: empty label name");
    for (std::size_t j = 0; j < i; ++j)
      if (names_[i] == names_[j]) throw ConfigError("label set: duplicate label '" + names_[i] + "'");
  }
  for (const auto& s : symmetric) {
    auto it = std::find(names_.begin(), names_.end(), s);
    if (it == names_.end()) throw ConfigError("label set: symmetric label '" + s + "' is unknown");
    symmetric_[it - names_.begin()] = true;
  }
}

std::optional<int> LabelSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i + 1);
  return std::nullopt;
}

int LabelSet::index_of(std::string_view name) const {
  if (auto idx = find(name)) return *idx;
  throw DataError("unknown label '" + std::string(name) + "'");
}

const std::string& LabelSet::name(int index) const {
  if (index < 1 || static_cast<std::size_t>(index) > names_.size()) {
    throw InputError("label index " + std::to_string(index) + " has no name");
  }
  return names_[index - 1];
}

bool LabelSet::symmetric(int index) const {
  return index >= 1 && static_cast<std::size_t>(index) <= names_.size() && symmetric_[index - 1];
}

std::vector<std::string> LabelSet::symmetric_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (symmetric_[i]) out.push_back(names_[i]);
  return out;
}

}  // namespace puretoy
