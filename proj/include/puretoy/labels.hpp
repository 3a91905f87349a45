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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace puretoy {

// Ordered label names with an implicit null label at class index 0.
// Named labels occupy class indices 1..num_types().
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names, std::vector<std::string> symmetric = {});

  // Number of classes including the null label.
  std::size_t size() const { return names_.size() + 1; }
  std::size_t num_types() const { return names_.size(); }

  std::optional<int> find(std::string_view name) const;
  // Throws DataError for unknown names.
  int index_of(std::string_view name) const;
  const std::string& name(int index) const;
  bool symmetric(int index) const;

  const std::vector<std::string>& names() const { return names_; }
  std::vector<std::string> symmetric_names() const;

 private:
  std::vector<std::string> names_;
  std::vector<bool> symmetric_;
};

}  // namespace puretoy
