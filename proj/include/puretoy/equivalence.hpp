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

// Randomized property suite for the batched relation approximation:
// text states unaffected by appended markers, batched logits equal to
// singleton batches, and invariance under pair permutation.

#include <cstdint>

#include <json.hpp>

#include "puretoy/encoder.hpp"

namespace puretoy {

struct EquivalenceOptions {
  std::size_t cases = 200;
  std::size_t max_window = 60;
  std::size_t max_pairs = 12;
  std::uint64_t seed = 1;
  EncoderConfig encoder;  // vocab_size is chosen by the suite
  double text_tolerance = 1e-12;
  double logit_tolerance = 1e-9;  // relative
};

struct EquivalenceReport {
  std::size_t cases = 0;
  std::size_t nested_cases = 0;  // cases with at least one nested or boundary-sharing pair
  double max_text_abs_diff = 0.0;
  double max_logit_rel_diff = 0.0;
  std::size_t permutation_mismatches = 0;
  double text_tolerance = 0.0;
  double logit_tolerance = 0.0;

  bool text_ok() const { return max_text_abs_diff <= text_tolerance; }
  bool batching_ok() const { return max_logit_rel_diff <= logit_tolerance; }
  bool permutation_ok() const { return permutation_mismatches == 0; }
  bool passed() const { return text_ok() && batching_ok() && permutation_ok(); }
  nlohmann::ordered_json to_json() const;
};

EquivalenceReport run_equivalence_suite(const EquivalenceOptions& options);

}  // namespace puretoy
