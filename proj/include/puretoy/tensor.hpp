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

// Dense row-major float64 arrays with reverse-mode autodiff.
//
// A Tensor is a cheap handle onto a shared graph node. Operations record a
// backward closure when grad mode is on and any operand requires grad.
// Reductions always sum left to right so that forward and backward are
// bit-reproducible for a fixed input.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace puretoy {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // 2-D view: rank-1 tensors are one row, scalars are 1x1.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // Writes bypass the graph. Only meant for leaves (parameters, grad checks).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Populates grads of every reachable tensor that requires grad. Leaf
  // grads accumulate across calls; interior grads are recomputed.
  void backward() const;

  // Fresh leaf with copied values and no history.
  Tensor detach_copy(bool requires_grad) const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend struct OpBuilder;
};

// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// ---- forward ops ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k] x [k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k] x [n,k]^T
// matmul_nt restricted to mask entries (rows*cols, nonzero = keep); the
// rest are 0 and get no gradient.
Tensor matmul_nt_masked(const Tensor& a, const Tensor& b, std::span<const std::uint8_t> mask);
Tensor add(const Tensor& a, const Tensor& b);        // identical shapes
Tensor add_row(const Tensor& a, const Tensor& row);  // [m,n] + [n]
Tensor mul(const Tensor& a, const Tensor& b);        // elementwise
Tensor scale(const Tensor& a, double factor);
Tensor concat_cols(const std::vector<Tensor>& parts);  // along last axis
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> rows);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation
Tensor softmax(const Tensor& a);
// mask is rows*cols, row-major, nonzero = keep. Masked entries get
// probability exactly 0 and are skipped in every reduction.
Tensor masked_softmax(const Tensor& a, std::span<const std::uint8_t> mask);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
// Sum over rows of -log softmax(logits[r])[targets[r]]. Scalar result.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets);
Tensor cross_entropy(const Tensor& logits, std::int32_t target);
Tensor sum(const Tensor& a);
Tensor add_scalars(const std::vector<Tensor>& scalars);
// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng);

// ---- parameters -----------------------------------------------------------

class ParameterStore {
 public:
  using Entry = std::pair<std::string, Tensor>;

  // Registers a leaf tensor with requires_grad forced on.
  Tensor& add(std::string name, const Tensor& value);
  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const;
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  void zero_grad();
  // Deep copy of values; grads dropped.
  ParameterStore clone() const;
  bool values_equal(const ParameterStore& other) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Initializers. Weight values are N(0, stddev) from rng.
Tensor normal_init(Shape shape, double stddev, std::mt19937_64& rng);

// ---- gradient check -------------------------------------------------------

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t samples = 100;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_parameter;
};

// Compares analytic grads of loss_fn against central differences at
// sampled parameter coordinates. Error per coordinate:
//   |analytic - numeric| / max(1, |analytic|, |numeric|)
GradCheckReport grad_check(ParameterStore& params,
                           const std::function<Tensor()>& loss_fn,
                           const GradCheckOptions& options = {});

}  // namespace puretoy
