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

#include "puretoy/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "puretoy/errors.hpp"

namespace puretoy {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
  bool is_leaf() const { return parents.empty(); }
};

}  // namespace detail

using detail::Node;

namespace {

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const Shape& b) {
  throw ConfigError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                    shape_string(b));
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// Creates op results and wires history.
struct OpBuilder {
  static Node& node(const Tensor& t) { return *t.node_; }
  static const std::shared_ptr<Node>& ptr(const Tensor& t) { return t.node_; }

  static Tensor leaf(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
      throw ConfigError("tensor: shape " + shape_string(shape) + " does not match " +
                        std::to_string(values.size()) + " values");
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  // The backward closure is only kept when history is recorded.
  static Tensor result(Shape shape, std::vector<double> values,
                       std::initializer_list<const Tensor*> inputs,
                       std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    bool track = false;
    if (g_grad_enabled) {
      for (const Tensor* t : inputs) track = track || t->requires_grad();
    }
    if (track) {
      n->requires_grad = true;
      for (const Tensor* t : inputs) n->parents.push_back(t->node_);
      n->backward = std::move(backward);
    }
    return Tensor(std::move(n));
  }

  static Tensor result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                       std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    bool track = false;
    if (g_grad_enabled) {
      for (const Tensor& t : inputs) track = track || t.requires_grad();
    }
    if (track) {
      n->requires_grad = true;
      for (const Tensor& t : inputs) n->parents.push_back(t.node_);
      n->backward = std::move(backward);
    }
    return Tensor(std::move(n));
  }
};

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return OpBuilder::leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return OpBuilder::leaf(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return OpBuilder::leaf(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value) { return OpBuilder::leaf({}, {value}, false); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  const auto& s = node_->shape;
  if (s.size() < 2) return 1;
  return shape_numel(s) / s.back();
}

std::size_t Tensor::cols() const {
  const auto& s = node_->shape;
  return s.empty() ? 1 : s.back();
}

std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach_copy(bool requires_grad) const {
  return OpBuilder::leaf(node_->shape, node_->value, requires_grad);
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw UsageError("backward() requires a scalar loss, got shape " + shape_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a deterministic topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf() && n->backward) n->backward(*n);
  }
}

// ---- ops ------------------------------------------------------------------

namespace {

inline bool wants(const std::shared_ptr<Node>& p) { return p->requires_grad; }

// out[r] (+)= sum_j x[j] * Y[r * len + j] for r < rows. Four rows share one pass over x;
// each accumulator still sums in index order, so results match the plain loop bit for bit.
template <bool Accumulate>
void dot_rows(const double* x, const double* Y, std::size_t rows, std::size_t len, double* out) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* y0 = Y + r * len;
    const double* y1 = y0 + len;
    const double* y2 = y1 + len;
    const double* y3 = y2 + len;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      const double xv = x[j];
      a0 += xv * y0[j];
      a1 += xv * y1[j];
      a2 += xv * y2[j];
      a3 += xv * y3[j];
    }
    if constexpr (Accumulate) {
      out[r] += a0, out[r + 1] += a1, out[r + 2] += a2, out[r + 3] += a3;
    } else {
      out[r] = a0, out[r + 1] = a1, out[r + 2] = a2, out[r + 3] = a3;
    }
  }
  for (; r < rows; ++r) {
    const double* y = Y + r * len;
    double acc = 0.0;
    for (std::size_t j = 0; j < len; ++j) acc += x[j] * y[j];
    if constexpr (Accumulate) {
      out[r] += acc;
    } else {
      out[r] = acc;
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rank() > 2 || a.rank() > 2 || b.rows() != k) shape_error("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* c = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;  // masked attention rows are mostly exact zeros
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
  }
  return OpBuilder::result({m, n}, std::move(out), {&a, &b}, [m, k, n](Node& self) {
    const double* G = self.grad.data();
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (wants(pa)) {
      double* dA = pa->ensure_grad().data();
      const double* B = pb->value.data();
      for (std::size_t i = 0; i < m; ++i) dot_rows<true>(G + i * n, B, k, n, dA + i * k);
    }
    if (wants(pb)) {
      double* dB = pb->ensure_grad().data();
      const double* A = pa->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* g = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          double* drow = dB + p * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += av * g[j];
        }
      }
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.rank() > 2 || a.rank() > 2 || b.cols() != k) {
    shape_error("matmul_nt", a.shape(), b.shape());
  }
  std::vector<double> out(m * n);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) dot_rows<false>(A + i * k, B, n, k, out.data() + i * n);
  return OpBuilder::result({m, n}, std::move(out), {&a, &b}, [m, k, n](Node& self) {
    const double* G = self.grad.data();
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (wants(pa)) {
      double* dA = pa->ensure_grad().data();
      const double* B = pb->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double g = G[i * n + j];
          const double* brow = B + j * k;
          double* drow = dA + i * k;
          for (std::size_t p = 0; p < k; ++p) drow[p] += g * brow[p];
        }
      }
    }
    if (wants(pb)) {
      double* dB = pb->ensure_grad().data();
      const double* A = pa->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double g = G[i * n + j];
          const double* arow = A + i * k;
          double* drow = dB + j * k;
          for (std::size_t p = 0; p < k; ++p) drow[p] += g * arow[p];
        }
      }
    }
  });
}

Tensor matmul_nt_masked(const Tensor& a, const Tensor& b, std::span<const std::uint8_t> mask) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.rank() > 2 || a.rank() > 2 || b.cols() != k) {
    shape_error("matmul_nt_masked", a.shape(), b.shape());
  }
  if (mask.size() != m * n) shape_error("matmul_nt_masked", Shape{m, n}, Shape{mask.size()});
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  // Kept columns come in a few contiguous runs per row (text, one marker block).
  for (std::size_t i = 0; i < m; ++i) {
    const std::uint8_t* row = mask.data() + i * n;
    for (std::size_t j = 0; j < n;) {
      if (!row[j]) {
        ++j;
        continue;
      }
      std::size_t end = j;
      while (end < n && row[end]) ++end;
      dot_rows<false>(A + i * k, B + j * k, end - j, k, out.data() + i * n + j);
      j = end;
    }
  }
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  return OpBuilder::result(
      {m, n}, std::move(out), {&a, &b}, [m, k, n, keep = std::move(keep)](Node& self) {
        const double* G = self.grad.data();
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        double* dA = wants(pa) ? pa->ensure_grad().data() : nullptr;
        double* dB = wants(pb) ? pb->ensure_grad().data() : nullptr;
        const double* A = pa->value.data();
        const double* B = pb->value.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            if (!keep[i * n + j]) continue;
            const double g = G[i * n + j];
            if (dA)
              for (std::size_t p = 0; p < k; ++p) dA[i * k + p] += g * B[j * k + p];
            if (dB)
              for (std::size_t p = 0; p < k; ++p) dB[j * k + p] += g * A[i * k + p];
          }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return OpBuilder::result(a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!wants(p)) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  const std::size_t m = a.rows(), n = a.cols();
  if (row.numel() != n || row.rank() > 1) shape_error("add_row", a.shape(), row.shape());
  std::vector<double> out(a.numel());
  auto x = a.data(), r = row.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + r[j];
  return OpBuilder::result(a.shape(), std::move(out), {&a, &row}, [m, n](Node& self) {
    auto& pa = self.parents[0];
    auto& pr = self.parents[1];
    if (wants(pa)) {
      auto& g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(pr)) {
      auto& g = pr->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return OpBuilder::result(a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (wants(pa)) {
      auto& g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value[i];
    }
    if (wants(pb)) {
      auto& g = pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return OpBuilder::result(a.shape(), std::move(out), {&a}, [factor](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no operands");
  const std::size_t m = parts[0].rows();
  bool all_rank1 = true;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != m || p.rank() > 2) shape_error("concat_cols", parts[0].shape(), p.shape());
    all_rank1 = all_rank1 && p.rank() == 1;
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto x = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(x.data() + i * widths[k], widths[k], out.data() + i * total + offset);
    offset += widths[k];
  }
  Shape shape = all_rank1 ? Shape{total} : Shape{m, total};
  return OpBuilder::result(std::move(shape), std::move(out), parts,
                           [m, total, widths](Node& self) {
                             std::size_t offset = 0;
                             for (std::size_t k = 0; k < self.parents.size(); ++k) {
                               auto& p = self.parents[k];
                               if (wants(p)) {
                                 auto& g = p->ensure_grad();
                                 for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t j = 0; j < widths[k]; ++j)
                                     g[i * widths[k] + j] += self.grad[i * total + offset + j];
                               }
                               offset += widths[k];
                             }
                           });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ConfigError("concat_rows: no operands");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n || p.rank() > 2) shape_error("concat_rows", parts[0].shape(), p.shape());
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return OpBuilder::result({m, n}, std::move(out), parts, [](Node& self) {
    std::size_t offset = 0;
    for (auto& p : self.parents) {
      if (wants(p)) {
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offset + i];
      }
      offset += p->value.size();
    }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> rows) {
  const std::size_t v = table.rows(), d = table.cols();
  std::vector<double> out(rows.size() * d);
  auto x = table.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= v) {
      throw InputError("gather_rows: index " + std::to_string(rows[i]) + " at position " +
                       std::to_string(i) + " outside table of " + std::to_string(v) + " rows");
    }
    std::copy_n(x.data() + rows[i] * d, d, out.data() + i * d);
  }
  std::vector<std::int32_t> ids(rows.begin(), rows.end());
  return OpBuilder::result({rows.size(), d}, std::move(out), {&table},
                           [ids = std::move(ids), d](Node& self) {
                             auto& g = self.parents[0]->ensure_grad();
                             for (std::size_t i = 0; i < ids.size(); ++i)
                               for (std::size_t j = 0; j < d; ++j)
                                 g[ids[i] * d + j] += self.grad[i * d + j];
                           });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t m = a.rows(), n = a.cols();
  if (begin > end || end > n) {
    throw ConfigError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                      ") outside shape " + shape_string(a.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  auto x = a.data();
  for (std::size_t i = 0; i < m; ++i) std::copy_n(x.data() + i * n + begin, w, out.data() + i * w);
  Shape shape = a.rank() == 1 ? Shape{w} : Shape{m, w};
  return OpBuilder::result(std::move(shape), std::move(out), {&a}, [m, n, w, begin](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return OpBuilder::result(a.shape(), std::move(out), {&a}, [](Node& self) {
    auto& p = self.parents[0];
    auto& g = p->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (p->value[i] > 0.0) g[i] += self.grad[i];
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  return OpBuilder::result(a.shape(), std::move(out), {&a}, [](Node& self) {
    auto& p = self.parents[0];
    auto& g = p->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = p->value[i];
      const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const double d =
          0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      g[i] += self.grad[i] * d;
    }
  });
}

namespace {

void softmax_backward(Node& self, std::size_t m, std::size_t n) {
  auto& g = self.parents[0]->ensure_grad();
  const auto& y = self.value;
  for (std::size_t i = 0; i < m; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += y[i * n + j] * self.grad[i * n + j];
    for (std::size_t j = 0; j < n; ++j)
      g[i * n + j] += y[i * n + j] * (self.grad[i * n + j] - dot);
  }
}

}  // namespace

Tensor softmax(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, row[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - mx);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  return OpBuilder::result(a.shape(), std::move(out), {&a},
                           [m, n](Node& self) { softmax_backward(self, m, n); });
}

Tensor masked_softmax(const Tensor& a, std::span<const std::uint8_t> mask) {
  const std::size_t m = a.rows(), n = a.cols();
  if (mask.size() != m * n) {
    shape_error("masked_softmax", a.shape(), Shape{mask.size()});
  }
  std::vector<double> out(a.numel(), 0.0);
  auto x = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data() + i * n;
    const std::uint8_t* keep = mask.data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (keep[j]) mx = std::max(mx, row[j]);
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!keep[j]) continue;
      out[i * n + j] = std::exp(row[j] - mx);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j)
      if (keep[j]) out[i * n + j] /= total;
  }
  return OpBuilder::result(a.shape(), std::move(out), {&a},
                           [m, n](Node& self) { softmax_backward(self, m, n); });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  if (gamma.numel() != n) shape_error("layer_norm", x.shape(), gamma.shape());
  if (beta.numel() != n) shape_error("layer_norm", x.shape(), beta.shape());
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> rstd(m);
  auto v = x.data(), gm = gamma.data(), bt = beta.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = v.data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mean) * rstd[i];
      out[i * n + j] = xhat[i * n + j] * gm[j] + bt[j];
    }
  }
  return OpBuilder::result(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [m, n, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        const double* G = self.grad.data();
        if (wants(pg)) {
          auto& dg = pg->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) dg[j] += G[i * n + j] * xhat[i * n + j];
        }
        if (wants(pb)) {
          auto& db = pb->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) db[j] += G[i * n + j];
        }
        if (wants(px)) {
          auto& dx = px->ensure_grad();
          const auto& gm = pg->value;
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = G[i * n + j] * gm[j];
              mean_d += d;
              mean_dx += d * xhat[i * n + j];
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = G[i * n + j] * gm[j];
              dx[i * n + j] += rstd[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
            }
          }
        }
      });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets) {
  const std::size_t m = logits.rows(), n = logits.cols();
  if (targets.size() != m) {
    shape_error("cross_entropy", logits.shape(), Shape{targets.size()});
  }
  std::vector<double> probs(logits.numel());
  auto x = logits.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= n) {
      throw InputError("cross_entropy: target " + std::to_string(targets[i]) + " at row " +
                       std::to_string(i) + " outside " + std::to_string(n) + " classes");
    }
    const double* row = x.data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, row[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      probs[i * n + j] = std::exp(row[j] - mx);
      total += probs[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= total;
    loss += (mx + std::log(total)) - row[targets[i]];
  }
  std::vector<std::int32_t> t(targets.begin(), targets.end());
  return OpBuilder::result({}, {loss}, {&logits},
                           [m, n, probs = std::move(probs), t = std::move(t)](Node& self) {
                             auto& g = self.parents[0]->ensure_grad();
                             const double up = self.grad[0];
                             for (std::size_t i = 0; i < m; ++i) {
                               for (std::size_t j = 0; j < n; ++j) {
                                 const double onehot =
                                     static_cast<std::size_t>(t[i]) == j ? 1.0 : 0.0;
                                 g[i * n + j] += up * (probs[i * n + j] - onehot);
                               }
                             }
                           });
}

Tensor cross_entropy(const Tensor& logits, std::int32_t target) {
  if (logits.rows() != 1) {
    shape_error("cross_entropy", logits.shape(), Shape{1});
  }
  return cross_entropy(logits, std::span<const std::int32_t>(&target, 1));
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return OpBuilder::result({}, {total}, {&a}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor add_scalars(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) return Tensor::scalar(0.0);
  double total = 0.0;
  for (const auto& s : scalars) total += s.item();
  return OpBuilder::result({}, {total}, scalars, [](Node& self) {
    for (auto& p : self.parents)
      if (wants(p)) p->ensure_grad()[0] += self.grad[0];
  });
}

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw ConfigError("dropout: rate must be < 1");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> keep(a.numel());
  for (auto& k : keep) k = uniform(rng) >= rate ? 1.0 / (1.0 - rate) : 0.0;
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * keep[i];
  return OpBuilder::result(a.shape(), std::move(out), {&a}, [keep = std::move(keep)](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * keep[i];
  });
}

// ---- ParameterStore -------------------------------------------------------

Tensor& ParameterStore::add(std::string name, const Tensor& value) {
  if (index_.count(name)) throw ConfigError("parameter '" + name + "' registered twice");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), value.detach_copy(true));
  return entries_.back().second;
}

bool ParameterStore::contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

const Tensor& ParameterStore::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second].second;
}

Tensor& ParameterStore::get(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

ParameterStore ParameterStore::clone() const {
  ParameterStore copy;
  for (const auto& [name, t] : entries_) copy.add(name, t);
  return copy;
}

bool ParameterStore::values_equal(const ParameterStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [na, ta] = entries_[i];
    const auto& [nb, tb] = other.entries_[i];
    if (na != nb || ta.shape() != tb.shape()) return false;
    if (!std::equal(ta.data().begin(), ta.data().end(), tb.data().begin())) return false;
  }
  return true;
}

Tensor normal_init(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values));
}

// ---- grad check -----------------------------------------------------------

GradCheckReport grad_check(ParameterStore& params, const std::function<Tensor()>& loss_fn,
                           const GradCheckOptions& options) {
  params.zero_grad();
  loss_fn().backward();

  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& [name, t] : params) {
    offsets.push_back(total);
    total += t.numel();
  }

  std::vector<std::size_t> coords;
  if (options.samples >= total) {
    for (std::size_t i = 0; i < total; ++i) coords.push_back(i);
  } else {
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (std::size_t s = 0; s < options.samples; ++s) coords.push_back(pick(rng));
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  auto entries_begin = params.begin();
  for (std::size_t coord : coords) {
    const std::size_t which =
        std::upper_bound(offsets.begin(), offsets.end(), coord) - offsets.begin() - 1;
    auto& [name, tensor] = *(entries_begin + static_cast<std::ptrdiff_t>(which));
    const std::size_t local = coord - offsets[which];
    const double analytic = tensor.has_grad() ? tensor.grad()[local] : 0.0;

    auto data = tensor.mutable_data();
    const double original = data[local];
    data[local] = original + options.eps;
    const double plus = loss_fn().item();
    data[local] = original - options.eps;
    const double minus = loss_fn().item();
    data[local] = original;

    const double numeric = (plus - minus) / (2.0 * options.eps);
    const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    const double err = std::abs(analytic - numeric) / denom;
    if (err > report.max_relative_error || report.coordinates == 0) {
      if (err >= report.max_relative_error) report.worst_parameter = name;
      report.max_relative_error = std::max(report.max_relative_error, err);
    }
    ++report.coordinates;
  }
  return report;
}

}  // namespace puretoy
