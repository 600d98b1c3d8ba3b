#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mvs/tensor.hpp"

namespace mvs {

// One vertex of the dynamically recorded graph. Leaves are parameters or
// constants; interior nodes carry a closure that pushes their gradient into
// their parents.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer() {
    if (grad.empty()) grad = Tensor(value.shape(), 0.0);
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Var(std::move(n));
  }

  static Var parameter(Tensor value, std::string name = {}) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->name = std::move(name);
    return Var(std::move(n));
  }

  // Records an op. The node only keeps its parents (and closure) when at
  // least one of them is differentiable.
  static Var make(Tensor value, std::vector<Var> parents,
                  std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p.requires_grad();
    if (n->requires_grad) {
      n->parents.reserve(parents.size());
      for (auto& p : parents) n->parents.push_back(p.node_);
      n->backward = std::move(backward);
    }
    return Var(std::move(n));
  }

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  const std::string& name() const { return node_->name; }
  const Shape& shape() const { return node_->value.shape(); }
  void zero_grad() { node_->grad = Tensor(); }

  Node& node() { return *node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Reverse sweep from a scalar. Gradients accumulate into every reachable node
// that requires them; call zero_grad on parameters between steps.
inline void backward(Var& loss) {
  if (loss.value().size() != 1) {
    throw DimensionError("backward needs a scalar, got " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{&loss.node(), 0}};
  seen.insert(&loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node().grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()) + " differ");
  }
}

// Binary ops accept equal shapes, or b as a [D] vector broadcast over the
// rows of a.
inline bool is_row_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return false;
  if (b.rank() == 1 && a.rank() >= 1 && b.size() == a.cols()) return true;
  throw DimensionError(std::string(op) + ": cannot combine " + shape_string(a.shape()) +
                       " with " + shape_string(b.shape()));
}

inline void accumulate(Node& parent, const Tensor& delta) {
  if (!parent.requires_grad) return;
  auto& g = parent.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

inline double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// Neumaier-compensated running sum; keeps scalar reductions (the loss in
// particular) accurate to a few ulps regardless of the number of terms.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      compensation_ += (sum_ - t) + v;
    } else {
      compensation_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

// Clamped to the open interval: for |x| past ~37 the exact value would round
// to 1.0 (or underflow to 0.0 far below), and gates must never fully open or
// close.
inline double sigmoid(double x) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  double s;
  if (x >= 0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  return std::clamp(s, lo, hi);
}

}  // namespace detail

// [M x K] * [K x N]
inline Var matmul(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
    throw DimensionError("matmul: inner dimensions of " + shape_string(A.shape()) +
                         " and " + shape_string(B.shape()) + " disagree");
  }
  const std::size_t M = A.rows(), K = A.cols(), N = B.cols();
  Tensor out({M, N});
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      const double aik = A.at(i, k);
      for (std::size_t j = 0; j < N; ++j) out.at(i, j) += aik * B.at(k, j);
    }
  }
  return Var::make(std::move(out), {a, b}, [M, K, N](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Tensor& G = self.grad;
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          double s = 0.0;
          for (std::size_t j = 0; j < N; ++j) s += G.at(i, j) * pb.value.at(k, j);
          ga.at(i, k) += s;
        }
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          const double aik = pa.value.at(i, k);
          for (std::size_t j = 0; j < N; ++j) gb.at(k, j) += aik * G.at(i, j);
        }
    }
  });
}

// x * W^T (+ bias). x is [M x K] or a [K] vector, W is [N x K]; this is the
// "W x + b" affine map applied to every row of x.
inline Var linear(const Var& x, const Var& w, const Var& bias = Var()) {
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  if (W.rank() != 2 || X.cols() != W.cols()) {
    throw DimensionError("linear: input " + shape_string(X.shape()) +
                         " does not match weight " + shape_string(W.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.value().rank() != 1 || bias.value().size() != W.rows())) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) +
                         " does not match weight " + shape_string(W.shape()));
  }
  const std::size_t M = X.rows(), K = X.cols(), N = W.rows();
  Tensor out(X.rank() == 1 ? Shape{N} : Shape{M, N});
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      double s = has_bias ? bias.value()[j] : 0.0;
      for (std::size_t k = 0; k < K; ++k) s += X[i * K + k] * W[j * K + k];
      out[i * N + j] = s;
    }
  }
  std::vector<Var> parents{x, w};
  if (has_bias) parents.push_back(bias);
  return Var::make(std::move(out), std::move(parents), [M, K, N, has_bias](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    const Tensor& G = self.grad;
    if (px.requires_grad) {
      auto& gx = px.grad_buffer();
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j) {
          const double g = G[i * N + j];
          for (std::size_t k = 0; k < K; ++k) gx[i * K + k] += g * pw.value[j * K + k];
        }
    }
    if (pw.requires_grad) {
      auto& gw = pw.grad_buffer();
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j) {
          const double g = G[i * N + j];
          for (std::size_t k = 0; k < K; ++k) gw[j * K + k] += g * px.value[i * K + k];
        }
    }
    if (has_bias && self.parents[2]->requires_grad) {
      auto& gb = self.parents[2]->grad_buffer();
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j) gb[j] += G[i * N + j];
    }
  });
}

// a * b^T for two row sets with a shared width.
inline Var matmul_transposed(const Var& a, const Var& b) { return linear(a, b); }

inline Var add(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool bc = detail::is_row_broadcast(A, B, "add");
  Tensor out = A;
  const std::size_t D = B.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[bc ? i % D : i];
  return Var::make(std::move(out), {a, b}, [bc, D](Node& self) {
    detail::accumulate(*self.parents[0], self.grad);
    Node& pb = *self.parents[1];
    if (!pb.requires_grad) return;
    auto& gb = pb.grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) gb[bc ? i % D : i] += self.grad[i];
  });
}

// Elementwise (Hadamard) product; b may be a [D] vector broadcast over rows.
inline Var hadamard(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool bc = detail::is_row_broadcast(A, B, "hadamard");
  Tensor out = A;
  const std::size_t D = B.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[bc ? i % D : i];
  return Var::make(std::move(out), {a, b}, [bc, D](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Tensor& G = self.grad;
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i] * pb.value[bc ? i % D : i];
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < G.size(); ++i) gb[bc ? i % D : i] += G[i] * pa.value[i];
    }
  });
}

inline Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= factor;
  return Var::make(std::move(out), {a}, [factor](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

inline Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = detail::sigmoid(v);
  return Var::make(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = self.value[i];
      g[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

inline Var gelu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = detail::gelu(v);
  return Var::make(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[i] * detail::gelu_derivative(p.value[i]);
  });
}

enum class Elementwise { add, hadamard, sigmoid, gelu };

inline Var elementwise(Elementwise op, const Var& a, const Var& b = Var()) {
  switch (op) {
    case Elementwise::add:
    case Elementwise::hadamard:
      if (!b.defined()) throw DimensionError("binary elementwise op needs two operands");
      return op == Elementwise::add ? add(a, b) : hadamard(a, b);
    case Elementwise::sigmoid:
      return sigmoid(a);
    case Elementwise::gelu:
      return gelu(a);
  }
  return a;
}

// Row-wise softmax, shifted by the row max. Rows may contain -inf (masked)
// entries as long as at least one entry is finite.
inline Var softmax_rows(const Var& a) {
  Tensor out = a.value();
  const std::size_t R = out.rows(), C = out.cols();
  for (std::size_t r = 0; r < R; ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }
  return Var::make(std::move(out), {a}, [R, C](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t r = 0; r < R; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += self.grad.at(r, c) * self.value.at(r, c);
      for (std::size_t c = 0; c < C; ++c)
        g.at(r, c) += self.value.at(r, c) * (self.grad.at(r, c) - dot);
    }
  });
}

// Sets every strictly upper-triangular entry of a square matrix to -inf, so
// that row n of a following softmax only weights columns <= n.
inline Var causal_mask(const Var& a) {
  const Tensor& A = a.value();
  if (A.rank() != 2 || A.rows() != A.cols()) {
    throw DimensionError("causal_mask needs a square matrix, got " + shape_string(A.shape()));
  }
  Tensor out = A;
  const std::size_t N = A.rows();
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) out.at(i, j) = -std::numeric_limits<double>::infinity();
  return Var::make(std::move(out), {a}, [N](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j <= i; ++j) g.at(i, j) += self.grad.at(i, j);
  });
}

inline constexpr double kLayerNormEpsilon = 1e-5;

// Per-row normalization to zero mean and unit variance (1/D variance plus
// epsilon) followed by the affine gain/bias.
inline Var layer_norm(const Var& x, const Var& gain, const Var& bias,
                      double epsilon = kLayerNormEpsilon) {
  const Tensor& X = x.value();
  const std::size_t R = X.rows(), D = X.cols();
  if (D < 2) throw DimensionError("layer_norm needs at least two features per row");
  if (gain.value().size() != D || bias.value().size() != D) {
    throw DimensionError("layer_norm: gain/bias must have " + std::to_string(D) + " entries");
  }
  Tensor normalized(X.shape());
  std::vector<double> inv_std(R);
  for (std::size_t r = 0; r < R; ++r) {
    auto row = X.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(D);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(D);
    inv_std[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t c = 0; c < D; ++c) normalized.at(r, c) = (row[c] - mean) * inv_std[r];
  }
  Tensor out = normalized;
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < D; ++c)
      out.at(r, c) = out.at(r, c) * gain.value()[c] + bias.value()[c];

  return Var::make(std::move(out), {x, gain, bias},
                   [R, D, normalized = std::move(normalized),
                    inv_std = std::move(inv_std)](Node& self) {
                     Node& px = *self.parents[0];
                     Node& pg = *self.parents[1];
                     Node& pb = *self.parents[2];
                     const Tensor& G = self.grad;
                     if (pg.requires_grad || pb.requires_grad) {
                       for (std::size_t r = 0; r < R; ++r)
                         for (std::size_t c = 0; c < D; ++c) {
                           if (pg.requires_grad) pg.grad_buffer()[c] += G.at(r, c) * normalized.at(r, c);
                           if (pb.requires_grad) pb.grad_buffer()[c] += G.at(r, c);
                         }
                     }
                     if (!px.requires_grad) return;
                     auto& gx = px.grad_buffer();
                     std::vector<double> dn(D);
                     for (std::size_t r = 0; r < R; ++r) {
                       double mean_dn = 0.0, mean_dn_n = 0.0;
                       for (std::size_t c = 0; c < D; ++c) {
                         dn[c] = G.at(r, c) * pg.value[c];
                         mean_dn += dn[c];
                         mean_dn_n += dn[c] * normalized.at(r, c);
                       }
                       mean_dn /= static_cast<double>(D);
                       mean_dn_n /= static_cast<double>(D);
                       for (std::size_t c = 0; c < D; ++c)
                         gx.at(r, c) += inv_std[r] * (dn[c] - mean_dn - normalized.at(r, c) * mean_dn_n);
                     }
                   });
}

// Picks columns ids[n] of a [E x V] table as rows of an [N x E] result.
inline Var gather_columns(const Var& table, std::span<const std::size_t> ids) {
  const Tensor& T = table.value();
  if (T.rank() != 2) throw DimensionError("gather_columns needs a matrix");
  const std::size_t E = T.rows(), V = T.cols();
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  for (std::size_t id : idx) {
    if (id >= V) throw DimensionError("column " + std::to_string(id) + " out of range " + std::to_string(V));
  }
  Tensor out({idx.size(), E});
  for (std::size_t n = 0; n < idx.size(); ++n)
    for (std::size_t e = 0; e < E; ++e) out.at(n, e) = T.at(e, idx[n]);
  return Var::make(std::move(out), {table}, [E, idx = std::move(idx)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t n = 0; n < idx.size(); ++n)
      for (std::size_t e = 0; e < E; ++e) g.at(e, idx[n]) += self.grad.at(n, e);
  });
}

// Row r of a matrix as a rank-1 vector.
inline Var select_row(const Var& m, std::size_t r) {
  const Tensor& M = m.value();
  if (M.rank() != 2 || r >= M.rows()) {
    throw DimensionError("select_row " + std::to_string(r) + " of " + shape_string(M.shape()));
  }
  const std::size_t C = M.cols();
  auto row = M.row(r);
  Tensor out({C}, std::vector<double>(row.begin(), row.end()));
  return Var::make(std::move(out), {m}, [r, C](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t c = 0; c < C; ++c) g.at(r, c) += self.grad[c];
  });
}

inline Var sum(const Var& a) {
  detail::CompensatedSum s;
  for (double v : a.value().data()) s.add(v);
  return Var::make(Tensor::scalar(s.value()), {a}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    const double up = self.grad[0];
    for (auto& v : g.data()) v += up;
  });
}

// Arithmetic mean of scalar nodes.
inline Var mean(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw DimensionError("mean of no values");
  detail::CompensatedSum s;
  for (const auto& v : scalars) s.add(v.value().item());
  const double n = static_cast<double>(scalars.size());
  return Var::make(Tensor::scalar(s.value() / n), scalars, [n](Node& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) p->grad_buffer()[0] += self.grad[0] / n;
    }
  });
}

// Mean over rows of -x[class] + log(sum_j exp(x[j])).
inline Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& X = logits.value();
  const std::size_t R = X.rows(), C = X.cols();
  if (X.rank() != 2 || labels.size() != R) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + shape_string(X.shape()));
  }
  std::vector<int> cls(labels.begin(), labels.end());
  for (int c : cls) {
    if (c < 0 || static_cast<std::size_t>(c) >= C) {
      throw DataError("label " + std::to_string(c) + " outside [0, " + std::to_string(C) + ")");
    }
  }
  Tensor probs(X.shape());
  detail::CompensatedSum total;
  for (std::size_t r = 0; r < R; ++r) {
    auto row = X.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    total.add(lse - row[static_cast<std::size_t>(cls[r])]);
    for (std::size_t c = 0; c < C; ++c) probs.at(r, c) = std::exp(row[c] - lse);
  }
  const double n = static_cast<double>(R);
  return Var::make(Tensor::scalar(total.value() / n), {logits},
                   [R, C, n, cls = std::move(cls), probs = std::move(probs)](Node& self) {
                     auto& g = self.parents[0]->grad_buffer();
                     const double up = self.grad[0] / n;
                     for (std::size_t r = 0; r < R; ++r)
                       for (std::size_t c = 0; c < C; ++c) {
                         const double target = static_cast<std::size_t>(cls[r]) == c ? 1.0 : 0.0;
                         g.at(r, c) += up * (probs.at(r, c) - target);
                       }
                   });
}

}  // namespace mvs
