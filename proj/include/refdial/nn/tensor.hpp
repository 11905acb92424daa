#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "refdial/common.hpp"
#include "refdial/rng.hpp"

// Minimal reverse-mode autodiff over Eigen matrices. Values are (rows x cols)
// double matrices; the batch dimension is always rows. Each op records a
// closure that scatters the output gradient into its parents. Graphs are
// rebuilt per forward pass (define-by-run), which keeps recurrent models and
// per-instance source lengths simple.

namespace refdial::nn {

using Mat = Eigen::MatrixXd;

struct Node {
  Mat value;
  Mat grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = Mat::Zero(value.rows(), value.cols());
  }
};

// When gradients are not needed (decoding, evaluation) ops skip closure
// construction entirely, so no graph is retained.
inline bool& grad_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
  ~NoGradGuard() { grad_enabled() = prev; }
};

class Var {
 public:
  Var() = default;
  explicit Var(Mat v, bool requires_grad = false) : n_(std::make_shared<Node>()) {
    n_->value = std::move(v);
    n_->requires_grad = requires_grad && grad_enabled();
  }

  bool defined() const { return n_ != nullptr; }
  const Mat& value() const { return n_->value; }
  Mat& value() { return n_->value; }
  Mat& grad() {
    n_->ensure_grad();
    return n_->grad;
  }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  std::shared_ptr<Node> node() const { return n_; }

  Eigen::Index rows() const { return n_->value.rows(); }
  Eigen::Index cols() const { return n_->value.cols(); }

  void zero_grad() {
    if (n_) n_->grad = Mat::Zero(n_->value.rows(), n_->value.cols());
  }

 private:
  std::shared_ptr<Node> n_;
};

namespace detail {

inline Var make_op(Mat value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  Var out(std::move(value));
  if (!grad_enabled()) return out;
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (!needs) return out;
  auto node = out.node();
  node->requires_grad = true;
  node->parents.reserve(parents.size());
  for (auto& p : parents) node->parents.push_back(p.node());
  node->backprop = std::move(backprop);
  return out;
}

inline void accumulate(const std::shared_ptr<Node>& n, const Mat& g) {
  if (!n->requires_grad) return;
  n->ensure_grad();
  n->grad += g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitive ops
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  ensure(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op(a.value() + b.value(), {a, b}, [an, bn](Node& out) {
    detail::accumulate(an, out.grad);
    detail::accumulate(bn, out.grad);
  });
}

inline Var sub(const Var& a, const Var& b) {
  ensure(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op(a.value() - b.value(), {a, b}, [an, bn](Node& out) {
    detail::accumulate(an, out.grad);
    detail::accumulate(bn, -out.grad);
  });
}

// Broadcasts a 1 x C row (bias) over every row of a.
inline Var add_rowvec(const Var& a, const Var& bias) {
  ensure(bias.rows() == 1 && bias.cols() == a.cols(), "add_rowvec: bias shape");
  auto an = a.node();
  auto bn = bias.node();
  Mat v = a.value();
  v.rowwise() += bias.value().row(0);
  return detail::make_op(std::move(v), {a, bias}, [an, bn](Node& out) {
    detail::accumulate(an, out.grad);
    detail::accumulate(bn, out.grad.colwise().sum());
  });
}

inline Var matmul(const Var& a, const Var& b) {
  ensure(a.cols() == b.rows(), "matmul: inner dims");
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op(a.value() * b.value(), {a, b}, [an, bn](Node& out) {
    detail::accumulate(an, out.grad * bn->value.transpose());
    detail::accumulate(bn, an->value.transpose() * out.grad);
  });
}

inline Var mul(const Var& a, const Var& b) {  // elementwise
  ensure(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op(a.value().cwiseProduct(b.value()), {a, b}, [an, bn](Node& out) {
    detail::accumulate(an, out.grad.cwiseProduct(bn->value));
    detail::accumulate(bn, out.grad.cwiseProduct(an->value));
  });
}

inline Var scale(const Var& a, double s) {
  auto an = a.node();
  return detail::make_op(a.value() * s, {a}, [an, s](Node& out) {
    detail::accumulate(an, out.grad * s);
  });
}

inline Var add_scalar(const Var& a, double s) {
  auto an = a.node();
  return detail::make_op(a.value().array() + s, {a}, [an](Node& out) {
    detail::accumulate(an, out.grad);
  });
}

inline Var tanh_op(const Var& a) {
  Mat v = a.value().array().tanh();
  auto an = a.node();
  auto vn = std::make_shared<Mat>(v);
  return detail::make_op(std::move(v), {a}, [an, vn](Node& out) {
    detail::accumulate(an, out.grad.cwiseProduct((1.0 - vn->array().square()).matrix()));
  });
}

inline Var sigmoid_op(const Var& a) {
  Mat v = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  auto an = a.node();
  auto vn = std::make_shared<Mat>(v);
  return detail::make_op(std::move(v), {a}, [an, vn](Node& out) {
    detail::accumulate(an, out.grad.cwiseProduct((vn->array() * (1.0 - vn->array())).matrix()));
  });
}

inline Var relu(const Var& a) {
  Mat v = a.value().cwiseMax(0.0);
  auto an = a.node();
  return detail::make_op(std::move(v), {a}, [an](Node& out) {
    Mat mask = (an->value.array() > 0.0).cast<double>();
    detail::accumulate(an, out.grad.cwiseProduct(mask));
  });
}

inline Var log_op(const Var& a) {
  Mat v = a.value().array().log();
  auto an = a.node();
  return detail::make_op(std::move(v), {a}, [an](Node& out) {
    detail::accumulate(an, out.grad.cwiseQuotient(an->value));
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  ensure(!parts.empty(), "concat_cols: empty");
  Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    ensure(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat v(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<std::shared_ptr<Node>> nodes;
  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    widths.push_back(p.cols());
  }
  return detail::make_op(std::move(v), parts, [nodes, widths](Node& out) {
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      detail::accumulate(nodes[i], out.grad.middleCols(off, widths[i]));
      off += widths[i];
    }
  });
}

inline Var slice_cols(const Var& a, Eigen::Index from, Eigen::Index len) {
  ensure(from >= 0 && from + len <= a.cols(), "slice_cols: range");
  auto an = a.node();
  return detail::make_op(a.value().middleCols(from, len), {a}, [an, from, len](Node& out) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    an->grad.middleCols(from, len) += out.grad;
  });
}

// Softmax over columns, per row, restricted to mask != 0. Masked entries are
// exactly zero in the output. Rows must have at least one unmasked entry.
inline Var masked_softmax(const Var& logits, const Mat& mask) {
  ensure(mask.rows() == logits.rows() && mask.cols() == logits.cols(), "masked_softmax: mask shape");
  const Mat& x = logits.value();
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (mask(r, c) != 0.0) mx = std::max(mx, x(r, c));
    ensure(std::isfinite(mx), "masked_softmax: fully masked row");
    double sum = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      double e = mask(r, c) != 0.0 ? std::exp(x(r, c) - mx) : 0.0;
      out(r, c) = e;
      sum += e;
    }
    out.row(r) /= sum;
  }
  auto ln = logits.node();
  auto outv = std::make_shared<Mat>(out);
  return detail::make_op(std::move(out), {logits}, [ln, outv](Node& o) {
    const Mat& a = *outv;
    Mat g(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      double dot = o.grad.row(r).dot(a.row(r));
      g.row(r) = a.row(r).cwiseProduct(o.grad.row(r).array().matrix() - Mat::Constant(1, a.cols(), dot));
    }
    detail::accumulate(ln, g);
  });
}

inline Var softmax_rows(const Var& logits) {
  Mat mask = Mat::Ones(logits.rows(), logits.cols());
  return masked_softmax(logits, mask);
}

// out = sum_l weights[:,l] . items[l]  with items[l] of shape (B x D).
inline Var weighted_sum(const Var& weights, const std::vector<Var>& items) {
  ensure(!items.empty() && weights.cols() == static_cast<Eigen::Index>(items.size()),
         "weighted_sum: arity");
  Eigen::Index b = weights.rows();
  Eigen::Index d = items[0].cols();
  Mat v = Mat::Zero(b, d);
  for (std::size_t l = 0; l < items.size(); ++l) {
    ensure(items[l].rows() == b && items[l].cols() == d, "weighted_sum: item shape");
    v += items[l].value().cwiseProduct(
        weights.value().col(static_cast<Eigen::Index>(l)).replicate(1, d));
  }
  std::vector<Var> parents = items;
  parents.push_back(weights);
  auto wn = weights.node();
  std::vector<std::shared_ptr<Node>> inodes;
  for (const auto& it : items) inodes.push_back(it.node());
  return detail::make_op(std::move(v), parents, [wn, inodes](Node& out) {
    for (std::size_t l = 0; l < inodes.size(); ++l) {
      Eigen::Index li = static_cast<Eigen::Index>(l);
      detail::accumulate(inodes[l],
                         out.grad.cwiseProduct(wn->value.col(li).replicate(1, out.grad.cols())));
      if (wn->requires_grad) {
        wn->ensure_grad();
        wn->grad.col(li) += (out.grad.cwiseProduct(inodes[l]->value)).rowwise().sum();
      }
    }
  });
}

// Rowwise multiply of (B x C) by a (B x 1) column of scales.
inline Var scale_rows(const Var& a, const Var& s) {
  ensure(s.rows() == a.rows() && s.cols() == 1, "scale_rows: scale shape");
  auto an = a.node();
  auto sn = s.node();
  Mat v = a.value().cwiseProduct(s.value().replicate(1, a.cols()));
  return detail::make_op(std::move(v), {a, s}, [an, sn](Node& out) {
    detail::accumulate(an, out.grad.cwiseProduct(sn->value.replicate(1, out.grad.cols())));
    if (sn->requires_grad) {
      sn->ensure_grad();
      sn->grad += (out.grad.cwiseProduct(an->value)).rowwise().sum();
    }
  });
}

// Rowwise dot product of two (B x D) matrices -> (B x 1).
inline Var rows_dot(const Var& a, const Var& b) {
  ensure(a.rows() == b.rows() && a.cols() == b.cols(), "rows_dot: shape mismatch");
  auto an = a.node();
  auto bn = b.node();
  Mat v = (a.value().cwiseProduct(b.value())).rowwise().sum();
  return detail::make_op(std::move(v), {a, b}, [an, bn](Node& out) {
    detail::accumulate(an, bn->value.cwiseProduct(out.grad.replicate(1, bn->value.cols())));
    detail::accumulate(bn, an->value.cwiseProduct(out.grad.replicate(1, an->value.cols())));
  });
}

// Rowwise L2 normalization; rows with zero norm stay zero.
inline Var l2_normalize_rows(const Var& a) {
  const Mat& x = a.value();
  Eigen::VectorXd norms = x.rowwise().norm();
  Mat v(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    v.row(r) = norms(r) > 0.0 ? (x.row(r) / norms(r)).eval() : x.row(r);
  auto an = a.node();
  auto nv = std::make_shared<Eigen::VectorXd>(norms);
  return detail::make_op(std::move(v), {a}, [an, nv](Node& out) {
    const Mat& x = an->value;
    Mat g(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      double n = (*nv)(r);
      if (n <= 0.0) {
        g.row(r) = out.grad.row(r);
        continue;
      }
      double dot = out.grad.row(r).dot(x.row(r));
      g.row(r) = out.grad.row(r) / n - x.row(r) * (dot / (n * n * n));
    }
    detail::accumulate(an, g);
  });
}

inline Var sum_all(const Var& a) {
  auto an = a.node();
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return detail::make_op(std::move(v), {a}, [an](Node& out) {
    detail::accumulate(an, Mat::Constant(an->value.rows(), an->value.cols(), out.grad(0, 0)));
  });
}

// Sum of per-row cross entropies from raw logits; target index per row.
// Rows with target < 0 are ignored (padding).
inline Var cross_entropy_sum(const Var& logits, const std::vector<int>& targets) {
  ensure(static_cast<Eigen::Index>(targets.size()) == logits.rows(), "cross_entropy_sum: targets");
  const Mat& x = logits.value();
  double loss = 0.0;
  Mat soft(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = x.row(r).maxCoeff();
    Eigen::ArrayXd e = (x.row(r).array() - mx).exp();
    double z = e.sum();
    soft.row(r) = (e / z).matrix();
    int t = targets[static_cast<std::size_t>(r)];
    if (t < 0) continue;
    ensure(t < x.cols(), "cross_entropy_sum: target out of range");
    loss += std::log(z) + mx - x(r, t);
  }
  auto ln = logits.node();
  auto sm = std::make_shared<Mat>(std::move(soft));
  auto tg = std::make_shared<std::vector<int>>(targets);
  Mat v(1, 1);
  v(0, 0) = loss;
  return detail::make_op(std::move(v), {logits}, [ln, sm, tg](Node& out) {
    double g = out.grad(0, 0);
    Mat grad = Mat::Zero(sm->rows(), sm->cols());
    for (Eigen::Index r = 0; r < sm->rows(); ++r) {
      int t = (*tg)[static_cast<std::size_t>(r)];
      if (t < 0) continue;
      grad.row(r) = sm->row(r) * g;
      grad(r, t) -= g;
    }
    detail::accumulate(ln, grad);
  });
}

// Sum of -log(probs[r, target_r]) over rows; expects a probability matrix.
// Rows with target < 0 are ignored.
inline Var nll_from_probs_sum(const Var& probs, const std::vector<int>& targets) {
  ensure(static_cast<Eigen::Index>(targets.size()) == probs.rows(), "nll_from_probs_sum: targets");
  const Mat& p = probs.value();
  double loss = 0.0;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    int t = targets[static_cast<std::size_t>(r)];
    if (t < 0) continue;
    ensure(t < p.cols(), "nll_from_probs_sum: target out of range");
    ensure(p(r, t) > 0.0, "nll_from_probs_sum: zero probability at target");
    loss += -std::log(p(r, t));
  }
  auto pn = probs.node();
  auto tg = std::make_shared<std::vector<int>>(targets);
  Mat v(1, 1);
  v(0, 0) = loss;
  return detail::make_op(std::move(v), {probs}, [pn, tg](Node& out) {
    if (!pn->requires_grad) return;
    pn->ensure_grad();
    double g = out.grad(0, 0);
    for (Eigen::Index r = 0; r < pn->value.rows(); ++r) {
      int t = (*tg)[static_cast<std::size_t>(r)];
      if (t < 0) continue;
      pn->grad(r, t) -= g / pn->value(r, t);
    }
  });
}

// Inverted-scaling dropout. In eval mode (or p == 0) this is the identity.
inline Var dropout(const Var& a, double p, Rng* rng, bool train) {
  if (!train || p <= 0.0) return a;
  ensure(rng != nullptr, "dropout: rng required in train mode");
  std::bernoulli_distribution keep(1.0 - p);
  Mat mask(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      mask(r, c) = keep(*rng) ? 1.0 / (1.0 - p) : 0.0;
  auto an = a.node();
  auto mk = std::make_shared<Mat>(mask);
  return detail::make_op(a.value().cwiseProduct(mask), {a}, [an, mk](Node& out) {
    detail::accumulate(an, out.grad.cwiseProduct(*mk));
  });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

inline void backward(const Var& loss) {
  ensure(loss.defined() && loss.rows() == 1 && loss.cols() == 1, "backward: loss must be scalar");
  auto root = loss.node();
  if (!root->requires_grad) return;

  std::vector<std::shared_ptr<Node>> order;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
  std::unordered_map<Node*, int> state;  // 0 unseen, 1 on stack, 2 done
  stack.push_back({root, 0});
  state[root.get()] = 1;
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      auto child = node->parents[idx++];
      if (child->requires_grad && state[child.get()] == 0) {
        state[child.get()] = 1;
        stack.push_back({child, 0});
      }
    } else {
      state[node.get()] = 2;
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad(0, 0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto& node = *it;
    if (node->backprop) node->backprop(*node);
  }
}

}  // namespace refdial::nn
