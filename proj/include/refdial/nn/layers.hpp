#pragma once

#include <map>
#include <string>
#include <vector>

#include "refdial/nn/tensor.hpp"

namespace refdial::nn {

// Named parameter registry. std::map keeps serialization and optimizer
// traversal order deterministic.
class ParamStore {
 public:
  // Weights are sampled uniformly from (-0.1, 0.1); biases are zeros.
  Var add_weight(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Mat m(rows, cols);
    std::uniform_real_distribution<double> d(-0.1, 0.1);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = d(rng);
    return insert(name, std::move(m));
  }

  Var add_zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    return insert(name, Mat::Zero(rows, cols));
  }

  Var& at(const std::string& name) {
    auto it = params_.find(name);
    ensure(it != params_.end(), "ParamStore: unknown parameter " + name);
    return it->second;
  }
  const Var& at(const std::string& name) const {
    auto it = params_.find(name);
    ensure(it != params_.end(), "ParamStore: unknown parameter " + name);
    return it->second;
  }

  std::map<std::string, Var>& all() { return params_; }
  const std::map<std::string, Var>& all() const { return params_; }

  void zero_grads() {
    for (auto& [name, v] : params_) v.zero_grad();
  }

  std::size_t count_scalars() const {
    std::size_t n = 0;
    for (const auto& [name, v] : params_) n += static_cast<std::size_t>(v.rows() * v.cols());
    return n;
  }

  // Deep copy of current values (same names, fresh nodes).
  std::map<std::string, Mat> snapshot() const {
    std::map<std::string, Mat> s;
    for (const auto& [name, v] : params_) s[name] = v.value();
    return s;
  }

  void restore(const std::map<std::string, Mat>& snap) {
    for (auto& [name, v] : params_) {
      auto it = snap.find(name);
      ensure(it != snap.end(), "ParamStore::restore: missing " + name);
      v.value() = it->second;
    }
  }

 private:
  Var insert(const std::string& name, Mat m) {
    ensure(params_.find(name) == params_.end(), "ParamStore: duplicate parameter " + name);
    Var v(std::move(m), /*requires_grad=*/true);
    params_.emplace(name, v);
    return v;
  }

  std::map<std::string, Var> params_;
};

// y = x W + b with W (in x out), b (1 x out).
struct Linear {
  Var W;
  Var b;

  static Linear create(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index out,
                       Rng& rng) {
    Linear l;
    l.W = ps.add_weight(name + ".W", in, out, rng);
    l.b = ps.add_zeros(name + ".b", 1, out);
    return l;
  }

  Var operator()(const Var& x) const { return add_rowvec(matmul(x, W), b); }
};

struct Embedding {
  Var E;  // (V x D)

  static Embedding create(ParamStore& ps, const std::string& name, Eigen::Index vocab,
                          Eigen::Index dim, Rng& rng) {
    return Embedding{ps.add_weight(name + ".E", vocab, dim, rng)};
  }

  // Rows of E selected by token index, one row per batch item.
  Var lookup(const std::vector<int>& ids) const {
    Mat v(static_cast<Eigen::Index>(ids.size()), E.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      ensure(ids[i] >= 0 && ids[i] < E.rows(), "Embedding: index out of range");
      v.row(static_cast<Eigen::Index>(i)) = E.value().row(ids[i]);
    }
    auto en = E.node();
    auto idx = std::make_shared<std::vector<int>>(ids);
    return detail::make_op(std::move(v), {E}, [en, idx](Node& out) {
      if (!en->requires_grad) return;
      en->ensure_grad();
      for (std::size_t i = 0; i < idx->size(); ++i)
        en->grad.row((*idx)[i]) += out.grad.row(static_cast<Eigen::Index>(i));
    });
  }
};

// Single-layer LSTM cell; gate order i, f, g, o.
struct LSTMCell {
  Linear ih;  // (input -> 4H)
  Linear hh;  // (H -> 4H)
  Eigen::Index hidden = 0;

  static LSTMCell create(ParamStore& ps, const std::string& name, Eigen::Index input,
                         Eigen::Index hidden, Rng& rng) {
    LSTMCell c;
    c.ih = Linear::create(ps, name + ".ih", input, 4 * hidden, rng);
    c.hh = Linear::create(ps, name + ".hh", hidden, 4 * hidden, rng);
    c.hidden = hidden;
    return c;
  }

  struct State {
    Var h;
    Var c;
  };

  State step(const Var& x, const State& prev) const {
    Var z = add(ih(x), hh(prev.h));
    Var i = sigmoid_op(slice_cols(z, 0, hidden));
    Var f = sigmoid_op(slice_cols(z, hidden, hidden));
    Var g = tanh_op(slice_cols(z, 2 * hidden, hidden));
    Var o = sigmoid_op(slice_cols(z, 3 * hidden, hidden));
    Var c = add(mul(f, prev.c), mul(i, g));
    Var h = mul(o, tanh_op(c));
    return {h, c};
  }
};

}  // namespace refdial::nn
