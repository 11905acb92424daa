#include <catch2/catch_amalgamated.hpp>

#include "refdial/nn/adam.hpp"
#include "refdial/nn/layers.hpp"
#include "refdial/nn/serialize.hpp"
#include "refdial/nn/tensor.hpp"

#include <cstdio>
#include <filesystem>

using namespace refdial;
using namespace refdial::nn;

namespace {

// Finite-difference check: perturbs every entry of every leaf and compares
// the numerical slope against the grad from backward().
double numeric_grad(const std::function<double()>& f, double& x) {
  const double eps = 1e-6;
  double orig = x;
  x = orig + eps;
  double fp = f();
  x = orig - eps;
  double fm = f();
  x = orig;
  return (fp - fm) / (2 * eps);
}

void check_grads(std::vector<Var> leaves, const std::function<Var()>& forward, double tol = 1e-6) {
  Var loss = forward();
  backward(loss);
  for (auto& leaf : leaves) {
    Mat analytic = leaf.grad();
    for (Eigen::Index r = 0; r < leaf.rows(); ++r)
      for (Eigen::Index c = 0; c < leaf.cols(); ++c) {
        double num = numeric_grad([&] { return forward().value()(0, 0); }, leaf.value()(r, c));
        INFO("leaf entry (" << r << "," << c << ")");
        REQUIRE_THAT(analytic(r, c), Catch::Matchers::WithinAbs(num, tol));
      }
  }
}

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

}  // namespace

TEST_CASE("gradients match finite differences for core ops") {
  Rng rng = make_rng(7);
  Var a(random_mat(rng, 3, 4), true);
  Var b(random_mat(rng, 4, 2), true);
  Var c(random_mat(rng, 3, 2), true);
  Var bias(random_mat(rng, 1, 2), true);

  SECTION("matmul + add + tanh") {
    check_grads({a, b, c}, [&] { return sum_all(tanh_op(add(matmul(a, b), c))); });
  }
  SECTION("bias broadcast + sigmoid") {
    check_grads({a, b, bias}, [&] { return sum_all(sigmoid_op(add_rowvec(matmul(a, b), bias))); });
  }
  SECTION("relu + elementwise mul") {
    Var d(random_mat(rng, 3, 4), true);
    check_grads({a, d}, [&] { return sum_all(mul(relu(a), d)); });
  }
  SECTION("concat + slice") {
    Var d(random_mat(rng, 3, 3), true);
    check_grads({a, d}, [&] {
      Var cat = concat_cols({a, d});
      return sum_all(mul(slice_cols(cat, 2, 4), slice_cols(cat, 3, 4)));
    });
  }
  SECTION("rows_dot and scale_rows") {
    Var d(random_mat(rng, 3, 4), true);
    Var s(random_mat(rng, 3, 1), true);
    check_grads({a, d, s}, [&] { return sum_all(scale_rows(rows_dot(a, d), s)); });
  }
  SECTION("l2 normalize") {
    check_grads({a}, [&] { return sum_all(mul(l2_normalize_rows(a), a)); });
  }
  SECTION("log of positive values") {
    Var p(Mat::Constant(2, 3, 0.5) + random_mat(rng, 2, 3, 0.3), true);
    check_grads({p}, [&] { return sum_all(log_op(p)); });
  }
}

TEST_CASE("masked softmax: exact zeros, unit sums, correct gradient") {
  Rng rng = make_rng(11);
  Var logits(random_mat(rng, 4, 5, 3.0), true);
  Mat mask = Mat::Ones(4, 5);
  mask(0, 1) = 0;
  mask(0, 4) = 0;
  mask(2, 0) = 0;

  Var sm = masked_softmax(logits, mask);
  for (Eigen::Index r = 0; r < 4; ++r) {
    REQUIRE_THAT(sm.value().row(r).sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    for (Eigen::Index c = 0; c < 5; ++c) {
      if (mask(r, c) == 0) REQUIRE(sm.value()(r, c) == 0.0);
      REQUIRE(sm.value()(r, c) >= 0.0);
    }
  }

  Var weights(random_mat(rng, 4, 5), true);
  check_grads({logits}, [&] { return sum_all(mul(masked_softmax(logits, mask), weights)); });
}

TEST_CASE("weighted_sum matches the hand-computed combination") {
  Rng rng = make_rng(3);
  Var w(random_mat(rng, 2, 3), true);
  std::vector<Var> items;
  for (int l = 0; l < 3; ++l) items.emplace_back(random_mat(rng, 2, 4), true);

  Var out = weighted_sum(w, items);
  for (Eigen::Index r = 0; r < 2; ++r)
    for (Eigen::Index c = 0; c < 4; ++c) {
      double expect = 0.0;
      for (int l = 0; l < 3; ++l) expect += w.value()(r, l) * items[l].value()(r, c);
      REQUIRE_THAT(out.value()(r, c), Catch::Matchers::WithinAbs(expect, 1e-12));
    }

  Var probe(random_mat(rng, 2, 4), true);
  check_grads({w, items[0], items[2]},
              [&] { return sum_all(mul(weighted_sum(w, items), probe)); });
}

TEST_CASE("cross entropy: closed forms and gradient") {
  SECTION("uniform logits over K classes, T targets -> T ln K") {
    int K = 7, T = 5;
    Var logits(Mat::Zero(T, K), true);
    std::vector<int> targets(T, 2);
    Var loss = cross_entropy_sum(logits, targets);
    REQUIRE_THAT(loss.value()(0, 0), Catch::Matchers::WithinAbs(T * std::log(K), 1e-10));
  }
  SECTION("near-one-hot predictions -> loss near 0") {
    Mat m = Mat::Zero(2, 3);
    m(0, 1) = 50.0;
    m(1, 0) = 50.0;
    Var logits(m, true);
    Var loss = cross_entropy_sum(logits, {1, 0});
    REQUIRE(loss.value()(0, 0) < 1e-12);
  }
  SECTION("ignored targets contribute nothing") {
    Rng rng = make_rng(5);
    Var logits(random_mat(rng, 3, 4), true);
    Var all = cross_entropy_sum(logits, {1, 2, 0});
    Var masked = cross_entropy_sum(logits, {1, -1, 0});
    Var middle = cross_entropy_sum(logits, {-1, 2, -1});
    REQUIRE_THAT(all.value()(0, 0), Catch::Matchers::WithinAbs(
        masked.value()(0, 0) + middle.value()(0, 0), 1e-10));
  }
  SECTION("gradient") {
    Rng rng = make_rng(9);
    Var logits(random_mat(rng, 3, 4), true);
    check_grads({logits}, [&] { return cross_entropy_sum(logits, {1, -1, 3}); });
  }
  SECTION("nll from probabilities gradient") {
    Rng rng = make_rng(13);
    Mat p = random_mat(rng, 2, 3, 0.2);
    p = (p.array() + 0.4).matrix();
    Var probs(p, true);
    check_grads({probs}, [&] { return nll_from_probs_sum(probs, {0, 2}); });
  }
}

TEST_CASE("LSTM cell and embedding gradients") {
  Rng rng = make_rng(21);
  ParamStore ps;
  auto cell = LSTMCell::create(ps, "lstm", 3, 4, rng);
  auto emb = Embedding::create(ps, "emb", 5, 3, rng);
  Var h0(random_mat(rng, 2, 4), true);
  Var c0(random_mat(rng, 2, 4), true);
  std::vector<int> ids = {1, 3};

  auto forward = [&] {
    Var x = emb.lookup(ids);
    auto s1 = cell.step(x, {h0, c0});
    auto s2 = cell.step(x, s1);
    return sum_all(s2.h);
  };
  check_grads({ps.at("lstm.ih.W"), ps.at("lstm.hh.W"), ps.at("lstm.ih.b"), ps.at("emb.E"), h0, c0},
              forward, 2e-6);
}

TEST_CASE("dropout scaling and determinism") {
  Rng rng = make_rng(2);
  Var x(Mat::Ones(50, 40), true);
  Rng d1 = make_rng(77);
  Var y = dropout(x, 0.3, &d1, true);
  double mean = y.value().mean();
  REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(1.0, 0.05));
  // same rng seed -> identical mask
  Rng d2 = make_rng(77);
  Var y2 = dropout(x, 0.3, &d2, true);
  REQUIRE(y.value() == y2.value());
  // eval mode is the identity
  Var z = dropout(x, 0.3, nullptr, false);
  REQUIRE(z.value() == x.value());
}

TEST_CASE("NoGradGuard suppresses graph construction") {
  Rng rng = make_rng(4);
  Var a(random_mat(rng, 2, 2), true);
  NoGradGuard guard;
  Var out = tanh_op(matmul(a, a));
  REQUIRE_FALSE(out.requires_grad());
}

TEST_CASE("Adam drives a quadratic to its minimum") {
  ParamStore ps;
  Rng rng = make_rng(1);
  Var w = ps.add_weight("w", 1, 3, rng);
  Mat target(1, 3);
  target << 1.0, -2.0, 0.5;
  Adam opt(0.05);
  for (int it = 0; it < 400; ++it) {
    ps.zero_grads();
    Var diff = sub(w, Var(target));
    Var loss = sum_all(mul(diff, diff));
    backward(loss);
    opt.step(ps);
  }
  REQUIRE((w.value() - target).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("parameter init: weights in (-0.1, 0.1), biases zero") {
  ParamStore ps;
  Rng rng = make_rng(123);
  Var w = ps.add_weight("w", 20, 20, rng);
  Var b = ps.add_zeros("b", 1, 20);
  REQUIRE(w.value().maxCoeff() < 0.1);
  REQUIRE(w.value().minCoeff() > -0.1);
  REQUIRE(w.value().cwiseAbs().maxCoeff() > 0.0);
  REQUIRE(b.value().isZero());
}

TEST_CASE("checkpoint roundtrip preserves tensors and header") {
  ParamStore ps;
  Rng rng = make_rng(31);
  ps.add_weight("layer.W", 3, 4, rng);
  ps.add_zeros("layer.b", 1, 4);
  nlohmann::ordered_json header;
  header["variant"] = "ref";
  header["hidden_dim"] = 4;
  header["vocab_hash"] = "deadbeef";

  auto path = std::filesystem::temp_directory_path() / "refdial_test_ckpt.bin";
  save_checkpoint(path.string(), header, ps.snapshot());
  auto ck = load_checkpoint(path.string());
  REQUIRE(ck.header["variant"] == "ref");
  REQUIRE(ck.tensors.size() == 2);
  REQUIRE(ck.tensors.at("layer.W") == ps.at("layer.W").value());
  REQUIRE(ck.tensors.at("layer.b") == ps.at("layer.b").value());
  std::filesystem::remove(path);
}
