#pragma once

#include <memory>
#include <vector>

#include "refdial/nn/tensor.hpp"

namespace refdial::gen {

// Mixes the generator distribution with the copy distribution over the
// extended vocabulary:
//
//   P(w) = p_gen * P_vocab(w) + (1 - p_gen) * sum_{i: src_i = w} a_i
//
// vocab_probs covers the output slots (vocabulary minus <nohs>); slot_to_ext
// maps each slot to its extended-vocabulary id. src_ext gives the extended id
// of every source position, with -1 for positions excluded from copying
// (padding and <nohs>). Rows are renormalized by their total mass, so when
// attention falls on excluded positions the result stays a distribution over
// the generator branch.
inline nn::Var copy_mix(const nn::Var& vocab_probs, const nn::Var& attn, const nn::Var& p_gen,
                        const std::vector<std::vector<int>>& src_ext,
                        const std::vector<int>& slot_to_ext, int ext_size) {
  using nn::Mat;
  const Eigen::Index b = vocab_probs.rows();
  ensure(attn.rows() == b && p_gen.rows() == b && p_gen.cols() == 1, "copy_mix: batch mismatch");
  ensure(static_cast<Eigen::Index>(slot_to_ext.size()) == vocab_probs.cols(),
         "copy_mix: slot map size");
  ensure(static_cast<Eigen::Index>(src_ext.size()) == b, "copy_mix: src_ext rows");

  Mat unnorm = Mat::Zero(b, ext_size);
  Eigen::VectorXd mass(b);
  for (Eigen::Index r = 0; r < b; ++r) {
    double pg = p_gen.value()(r, 0);
    for (Eigen::Index j = 0; j < vocab_probs.cols(); ++j)
      unnorm(r, slot_to_ext[static_cast<std::size_t>(j)]) += pg * vocab_probs.value()(r, j);
    const auto& ids = src_ext[static_cast<std::size_t>(r)];
    ensure(static_cast<Eigen::Index>(ids.size()) == attn.cols(), "copy_mix: src_ext cols");
    for (Eigen::Index l = 0; l < attn.cols(); ++l) {
      int id = ids[static_cast<std::size_t>(l)];
      if (id < 0) continue;
      ensure(id < ext_size, "copy_mix: extended index out of range");
      unnorm(r, id) += (1.0 - pg) * attn.value()(r, l);
    }
    mass(r) = unnorm.row(r).sum();
    ensure(mass(r) > 0.0, "copy_mix: zero mass row");
  }
  Mat out = unnorm;
  for (Eigen::Index r = 0; r < b; ++r) out.row(r) /= mass(r);

  auto vp = vocab_probs.node();
  auto at = attn.node();
  auto pg = p_gen.node();
  auto outv = std::make_shared<Mat>(out);
  auto massv = std::make_shared<Eigen::VectorXd>(mass);
  auto ids = std::make_shared<std::vector<std::vector<int>>>(src_ext);
  auto slots = std::make_shared<std::vector<int>>(slot_to_ext);

  return nn::detail::make_op(
      std::move(out), {vocab_probs, attn, p_gen}, [vp, at, pg, outv, massv, ids, slots](nn::Node& o) {
        const Mat& y = *outv;
        const Eigen::Index b = y.rows();
        for (Eigen::Index r = 0; r < b; ++r) {
          double m = (*massv)(r);
          double s = o.grad.row(r).dot(y.row(r));
          double pgv = pg->value(r, 0);
          // d loss / d unnorm[r, e]
          auto gu = [&](int e) { return (o.grad(r, e) - s) / m; };
          double dpg = 0.0;
          if (vp->requires_grad || pg->requires_grad) {
            for (Eigen::Index j = 0; j < vp->value.cols(); ++j) {
              int e = (*slots)[static_cast<std::size_t>(j)];
              double g = gu(e);
              if (vp->requires_grad) {
                vp->ensure_grad();
                vp->grad(r, j) += pgv * g;
              }
              dpg += vp->value(r, j) * g;
            }
          }
          const auto& row_ids = (*ids)[static_cast<std::size_t>(r)];
          for (Eigen::Index l = 0; l < at->value.cols(); ++l) {
            int e = row_ids[static_cast<std::size_t>(l)];
            if (e < 0) continue;
            double g = gu(e);
            if (at->requires_grad) {
              at->ensure_grad();
              at->grad(r, l) += (1.0 - pgv) * g;
            }
            dpg -= at->value(r, l) * g;
          }
          if (pg->requires_grad) {
            pg->ensure_grad();
            pg->grad(r, 0) += dpg;
          }
        }
      });
}

}  // namespace refdial::gen
