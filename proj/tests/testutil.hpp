#pragma once

// Shared helpers for the unit and acceptance suites: tiny model configs,
// random instance generators, and the synthetic overfit datasets.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "refdial/gen/model.hpp"
#include "refdial/rng.hpp"
#include "refdial/text/vocab.hpp"

namespace testutil {

using refdial::Rng;

inline refdial::gen::GenConfig small_gen_config(refdial::gen::Variant v, int vocab_size = 24) {
  refdial::gen::GenConfig cfg;
  cfg.variant = v;
  cfg.vocab_size = vocab_size;
  cfg.feature_dim = 6;
  cfg.embed_dim = 10;
  cfg.hidden_dim = 12;
  cfg.attn_dim = 8;
  cfg.dropout = 0.0;
  cfg.max_decode_len = 8;
  return cfg;
}

inline Eigen::VectorXd random_vec(Rng& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

// Random instance with plausible shapes: source of the given length (or
// {<nohs>} when src_len == 0), optionally with OOV extensions.
inline refdial::gen::GenInstance random_gen_instance(const refdial::gen::GenConfig& cfg, Rng& rng,
                                                     int src_len, int tgt_len, int extras = 0) {
  namespace text = refdial::text;
  refdial::gen::GenInstance inst;
  std::uniform_int_distribution<int> word(text::kNohsId + 1, cfg.vocab_size - 1);
  if (src_len == 0) {
    inst.source = {text::kNohsId};
    inst.source_extended = {text::kNohsId};
  } else {
    for (int i = 0; i < src_len; ++i) {
      if (extras > 0 && i < extras) {
        inst.source.push_back(text::kUnkId);
        inst.source_extended.push_back(cfg.vocab_size + i);
      } else {
        int w = word(rng);
        inst.source.push_back(w);
        inst.source_extended.push_back(w);
      }
    }
    inst.extra_count = extras;
  }
  inst.target_in.push_back(text::kSosId);
  for (int i = 0; i < tgt_len; ++i) {
    int w = word(rng);
    inst.target_in.push_back(w);
    inst.target_out.push_back(w);
    inst.target_out_extended.push_back(w);
  }
  inst.target_in.pop_back();
  inst.target_out.push_back(text::kEosId);
  inst.target_out_extended.push_back(text::kEosId);
  inst.context_features = random_vec(rng, 6 * cfg.feature_dim);
  inst.target_features = random_vec(rng, cfg.feature_dim);
  return inst;
}

// Deterministic, fully learnable synthetic generation task. Image k is named
// by token (5 + k); the target utterance is its name plus a style token; the
// source is the previous mention. Odd images carry an out-of-vocabulary
// surface that the target repeats, so the copy path must fire to reach full
// accuracy on the extended targets.
struct SyntheticGenData {
  refdial::gen::GenConfig cfg;
  std::vector<refdial::gen::GenInstance> instances;
};

inline SyntheticGenData synthetic_gen_dataset(refdial::gen::Variant v, int n_instances = 50,
                                              bool with_oov = true) {
  namespace text = refdial::text;
  SyntheticGenData data;
  data.cfg = small_gen_config(v, 5 + 10 + 5);  // specials + 10 names + 5 styles
  Rng feat_rng = refdial::make_rng(404);
  std::vector<Eigen::VectorXd> image_feats;
  for (int k = 0; k < 10; ++k) image_feats.push_back(random_vec(feat_rng, data.cfg.feature_dim));

  for (int i = 0; i < n_instances; ++i) {
    int k = i % 10;
    int name = 5 + k;
    int style = 5 + 10 + (k % 5);
    refdial::gen::GenInstance inst;
    bool oov = with_oov && v == refdial::gen::Variant::kCopy && (k % 2 == 1);
    if (v == refdial::gen::Variant::kRef || i < 10) {
      inst.source = {text::kNohsId};
      inst.source_extended = {text::kNohsId};
      oov = oov && false;
    } else if (oov) {
      // source: [name, <unk>] where the unknown surface gets temp index V
      inst.source = {name, text::kUnkId};
      inst.source_extended = {name, data.cfg.vocab_size};
      inst.extra_count = 1;
    } else {
      inst.source = {name, style};
      inst.source_extended = {name, style};
    }
    inst.target_in = {text::kSosId, name};
    inst.target_out = {name};
    inst.target_out_extended = {name};
    if (oov) {
      inst.target_in.push_back(text::kUnkId);
      inst.target_out.push_back(text::kUnkId);
      inst.target_out_extended.push_back(data.cfg.vocab_size);  // must be copied
    } else {
      inst.target_in.push_back(style);
      inst.target_out.push_back(style);
      inst.target_out_extended.push_back(style);
    }
    inst.target_out.push_back(text::kEosId);
    inst.target_out_extended.push_back(text::kEosId);

    Eigen::VectorXd ctx(6 * data.cfg.feature_dim);
    for (int j = 0; j < 6; ++j)
      ctx.segment(j * data.cfg.feature_dim, data.cfg.feature_dim) =
          image_feats[static_cast<std::size_t>((k + j) % 10)];
    inst.context_features = ctx;
    inst.target_features = image_feats[static_cast<std::size_t>(k)];
    data.instances.push_back(std::move(inst));
  }
  return data;
}

}  // namespace testutil
