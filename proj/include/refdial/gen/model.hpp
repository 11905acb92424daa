#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "refdial/gen/copy_mix.hpp"
#include "refdial/nn/adam.hpp"
#include "refdial/nn/layers.hpp"
#include "refdial/nn/serialize.hpp"
#include "refdial/text/vocab.hpp"

namespace refdial::gen {

enum class Variant { kRef, kReRef, kCopy };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kRef: return "ref";
    case Variant::kReRef: return "reref";
    case Variant::kCopy: return "copy";
  }
  throw ContractError("variant_name: bad variant");
}

inline Variant parse_variant(const std::string& s) {
  if (s == "ref") return Variant::kRef;
  if (s == "reref") return Variant::kReRef;
  if (s == "copy") return Variant::kCopy;
  throw InputError("unknown generation variant: " + s);
}

struct GenConfig {
  Variant variant = Variant::kReRef;
  int vocab_size = 0;     // includes the five special tokens
  int feature_dim = 2048;
  int embed_dim = 1024;
  int hidden_dim = 512;
  int attn_dim = 512;
  double dropout = 0.3;
  int max_decode_len = 30;

  int output_dim() const { return vocab_size - 1; }  // <nohs> excluded
};

// Output slots skip <nohs>: slot j covers vocabulary id j below the <nohs>
// index and j+1 at or above it.
inline int slot_to_vocab(int slot) { return slot < text::kNohsId ? slot : slot + 1; }
inline int vocab_to_slot(int id) {
  ensure(id != text::kNohsId, "vocab_to_slot: <nohs> has no output slot");
  return id < text::kNohsId ? id : id - 1;
}

// One model-ready training/decoding instance with features resolved.
struct GenInstance {
  std::vector<int> source;           // base-vocab ids, at least one token
  std::vector<int> source_extended;  // extended ids aligned with source
  int extra_count = 0;               // OOV surface forms copied from the source
  std::vector<int> target_in;        // <sos> t1 .. tn
  std::vector<int> target_out;       // t1 .. tn <eos>
  std::vector<int> target_out_extended;
  Eigen::VectorXd context_features;  // 6 * feature_dim
  Eigen::VectorXd target_features;   // feature_dim
};

struct StepDistribution {
  nn::Var probs;         // (B x domain) distribution; <nohs> entry exactly 0
  nn::Var attention;     // (B x L) weights, empty Var for Ref
  nn::Var p_gen;         // (B x 1), defined for Copy only
};

class GenerationModel {
 public:
  GenerationModel(const GenConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    require(cfg.vocab_size > text::kNohsId + 1, "GenConfig: vocabulary too small");
    Rng rng = make_rng(seed);
    const int F = cfg.feature_dim;
    const int E = cfg.embed_dim;
    const int H = cfg.hidden_dim;
    const int A = cfg.attn_dim;
    embedding_ = nn::Embedding::create(params_, "embedding", cfg.vocab_size, E, rng);
    ctx_proj_ = nn::Linear::create(params_, "visual.context", 6 * F, H, rng);
    tgt_proj_ = nn::Linear::create(params_, "visual.target", F, H, rng);
    fuse_ = nn::Linear::create(params_, "visual.fuse", 2 * H, H, rng);
    if (cfg.variant == Variant::kRef) {
      decoder_ = nn::LSTMCell::create(params_, "decoder", H + E, H, rng);
      out_ = nn::Linear::create(params_, "out", H, cfg.output_dim(), rng);
    } else {
      enc_fwd_ = nn::LSTMCell::create(params_, "encoder.fwd", E, H, rng);
      enc_bwd_ = nn::LSTMCell::create(params_, "encoder.bwd", E, H, rng);
      enc_to_dec_ = nn::Linear::create(params_, "encoder.to_dec", 2 * H, H, rng);
      attn_We_ = nn::Linear::create(params_, "attn.We", 2 * H, A, rng);
      attn_Wd_ = nn::Linear::create(params_, "attn.Wd", H, A, rng);
      attn_va_ = nn::Linear::create(params_, "attn.va", A, 1, rng);
      decoder_ = nn::LSTMCell::create(params_, "decoder", E, H, rng);
      out_ = nn::Linear::create(params_, "out", 3 * H, cfg.output_dim(), rng);
      if (cfg.variant == Variant::kCopy) {
        gate_ctx_ = nn::Linear::create(params_, "copy.gate_ctx", 2 * H, 1, rng);
        gate_state_ = nn::Linear::create(params_, "copy.gate_state", H, 1, rng);
        gate_input_ = nn::Linear::create(params_, "copy.gate_input", E, 1, rng);
      }
    }
  }

  const GenConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // ---------------------------------------------------------------------
  // Visual pathway: dropout -> linear -> ReLU on the concatenated context
  // and on the target, then a linear fusion of the two.
  // ---------------------------------------------------------------------
  nn::Var encode_visual(const nn::Var& context, const nn::Var& target, bool train,
                        Rng* rng) const {
    require(context.cols() == 6 * cfg_.feature_dim,
            "encode_visual: context must concatenate exactly 6 feature vectors");
    require(target.cols() == cfg_.feature_dim, "encode_visual: bad target feature size");
    nn::Var ctx = nn::relu(ctx_proj_(nn::dropout(context, cfg_.dropout, rng, train)));
    nn::Var tgt = nn::relu(tgt_proj_(nn::dropout(target, cfg_.dropout, rng, train)));
    return fuse_(nn::concat_cols({ctx, tgt}));
  }

  struct EncoderState {
    std::vector<nn::Var> outputs;    // per source position, (B x 2H)
    std::vector<nn::Var> attn_keys;  // cached W_e h_enc per position, (B x A)
    nn::Mat mask;                    // (B x L), 1 = real token
    nn::Var dec_init;                // (B x H)
  };

  // Bidirectional encoder over the previous utterance (or <nohs>). Padded
  // positions freeze the recurrent state so per-instance final states match
  // the unpadded computation.
  EncoderState encode_source(const std::vector<std::vector<int>>& source, const nn::Var& visual,
                             bool train, Rng* rng) const {
    ensure(cfg_.variant != Variant::kRef, "encode_source: Ref has no encoder");
    const std::size_t batch = source.size();
    std::size_t max_len = 0;
    for (const auto& s : source) {
      require(!s.empty(), "encode_source: empty source (must be <nohs>)");
      max_len = std::max(max_len, s.size());
    }

    EncoderState enc;
    enc.mask = nn::Mat::Zero(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(max_len));
    std::vector<nn::Var> embs(max_len);
    for (std::size_t t = 0; t < max_len; ++t) {
      std::vector<int> ids(batch, text::kPadId);
      for (std::size_t b = 0; b < batch; ++b)
        if (t < source[b].size()) {
          ids[b] = source[b][t];
          enc.mask(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(t)) = 1.0;
        }
      embs[t] = nn::dropout(embedding_.lookup(ids), cfg_.dropout, rng, train);
    }

    auto masked_step = [&](const nn::LSTMCell& cell, const nn::LSTMCell::State& prev,
                           const nn::Var& x, std::size_t t) {
      nn::LSTMCell::State next = cell.step(x, prev);
      nn::Var keep(enc.mask.col(static_cast<Eigen::Index>(t)));
      nn::Var drop(nn::Mat::Ones(static_cast<Eigen::Index>(batch), 1) -
                   enc.mask.col(static_cast<Eigen::Index>(t)));
      next.h = nn::add(nn::scale_rows(next.h, keep), nn::scale_rows(prev.h, drop));
      next.c = nn::add(nn::scale_rows(next.c, keep), nn::scale_rows(prev.c, drop));
      return next;
    };

    std::vector<nn::Var> fwd_out(max_len);
    nn::LSTMCell::State fwd{visual, visual};
    for (std::size_t t = 0; t < max_len; ++t) {
      fwd = masked_step(enc_fwd_, fwd, embs[t], t);
      fwd_out[t] = fwd.h;
    }
    std::vector<nn::Var> bwd_out(max_len);
    nn::LSTMCell::State bwd{visual, visual};
    for (std::size_t t = max_len; t-- > 0;) {
      bwd = masked_step(enc_bwd_, bwd, embs[t], t);
      bwd_out[t] = bwd.h;
    }

    enc.outputs.reserve(max_len);
    enc.attn_keys.reserve(max_len);
    for (std::size_t t = 0; t < max_len; ++t) {
      enc.outputs.push_back(nn::concat_cols({fwd_out[t], bwd_out[t]}));
      enc.attn_keys.push_back(attn_We_(enc.outputs.back()));
    }
    enc.dec_init = enc_to_dec_(nn::concat_cols({fwd.h, bwd.h}));
    return enc;
  }

  struct Attention {
    nn::Var weights;  // (B x L)
    nn::Var context;  // (B x 2H)
  };

  // e_t = v_a(tanh(W_e h_enc_t + W_d h_dec)); masked softmax; weighted sum.
  Attention attention_step(const EncoderState& enc, const nn::Var& dec_hidden) const {
    nn::Var query = attn_Wd_(dec_hidden);
    std::vector<nn::Var> scores;
    scores.reserve(enc.attn_keys.size());
    for (const auto& key : enc.attn_keys)
      scores.push_back(attn_va_(nn::tanh_op(nn::add(key, query))));
    nn::Var logits = nn::concat_cols(scores);
    Attention a;
    a.weights = nn::masked_softmax(logits, enc.mask);
    a.context = nn::weighted_sum(a.weights, enc.outputs);
    return a;
  }

  // p_gen = sigmoid(tanh(w_h* h*) + tanh(w_s s) + tanh(w_x x))
  nn::Var copy_gate(const nn::Var& attn_context, const nn::Var& dec_hidden,
                    const nn::Var& dec_input) const {
    nn::Var sum = nn::add(nn::add(nn::tanh_op(gate_ctx_(attn_context)),
                                  nn::tanh_op(gate_state_(dec_hidden))),
                          nn::tanh_op(gate_input_(dec_input)));
    return nn::sigmoid_op(sum);
  }

  std::vector<int> slot_map() const {
    std::vector<int> m(static_cast<std::size_t>(cfg_.output_dim()));
    for (int j = 0; j < cfg_.output_dim(); ++j) m[static_cast<std::size_t>(j)] = slot_to_vocab(j);
    return m;
  }

  // Copy exclusion: padding and <nohs> positions never receive copy mass.
  static std::vector<std::vector<int>> copy_source_ids(const std::vector<GenInstance>& batch,
                                                       std::size_t max_len) {
    std::vector<std::vector<int>> ids(batch.size(), std::vector<int>(max_len, -1));
    for (std::size_t b = 0; b < batch.size(); ++b)
      for (std::size_t t = 0; t < batch[b].source.size(); ++t)
        ids[b][t] = batch[b].source[t] == text::kNohsId ? -1 : batch[b].source_extended[t];
    return ids;
  }

  struct BatchResult {
    nn::Var loss;
    long target_tokens = 0;
    long correct_tokens = 0;  // teacher-forced argmax hits
    double accuracy() const {
      return target_tokens == 0 ? 0.0
                                : static_cast<double>(correct_tokens) /
                                      static_cast<double>(target_tokens);
    }
  };

  // Teacher-forced batch loss: cross entropy with sum reduction for Ref and
  // ReRef; negative log-likelihood of the mixed extended-vocabulary
  // distribution for Copy.
  BatchResult teacher_forced_loss(const std::vector<GenInstance>& batch, bool train,
                                  Rng* rng) const {
    ensure(!batch.empty(), "teacher_forced_loss: empty batch");
    const std::size_t b = batch.size();
    nn::Var visual = encode_visual(stack_context(batch), stack_target(batch), train, rng);

    EncoderState enc;
    std::size_t src_len = 0;
    std::vector<std::vector<int>> src_ext_ids;
    int ext_size = cfg_.vocab_size;
    if (cfg_.variant != Variant::kRef) {
      std::vector<std::vector<int>> sources(b);
      for (std::size_t i = 0; i < b; ++i) {
        sources[i] = batch[i].source;
        ext_size = std::max(ext_size, cfg_.vocab_size + batch[i].extra_count);
      }
      enc = encode_source(sources, visual, train, rng);
      src_len = enc.outputs.size();
      src_ext_ids = copy_source_ids(batch, src_len);
    }

    std::size_t steps = 0;
    for (const auto& inst : batch) steps = std::max(steps, inst.target_in.size());

    nn::LSTMCell::State state = cfg_.variant == Variant::kRef
                                    ? nn::LSTMCell::State{visual, visual}
                                    : nn::LSTMCell::State{enc.dec_init, enc.dec_init};

    BatchResult result;
    std::vector<nn::Var> step_losses;
    auto slots = slot_map();
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<int> in_ids(b, text::kPadId);
      std::vector<int> out_slots(b, -1);  // CE targets in slot space
      std::vector<int> out_ext(b, -1);    // NLL targets in extended space
      for (std::size_t i = 0; i < b; ++i) {
        if (t >= batch[i].target_in.size()) continue;
        in_ids[i] = batch[i].target_in[t];
        int gold = batch[i].target_out[t];
        out_slots[i] = vocab_to_slot(gold);
        out_ext[i] = batch[i].target_out_extended[t];
      }
      nn::Var x = embedding_.lookup(in_ids);
      nn::Var dec_in = cfg_.variant == Variant::kRef ? nn::concat_cols({visual, x}) : x;
      state = decoder_.step(dec_in, state);

      if (cfg_.variant == Variant::kRef) {
        nn::Var logits = out_(state.h);
        step_losses.push_back(nn::cross_entropy_sum(logits, out_slots));
        tally(logits.value(), out_slots, slots, result);
      } else if (cfg_.variant == Variant::kReRef) {
        Attention att = attention_step(enc, state.h);
        nn::Var logits = out_(nn::concat_cols({state.h, att.context}));
        step_losses.push_back(nn::cross_entropy_sum(logits, out_slots));
        tally(logits.value(), out_slots, slots, result);
      } else {
        Attention att = attention_step(enc, state.h);
        nn::Var logits = out_(nn::concat_cols({state.h, att.context}));
        nn::Var vocab_probs = nn::softmax_rows(logits);
        nn::Var p_gen = copy_gate(att.context, state.h, x);
        nn::Var mixed = copy_mix(vocab_probs, att.weights, p_gen, src_ext_ids, slots, ext_size);
        step_losses.push_back(nn::nll_from_probs_sum(mixed, out_ext));
        tally_probs(mixed.value(), out_ext, result);
      }
    }

    nn::Var total = step_losses[0];
    for (std::size_t i = 1; i < step_losses.size(); ++i) total = nn::add(total, step_losses[i]);
    double lv = total.value()(0, 0);
    if (!std::isfinite(lv)) throw ContractError("teacher_forced_loss: non-finite loss");
    result.loss = total;
    return result;
  }

  // One decode-step distribution on a single instance, exposed for property
  // tests; <nohs> has probability exactly 0 in every variant.
  StepDistribution step_distribution(const GenInstance& inst, int prev_token_ext) const {
    nn::NoGradGuard guard;
    nn::Var visual = encode_visual(stack_context({inst}), stack_target({inst}), false, nullptr);
    StepDistribution out;
    int ext_size = cfg_.vocab_size + inst.extra_count;
    if (cfg_.variant == Variant::kRef) {
      nn::Var x = embedding_.lookup({embedding_id(prev_token_ext)});
      auto state = decoder_.step(nn::concat_cols({visual, x}), {visual, visual});
      out.probs = scatter_slots(nn::softmax_rows(out_(state.h)), ext_size);
      return out;
    }
    EncoderState enc = encode_source({inst.source}, visual, false, nullptr);
    nn::Var x = embedding_.lookup({embedding_id(prev_token_ext)});
    auto state = decoder_.step(x, {enc.dec_init, enc.dec_init});
    Attention att = attention_step(enc, state.h);
    nn::Var logits = out_(nn::concat_cols({state.h, att.context}));
    out.attention = att.weights;
    if (cfg_.variant == Variant::kReRef) {
      out.probs = scatter_slots(nn::softmax_rows(logits), ext_size);
      return out;
    }
    out.p_gen = copy_gate(att.context, state.h, x);
    out.probs = copy_mix(nn::softmax_rows(logits), att.weights, out.p_gen,
                         copy_source_ids({inst}, inst.source.size()), slot_map(), ext_size);
    return out;
  }

  // --- decoding session: precomputes the encoder pass for one instance ---
  class DecodeSession {
   public:
    DecodeSession(const GenerationModel& model, const GenInstance& inst)
        : model_(model), inst_(inst) {
      nn::NoGradGuard guard;
      visual_ = model_.encode_visual(stack_context({inst}), stack_target({inst}), false, nullptr);
      if (model_.cfg_.variant != Variant::kRef) {
        enc_ = model_.encode_source({inst.source}, visual_, false, nullptr);
        src_ext_ = copy_source_ids({inst}, inst.source.size());
      }
      slots_ = model_.slot_map();
      ext_size_ = model_.cfg_.vocab_size + inst.extra_count;
    }

    using State = nn::LSTMCell::State;

    State initial_state() const {
      return model_.cfg_.variant == Variant::kRef ? State{visual_, visual_}
                                                  : State{enc_.dec_init, enc_.dec_init};
    }

    int start_token() const { return text::kSosId; }
    int eos_token() const { return text::kEosId; }
    int domain_size() const { return ext_size_; }

    // Log-probabilities over the extended domain; impossible tokens (always
    // including <nohs>) are -inf.
    std::pair<Eigen::VectorXd, State> step(const State& state, int prev_token) const {
      nn::NoGradGuard guard;
      nn::Var x = model_.embedding_.lookup({model_.embedding_id(prev_token)});
      State next;
      nn::Var probs;
      if (model_.cfg_.variant == Variant::kRef) {
        next = model_.decoder_.step(nn::concat_cols({visual_, x}), state);
        probs = model_.scatter_slots(nn::softmax_rows(model_.out_(next.h)), ext_size_);
      } else {
        next = model_.decoder_.step(x, state);
        Attention att = model_.attention_step(enc_, next.h);
        nn::Var logits = model_.out_(nn::concat_cols({next.h, att.context}));
        if (model_.cfg_.variant == Variant::kReRef) {
          probs = model_.scatter_slots(nn::softmax_rows(logits), ext_size_);
        } else {
          nn::Var p_gen = model_.copy_gate(att.context, next.h, x);
          probs = copy_mix(nn::softmax_rows(logits), att.weights, p_gen, src_ext_, slots_,
                           ext_size_);
        }
      }
      Eigen::VectorXd logp(ext_size_);
      for (int i = 0; i < ext_size_; ++i) {
        double p = probs.value()(0, i);
        logp(i) = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
      }
      return {logp, next};
    }

   private:
    const GenerationModel& model_;
    GenInstance inst_;
    nn::Var visual_;
    EncoderState enc_;
    std::vector<std::vector<int>> src_ext_;
    std::vector<int> slots_;
    int ext_size_ = 0;
  };

  // Stepwise argmax decoding; stops at <eos> or after max_len tokens.
  struct GreedyResult {
    std::vector<int> tokens;  // extended-domain ids, no <eos>
    bool completed = false;
  };
  GreedyResult greedy_decode(const GenInstance& inst, int max_len = -1) const {
    if (max_len < 0) max_len = cfg_.max_decode_len;
    DecodeSession session(*this, inst);
    auto state = session.initial_state();
    int prev = session.start_token();
    GreedyResult out;
    for (int t = 0; t < max_len; ++t) {
      auto [logp, next] = session.step(state, prev);
      int best = 0;
      logp.maxCoeff(&best);
      if (best == session.eos_token()) {
        out.completed = true;
        return out;
      }
      out.tokens.push_back(best);
      prev = best;
      state = next;
    }
    return out;
  }

  // --- checkpointing ---
  nlohmann::ordered_json checkpoint_header(std::uint64_t vocab_hash, std::uint64_t seed) const {
    nlohmann::ordered_json h;
    h["kind"] = "generation";
    h["variant"] = variant_name(cfg_.variant);
    h["vocab_size"] = cfg_.vocab_size;
    h["vocab_hash"] = hex64(vocab_hash);
    h["feature_dim"] = cfg_.feature_dim;
    h["embed_dim"] = cfg_.embed_dim;
    h["hidden_dim"] = cfg_.hidden_dim;
    h["attn_dim"] = cfg_.attn_dim;
    h["dropout"] = cfg_.dropout;
    h["max_decode_len"] = cfg_.max_decode_len;
    h["seed"] = seed;
    return h;
  }

  static GenConfig config_from_header(const nlohmann::json& h) {
    GenConfig cfg;
    cfg.variant = parse_variant(h.at("variant").get<std::string>());
    cfg.vocab_size = h.at("vocab_size").get<int>();
    cfg.feature_dim = h.at("feature_dim").get<int>();
    cfg.embed_dim = h.at("embed_dim").get<int>();
    cfg.hidden_dim = h.at("hidden_dim").get<int>();
    cfg.attn_dim = h.at("attn_dim").get<int>();
    cfg.dropout = h.at("dropout").get<double>();
    cfg.max_decode_len = h.value("max_decode_len", 30);
    return cfg;
  }

 private:
  static nn::Var stack_context(const std::vector<GenInstance>& batch) {
    nn::Mat m(static_cast<Eigen::Index>(batch.size()), batch[0].context_features.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      ensure(batch[i].context_features.size() == m.cols(), "context feature size mismatch");
      m.row(static_cast<Eigen::Index>(i)) = batch[i].context_features.transpose();
    }
    return nn::Var(std::move(m));
  }
  static nn::Var stack_target(const std::vector<GenInstance>& batch) {
    nn::Mat m(static_cast<Eigen::Index>(batch.size()), batch[0].target_features.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      ensure(batch[i].target_features.size() == m.cols(), "target feature size mismatch");
      m.row(static_cast<Eigen::Index>(i)) = batch[i].target_features.transpose();
    }
    return nn::Var(std::move(m));
  }

  // Decoder inputs use the base vocabulary: copied OOV tokens fall back to
  // <unk> embeddings.
  int embedding_id(int ext_id) const {
    return ext_id >= cfg_.vocab_size ? text::kUnkId : ext_id;
  }

  // Spreads output-slot probabilities onto extended-vocabulary ids; <nohs>
  // and temporary-extension entries stay exactly 0.
  nn::Var scatter_slots(const nn::Var& slot_probs, int ext_size) const {
    nn::Mat out = nn::Mat::Zero(slot_probs.rows(), ext_size);
    for (Eigen::Index r = 0; r < slot_probs.rows(); ++r)
      for (int j = 0; j < cfg_.output_dim(); ++j)
        out(r, slot_to_vocab(j)) = slot_probs.value()(r, j);
    auto sn = slot_probs.node();
    int vdim = cfg_.output_dim();
    return nn::detail::make_op(std::move(out), {slot_probs}, [sn, vdim](nn::Node& o) {
      if (!sn->requires_grad) return;
      sn->ensure_grad();
      for (Eigen::Index r = 0; r < sn->value.rows(); ++r)
        for (int j = 0; j < vdim; ++j) sn->grad(r, j) += o.grad(r, slot_to_vocab(j));
    });
  }

  void tally(const nn::Mat& logits, const std::vector<int>& slot_targets,
             const std::vector<int>& slots, BatchResult& result) const {
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      int gold = slot_targets[static_cast<std::size_t>(r)];
      if (gold < 0) continue;
      ++result.target_tokens;
      int best = 0;
      logits.row(r).maxCoeff(&best);
      if (best == gold) ++result.correct_tokens;
    }
    (void)slots;
  }

  void tally_probs(const nn::Mat& probs, const std::vector<int>& ext_targets,
                   BatchResult& result) const {
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      int gold = ext_targets[static_cast<std::size_t>(r)];
      if (gold < 0) continue;
      ++result.target_tokens;
      int best = 0;
      probs.row(r).maxCoeff(&best);
      if (best == gold) ++result.correct_tokens;
    }
  }

  GenConfig cfg_;
  nn::ParamStore params_;
  nn::Embedding embedding_;
  nn::Linear ctx_proj_, tgt_proj_, fuse_;
  nn::LSTMCell enc_fwd_, enc_bwd_;
  nn::Linear enc_to_dec_;
  nn::Linear attn_We_, attn_Wd_, attn_va_;
  nn::LSTMCell decoder_;
  nn::Linear out_;
  nn::Linear gate_ctx_, gate_state_, gate_input_;
};

}  // namespace refdial::gen
