#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "refdial/nn/adam.hpp"
#include "refdial/nn/layers.hpp"
#include "refdial/nn/serialize.hpp"

namespace refdial::res {

struct ResConfig {
  int embed_dim = 768;  // provider dimension
  int feature_dim = 2048;
  int hidden_dim = 512;
  int attn_dim = 512;
  double dropout = 0.5;
  bool use_history = true;  // false = ablated model
};

// One resolution instance: provider embeddings for the utterance plus the
// 6-candidate visual context. History vectors are the mean of the provider
// embeddings of the candidate's last prior mention.
struct ResInstance {
  Eigen::MatrixXd token_embeddings;  // (T x embed_dim)
  Eigen::VectorXd context_features;  // 6 * feature_dim
  std::vector<Eigen::VectorXd> candidate_features;          // 6 entries
  std::vector<std::optional<Eigen::VectorXd>> histories;    // 6 entries
  int target_pos = 0;
  bool is_first = true;  // first mention in its chain
};

struct Resolution {
  int predicted = 0;
  std::vector<int> ranking;      // candidate indices, best first
  std::vector<double> scores;    // dot products by candidate index
  bool tie = false;              // exact score tie, lowest index won
};

class ResolutionModel {
 public:
  ResolutionModel(const ResConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng = make_rng(seed);
    const int E = cfg.embed_dim;
    const int F = cfg.feature_dim;
    const int H = cfg.hidden_dim;
    const int A = cfg.attn_dim;
    tok_proj_ = nn::Linear::create(params_, "token.proj", E, H, rng);
    vctx_proj_ = nn::Linear::create(params_, "visual.context", 6 * F, H, rng);
    mm_proj_ = nn::Linear::create(params_, "multimodal.proj", 2 * H, H, rng);
    attn_We_ = nn::Linear::create(params_, "attn.We", H, A, rng);
    attn_va_ = nn::Linear::create(params_, "attn.va", A, 1, rng);
    cand_proj_ = nn::Linear::create(params_, "candidate.proj", F, H, rng);
    hist_proj_ = nn::Linear::create(params_, "history.proj", E, H, rng);
  }

  const ResConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  struct EncodedBatch {
    nn::Var utterance;              // h_L, (B x H)
    nn::Var attention;              // (B x T)
    std::vector<nn::Var> candidates;  // 6 entries, (B x H), unit rows
  };

  // Multimodal utterance encoding: each token embedding is projected, fused
  // with the visual-context vector, attention-pooled into h_L.
  EncodedBatch encode(const std::vector<ResInstance>& batch, bool train, Rng* rng) const {
    ensure(!batch.empty(), "encode: empty batch");
    const std::size_t b = batch.size();
    Eigen::Index max_t = 0;
    for (const auto& inst : batch) {
      require(inst.token_embeddings.cols() == cfg_.embed_dim,
              "resolution encode: provider dimension mismatch");
      require(inst.token_embeddings.rows() >= 1, "resolution encode: empty utterance");
      require(inst.candidate_features.size() == 6 && inst.context_features.size() ==
                  6 * cfg_.feature_dim,
              "resolution encode: expected exactly 6 candidates");
      max_t = std::max(max_t, inst.token_embeddings.rows());
    }

    nn::Mat ctx(static_cast<Eigen::Index>(b), 6 * cfg_.feature_dim);
    for (std::size_t i = 0; i < b; ++i)
      ctx.row(static_cast<Eigen::Index>(i)) = batch[i].context_features.transpose();
    nn::Var vctx = nn::relu(vctx_proj_(nn::dropout(nn::Var(ctx), cfg_.dropout, rng, train)));

    nn::Mat mask = nn::Mat::Zero(static_cast<Eigen::Index>(b), max_t);
    std::vector<nn::Var> token_vecs;
    std::vector<nn::Var> scores;
    for (Eigen::Index t = 0; t < max_t; ++t) {
      nn::Mat emb = nn::Mat::Zero(static_cast<Eigen::Index>(b), cfg_.embed_dim);
      for (std::size_t i = 0; i < b; ++i)
        if (t < batch[i].token_embeddings.rows()) {
          emb.row(static_cast<Eigen::Index>(i)) = batch[i].token_embeddings.row(t);
          mask(static_cast<Eigen::Index>(i), t) = 1.0;
        }
      nn::Var tok = nn::relu(tok_proj_(nn::dropout(nn::Var(emb), cfg_.dropout, rng, train)));
      nn::Var h = nn::relu(mm_proj_(nn::concat_cols({tok, vctx})));
      token_vecs.push_back(h);
      scores.push_back(attn_va_(nn::tanh_op(attn_We_(h))));
    }

    EncodedBatch out;
    out.attention = nn::masked_softmax(nn::concat_cols(scores), mask);
    out.utterance = nn::weighted_sum(out.attention, token_vecs);

    for (int j = 0; j < 6; ++j) {
      nn::Mat feats(static_cast<Eigen::Index>(b), cfg_.feature_dim);
      nn::Mat hist = nn::Mat::Zero(static_cast<Eigen::Index>(b), cfg_.embed_dim);
      nn::Mat flag = nn::Mat::Zero(static_cast<Eigen::Index>(b), 1);
      for (std::size_t i = 0; i < b; ++i) {
        require(batch[i].candidate_features[static_cast<std::size_t>(j)].size() ==
                    cfg_.feature_dim,
                "resolution encode: candidate feature size");
        feats.row(static_cast<Eigen::Index>(i)) =
            batch[i].candidate_features[static_cast<std::size_t>(j)].transpose();
        const auto& h = batch[i].histories[static_cast<std::size_t>(j)];
        if (cfg_.use_history && h.has_value()) {
          require(h->size() == cfg_.embed_dim, "resolution encode: history dimension");
          hist.row(static_cast<Eigen::Index>(i)) = h->transpose();
          flag(static_cast<Eigen::Index>(i), 0) = 1.0;
        }
      }
      nn::Var v = nn::relu(cand_proj_(nn::dropout(nn::Var(feats), cfg_.dropout, rng, train)));
      nn::Var hv = nn::relu(hist_proj_(nn::dropout(nn::Var(hist), cfg_.dropout, rng, train)));
      nn::Var cand = nn::add(v, nn::scale_rows(hv, nn::Var(flag)));
      out.candidates.push_back(nn::l2_normalize_rows(cand));
    }
    return out;
  }

  nn::Var scores(const EncodedBatch& enc) const {
    std::vector<nn::Var> per_candidate;
    for (const auto& cand : enc.candidates)
      per_candidate.push_back(nn::rows_dot(enc.utterance, cand));
    return nn::concat_cols(per_candidate);
  }

  nn::Var loss(const std::vector<ResInstance>& batch, bool train, Rng* rng) const {
    auto enc = encode(batch, train, rng);
    std::vector<int> targets;
    for (const auto& inst : batch) targets.push_back(inst.target_pos);
    return nn::cross_entropy_sum(scores(enc), targets);
  }

  // Argmax prediction with the full ranking; exact ties go to the lowest
  // index and are flagged.
  std::vector<Resolution> resolve(const std::vector<ResInstance>& batch) const {
    nn::NoGradGuard guard;
    auto enc = encode(batch, false, nullptr);
    nn::Mat s = scores(enc).value();
    std::vector<Resolution> out;
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      Resolution res;
      res.scores.assign(s.cols(), 0.0);
      res.ranking.resize(static_cast<std::size_t>(s.cols()));
      for (Eigen::Index c = 0; c < s.cols(); ++c) {
        res.scores[static_cast<std::size_t>(c)] = s(r, c);
        res.ranking[static_cast<std::size_t>(c)] = static_cast<int>(c);
      }
      std::stable_sort(res.ranking.begin(), res.ranking.end(), [&](int a, int c) {
        return res.scores[static_cast<std::size_t>(a)] > res.scores[static_cast<std::size_t>(c)];
      });
      res.predicted = res.ranking.front();
      for (std::size_t k = 1; k < res.ranking.size(); ++k)
        if (res.scores[static_cast<std::size_t>(res.ranking[k])] ==
            res.scores[static_cast<std::size_t>(res.predicted)])
          res.tie = true;
      out.push_back(std::move(res));
    }
    return out;
  }

  nlohmann::ordered_json checkpoint_header(std::uint64_t seed) const {
    nlohmann::ordered_json h;
    h["kind"] = "resolution";
    h["variant"] = cfg_.use_history ? "resolver" : "resolver-ablated";
    h["embed_dim"] = cfg_.embed_dim;
    h["feature_dim"] = cfg_.feature_dim;
    h["hidden_dim"] = cfg_.hidden_dim;
    h["attn_dim"] = cfg_.attn_dim;
    h["dropout"] = cfg_.dropout;
    h["seed"] = seed;
    return h;
  }

  static ResConfig config_from_header(const nlohmann::json& h) {
    ResConfig cfg;
    cfg.embed_dim = h.at("embed_dim").get<int>();
    cfg.feature_dim = h.at("feature_dim").get<int>();
    cfg.hidden_dim = h.at("hidden_dim").get<int>();
    cfg.attn_dim = h.at("attn_dim").get<int>();
    cfg.dropout = h.at("dropout").get<double>();
    cfg.use_history = h.at("variant").get<std::string>() == "resolver";
    return cfg;
  }

 private:
  ResConfig cfg_;
  nn::ParamStore params_;
  nn::Linear tok_proj_, vctx_proj_, mm_proj_;
  nn::Linear attn_We_, attn_va_;
  nn::Linear cand_proj_, hist_proj_;
};

// One-hot image-id baseline: ids are projected, normalized, then reduced to
// scalars; a softmax over the six scalars picks the target.
class OneHotBaseline {
 public:
  OneHotBaseline(std::vector<std::string> id_universe, int hidden_dim, double dropout,
                 std::uint64_t seed)
      : universe_(std::move(id_universe)), dropout_(dropout) {
    std::sort(universe_.begin(), universe_.end());
    universe_.erase(std::unique(universe_.begin(), universe_.end()), universe_.end());
    Rng rng = make_rng(seed);
    const int u = static_cast<int>(universe_.size());
    proj_ = nn::Linear::create(params_, "onehot.proj", u, hidden_dim, rng);
    score_ = nn::Linear::create(params_, "onehot.score", hidden_dim, 1, rng);
  }

  nn::ParamStore& params() { return params_; }
  int universe_size() const { return static_cast<int>(universe_.size()); }

  int index_of(const std::string& id) const {
    auto it = std::lower_bound(universe_.begin(), universe_.end(), id);
    require(it != universe_.end() && *it == id, "one-hot baseline: unknown image id " + id);
    return static_cast<int>(it - universe_.begin());
  }

  // contexts: per instance, 6 image ids.
  nn::Var scores(const std::vector<std::vector<std::string>>& contexts, bool train,
                 Rng* rng) const {
    const std::size_t b = contexts.size();
    std::vector<nn::Var> per_candidate;
    for (int j = 0; j < 6; ++j) {
      nn::Mat onehot = nn::Mat::Zero(static_cast<Eigen::Index>(b), universe_size());
      for (std::size_t i = 0; i < b; ++i) {
        require(contexts[i].size() == 6, "one-hot baseline: need 6 candidates");
        onehot(static_cast<Eigen::Index>(i), index_of(contexts[i][static_cast<std::size_t>(j)])) =
            1.0;
      }
      nn::Var h = nn::relu(proj_(nn::dropout(nn::Var(onehot), dropout_, rng, train)));
      per_candidate.push_back(score_(nn::l2_normalize_rows(h)));
    }
    return nn::concat_cols(per_candidate);
  }

  nn::Var loss(const std::vector<std::vector<std::string>>& contexts,
               const std::vector<int>& targets, bool train, Rng* rng) const {
    return nn::cross_entropy_sum(scores(contexts, train, rng), targets);
  }

  std::vector<int> predict(const std::vector<std::vector<std::string>>& contexts) const {
    nn::NoGradGuard guard;
    nn::Mat s = scores(contexts, false, nullptr).value();
    std::vector<int> out;
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      int best = 0;
      s.row(r).maxCoeff(&best);
      out.push_back(best);
    }
    return out;
  }

 private:
  std::vector<std::string> universe_;
  double dropout_;
  nn::ParamStore params_;
  nn::Linear proj_, score_;
};

}  // namespace refdial::res
