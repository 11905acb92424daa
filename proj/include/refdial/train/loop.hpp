#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "refdial/corpus/evaluate.hpp"
#include "refdial/data.hpp"
#include "refdial/gen/beam.hpp"
#include "refdial/metrics/embedding_f1.hpp"
#include "refdial/metrics/reports.hpp"
#include "refdial/nn/adam.hpp"
#include "refdial/train/config.hpp"

namespace refdial::train {

struct RunRecord {
  std::vector<double> train_losses;   // per epoch
  std::vector<double> val_metrics;    // per epoch, higher is better
  int best_epoch = -1;                // 0-based
  double best_metric = 0.0;
  double wall_seconds = 0.0;          // kept out of deterministic reports
  bool aborted = false;
  std::string abort_reason;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["train_losses"] = train_losses;
    j["val_metrics"] = val_metrics;
    j["best_epoch"] = best_epoch;
    j["best_metric"] = best_metric;
    j["aborted"] = aborted;
    if (aborted) j["abort_reason"] = abort_reason;
    return j;
  }
};

namespace detail {

// Epoch-deterministic instance order.
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  Rng rng = derive_rng(seed, 0x4f524452ULL, static_cast<std::uint64_t>(epoch));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> d(0, i - 1);
    std::swap(order[i - 1], order[d(rng)]);
  }
  return order;
}

template <typename Step>
bool run_epochs(const TrainConfig& cfg, RunRecord& record, nn::ParamStore& params,
                std::map<std::string, nn::Mat>& best, const Step& step) {
  nn::Adam opt(cfg.lr);
  opt.set_grad_clip(cfg.grad_clip);
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    double loss = 0.0;
    double metric = 0.0;
    try {
      std::tie(loss, metric) = step(epoch, opt);
    } catch (const ContractError& e) {
      record.aborted = true;
      record.abort_reason = e.what();
      return false;
    }
    if (!std::isfinite(loss)) {
      record.aborted = true;
      record.abort_reason = "non-finite training loss at epoch " + std::to_string(epoch);
      return false;
    }
    record.train_losses.push_back(loss);
    record.val_metrics.push_back(metric);
    if (record.best_epoch < 0 || metric > record.best_metric) {
      record.best_epoch = epoch;
      record.best_metric = metric;
      best = params.snapshot();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return true;
}

}  // namespace detail

// Decodes one instance and maps extended-domain ids back to surface forms;
// copied OOV ids resolve through the instance's extension table.
inline std::vector<std::string> decode_tokens(const gen::GenerationModel& model,
                                              const text::ModelInstance& inst,
                                              const text::Vocabulary& vocab,
                                              const FeatureStore& features, int width,
                                              int max_len) {
  auto g = make_gen_instance(inst, vocab, features);
  auto ext = text::extend_for_copy(inst.source_tokens, vocab);
  std::vector<int> ids;
  if (width <= 1) {
    ids = model.greedy_decode(g, max_len).tokens;
  } else {
    gen::GenerationModel::DecodeSession session(model, g);
    ids = gen::beam_search(session, width, max_len).tokens;
  }
  std::vector<std::string> tokens;
  for (int id : ids) tokens.push_back(ext.ext.extended_token(id));
  return tokens;
}

// Generation training: teacher forcing with sum-reduced loss; validation by
// decoding and scoring each utterance against its chain references with the
// greedy-matching embedding F1.
inline RunRecord train_generation(gen::GenerationModel& model, const TrainConfig& cfg,
                                  const std::vector<text::ModelInstance>& train_set,
                                  const std::vector<text::ModelInstance>& val_set,
                                  const text::Vocabulary& vocab, const FeatureStore& features,
                                  const EmbeddingProvider& metric_provider) {
  require(!train_set.empty() && !val_set.empty(), "train_generation: empty split");
  auto start = std::chrono::steady_clock::now();
  std::vector<gen::GenInstance> train_enc;
  for (const auto& inst : train_set) train_enc.push_back(make_gen_instance(inst, vocab, features));

  Rng dropout_rng = derive_rng(cfg.seed, 0x44524f50ULL);
  RunRecord record;
  std::map<std::string, nn::Mat> best;

  auto step = [&](int epoch, nn::Adam& opt) {
    auto order = detail::epoch_order(train_enc.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<gen::GenInstance> batch;
      for (std::size_t k = off; k < std::min(order.size(), off + static_cast<std::size_t>(cfg.batch_size)); ++k)
        batch.push_back(train_enc[order[k]]);
      model.params().zero_grads();
      auto res = model.teacher_forced_loss(batch, true, &dropout_rng);
      nn::backward(res.loss);
      opt.step(model.params());
      loss_sum += res.loss.value()(0, 0);
    }
    double metric_sum = 0.0;
    for (const auto& inst : val_set) {
      auto tokens = decode_tokens(model, inst, vocab, features, cfg.eval_beam_width,
                                  cfg.max_decode_len);
      metric_sum += tokens.empty() || inst.chain_refs.empty()
                        ? 0.0
                        : metrics::embedding_f1(tokens, inst.chain_refs, metric_provider);
    }
    return std::make_pair(loss_sum, 100.0 * metric_sum / static_cast<double>(val_set.size()));
  };

  detail::run_epochs(cfg, record, model.params(), best, step);
  if (!best.empty()) model.params().restore(best);
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

// Resolution training: candidate contexts are reshuffled at the start of
// every epoch for all splits; accuracy on the validation split selects the
// checkpoint.
inline RunRecord train_resolution(res::ResolutionModel& model, const TrainConfig& cfg,
                                  std::vector<text::ModelInstance> train_set,
                                  std::vector<text::ModelInstance> val_set,
                                  const EmbeddingProvider& provider,
                                  const FeatureStore& features) {
  require(!train_set.empty() && !val_set.empty(), "train_resolution: empty split");
  auto start = std::chrono::steady_clock::now();
  Rng dropout_rng = derive_rng(cfg.seed, 0x44524f51ULL);
  RunRecord record;
  std::map<std::string, nn::Mat> best;

  auto step = [&](int epoch, nn::Adam& opt) {
    text::shuffle_contexts(train_set, cfg.seed, static_cast<std::uint64_t>(epoch));
    text::shuffle_contexts(val_set, cfg.seed, static_cast<std::uint64_t>(epoch) + 0x80000000ULL);
    std::vector<res::ResInstance> train_enc;
    for (const auto& inst : train_set)
      train_enc.push_back(make_res_instance(inst, provider, features));

    auto order = detail::epoch_order(train_enc.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<res::ResInstance> batch;
      for (std::size_t k = off; k < std::min(order.size(), off + static_cast<std::size_t>(cfg.batch_size)); ++k)
        batch.push_back(train_enc[order[k]]);
      model.params().zero_grads();
      nn::Var loss = model.loss(batch, true, &dropout_rng);
      nn::backward(loss);
      opt.step(model.params());
      loss_sum += loss.value()(0, 0);
    }
    std::vector<res::ResInstance> val_enc;
    for (const auto& inst : val_set) val_enc.push_back(make_res_instance(inst, provider, features));
    auto res = model.resolve(val_enc);
    double correct = 0.0;
    for (std::size_t i = 0; i < res.size(); ++i)
      correct += res[i].predicted == val_enc[i].target_pos ? 1.0 : 0.0;
    return std::make_pair(loss_sum, 100.0 * correct / static_cast<double>(val_enc.size()));
  };

  detail::run_epochs(cfg, record, model.params(), best, step);
  if (!best.empty()) model.params().restore(best);
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

// One-hot baseline training over image-id contexts.
inline RunRecord train_onehot_baseline(res::OneHotBaseline& model, const TrainConfig& cfg,
                                       std::vector<text::ModelInstance> train_set,
                                       std::vector<text::ModelInstance> val_set) {
  require(!train_set.empty() && !val_set.empty(), "train_onehot_baseline: empty split");
  auto start = std::chrono::steady_clock::now();
  Rng dropout_rng = derive_rng(cfg.seed, 0x44524f52ULL);
  RunRecord record;
  std::map<std::string, nn::Mat> best;

  auto contexts_of = [](const std::vector<text::ModelInstance>& set) {
    std::vector<std::vector<std::string>> ctx;
    std::vector<int> tgt;
    for (const auto& inst : set) {
      ctx.push_back(inst.context_ids);
      tgt.push_back(inst.target_pos);
    }
    return std::make_pair(ctx, tgt);
  };

  auto step = [&](int epoch, nn::Adam& opt) {
    text::shuffle_contexts(train_set, cfg.seed, static_cast<std::uint64_t>(epoch));
    text::shuffle_contexts(val_set, cfg.seed, static_cast<std::uint64_t>(epoch) + 0x80000000ULL);
    auto [train_ctx, train_tgt] = contexts_of(train_set);
    auto order = detail::epoch_order(train_ctx.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<std::vector<std::string>> ctx;
      std::vector<int> tgt;
      for (std::size_t k = off; k < std::min(order.size(), off + static_cast<std::size_t>(cfg.batch_size)); ++k) {
        ctx.push_back(train_ctx[order[k]]);
        tgt.push_back(train_tgt[order[k]]);
      }
      model.params().zero_grads();
      nn::Var loss = model.loss(ctx, tgt, true, &dropout_rng);
      nn::backward(loss);
      opt.step(model.params());
      loss_sum += loss.value()(0, 0);
    }
    auto [val_ctx, val_tgt] = contexts_of(val_set);
    auto preds = model.predict(val_ctx);
    double correct = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      correct += preds[i] == val_tgt[i] ? 1.0 : 0.0;
    return std::make_pair(loss_sum, 100.0 * correct / static_cast<double>(preds.size()));
  };

  detail::run_epochs(cfg, record, model.params(), best, step);
  if (!best.empty()) model.params().restore(best);
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

// Mean and sample standard deviation of each metric over per-seed runs.
struct MultiseedReport {
  std::vector<std::uint64_t> seeds;
  std::vector<std::map<std::string, double>> per_seed;
  std::map<std::string, corpus::MeanSd> aggregate;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["seeds"] = seeds;
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& m : per_seed) runs.push_back(m);
    j["per_seed"] = runs;
    nlohmann::ordered_json agg = nlohmann::ordered_json::object();
    for (const auto& [name, ms] : aggregate) {
      agg[name] = {{"mean", ms.mean}, {"sd", ms.sd}, {"formatted", metrics::format_mean_sd(ms)}};
    }
    j["aggregate"] = agg;
    return j;
  }
};

inline MultiseedReport multiseed(
    const std::vector<std::uint64_t>& seeds,
    const std::function<std::map<std::string, double>(std::uint64_t)>& run) {
  require(seeds.size() >= 2, "multiseed: need at least 2 seeds");
  MultiseedReport report;
  report.seeds = seeds;
  for (auto seed : seeds) report.per_seed.push_back(run(seed));
  std::map<std::string, std::vector<double>> columns;
  for (const auto& m : report.per_seed)
    for (const auto& [name, value] : m) columns[name].push_back(value);
  for (const auto& [name, values] : columns) report.aggregate[name] = corpus::mean_sd(values);
  return report;
}

}  // namespace refdial::train
