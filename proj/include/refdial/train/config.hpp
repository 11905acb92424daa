#pragma once

#include <string>

#include <json.hpp>

#include "refdial/common.hpp"

namespace refdial::train {

// Variant defaults: generation runs at lr 1e-4 with 1024-dim embeddings and
// 512-dim hidden/attention layers; Ref and Copy use batch 32, ReRef batch 16;
// dropout 0.3 for Ref/ReRef and 0 for Copy. Resolution runs at batch 32,
// lr 1e-4, 512-dim hidden/attention, dropout 0.5.
struct TrainConfig {
  std::string variant;  // ref | reref | copy | resolver | resolver-ablated | baseline-onehot
  int batch_size = 32;
  double lr = 1e-4;
  int embed_dim = 1024;    // generation embeddings
  int provider_dim = 768;  // resolver token-embedding provider
  int hidden_dim = 512;
  int attn_dim = 512;
  int feature_dim = 2048;
  double dropout = 0.3;
  int max_epochs = 100;
  int patience = 50;
  std::uint64_t seed = 1;
  std::string selection_metric;  // embedding_f1 (generation) | accuracy (resolution)
  double grad_clip = 0.0;        // 0 disables clipping
  int eval_beam_width = 1;       // in-training validation decoding width
  int max_decode_len = 30;

  bool is_generation() const {
    return variant == "ref" || variant == "reref" || variant == "copy";
  }

  static TrainConfig defaults_for(const std::string& variant) {
    TrainConfig c;
    c.variant = variant;
    if (variant == "ref" || variant == "copy") {
      c.batch_size = 32;
      c.dropout = variant == "copy" ? 0.0 : 0.3;
      c.selection_metric = "embedding_f1";
    } else if (variant == "reref") {
      c.batch_size = 16;
      c.dropout = 0.3;
      c.selection_metric = "embedding_f1";
    } else if (variant == "resolver" || variant == "resolver-ablated" ||
               variant == "baseline-onehot") {
      c.batch_size = 32;
      c.dropout = 0.5;
      c.selection_metric = "accuracy";
    } else {
      throw InputError("unknown training variant: " + variant);
    }
    return c;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["variant"] = variant;
    j["batch_size"] = batch_size;
    j["lr"] = lr;
    j["embed_dim"] = embed_dim;
    j["provider_dim"] = provider_dim;
    j["hidden_dim"] = hidden_dim;
    j["attn_dim"] = attn_dim;
    j["feature_dim"] = feature_dim;
    j["dropout"] = dropout;
    j["max_epochs"] = max_epochs;
    j["patience"] = patience;
    j["seed"] = seed;
    j["selection_metric"] = selection_metric;
    j["grad_clip"] = grad_clip;
    j["eval_beam_width"] = eval_beam_width;
    j["max_decode_len"] = max_decode_len;
    return j;
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c = defaults_for(j.at("variant").get<std::string>());
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.provider_dim = j.value("provider_dim", c.provider_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.attn_dim = j.value("attn_dim", c.attn_dim);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.dropout = j.value("dropout", c.dropout);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.selection_metric = j.value("selection_metric", c.selection_metric);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.eval_beam_width = j.value("eval_beam_width", c.eval_beam_width);
    c.max_decode_len = j.value("max_decode_len", c.max_decode_len);
    require(c.batch_size >= 1 && c.max_epochs >= 1 && c.patience >= 0,
            "train config: bad batch size, epochs, or patience");
    return c;
  }
};

}  // namespace refdial::train
