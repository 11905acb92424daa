#pragma once

#include <Eigen/Dense>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "refdial/common.hpp"
#include "refdial/embeddings.hpp"
#include "refdial/gen/model.hpp"
#include "refdial/res/model.hpp"
#include "refdial/text/encode.hpp"
#include "refdial/text/tokenizer.hpp"

namespace refdial {

// Image-feature file: one line per image, "image_id v1 v2 ... vD".
class FeatureStore {
 public:
  static FeatureStore load(const std::string& path, int expected_dim = -1) {
    FeatureStore fs;
    for (const auto& line : split_lines(read_file(path))) {
      if (line.empty()) continue;
      std::istringstream in(line);
      std::string id;
      in >> id;
      std::vector<double> vals;
      double v = 0.0;
      while (in >> v) vals.push_back(v);
      require(!id.empty() && !vals.empty(), "feature file: bad line in " + path);
      if (fs.dim_ < 0) fs.dim_ = static_cast<int>(vals.size());
      require(static_cast<int>(vals.size()) == fs.dim_,
              "feature file: inconsistent dimension for image " + id);
      Eigen::VectorXd vec(fs.dim_);
      for (int i = 0; i < fs.dim_; ++i) vec(i) = vals[static_cast<std::size_t>(i)];
      fs.features_.emplace(id, std::move(vec));
    }
    require(fs.dim_ > 0, "feature file: empty " + path);
    if (expected_dim > 0)
      require(fs.dim_ == expected_dim, "feature file: dimension " + std::to_string(fs.dim_) +
                                           " does not match configured " +
                                           std::to_string(expected_dim));
    return fs;
  }

  int dim() const { return dim_; }

  const Eigen::VectorXd& get(const std::string& id) const {
    auto it = features_.find(id);
    require(it != features_.end(), "no features for image " + id);
    return it->second;
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [id, v] : features_) out.push_back(id);
    return out;
  }

 private:
  int dim_ = -1;
  std::map<std::string, Eigen::VectorXd> features_;
};

// Cache keys are "<game>:<message>"; the utterance id convention shared by
// the embedding cache file and the resolver.
inline std::string utterance_key(const std::string& game_id, int message_id) {
  return game_id + ":" + std::to_string(message_id);
}

inline gen::GenInstance make_gen_instance(const text::ModelInstance& inst,
                                          const text::Vocabulary& vocab,
                                          const FeatureStore& features) {
  require(inst.context_ids.size() == 6, "instance " + inst.game_id + ": need 6 context images");
  auto enc = text::encode_instance(inst, vocab);
  gen::GenInstance g;
  g.source = std::move(enc.source);
  g.source_extended = std::move(enc.source_extended);
  g.extra_count = static_cast<int>(enc.ext.extra.size());
  g.target_in = std::move(enc.target_in);
  g.target_out = std::move(enc.target_out);
  g.target_out_extended = std::move(enc.target_out_extended);
  const int f = features.dim();
  g.context_features = Eigen::VectorXd(6 * f);
  for (int j = 0; j < 6; ++j)
    g.context_features.segment(j * f, f) = features.get(inst.context_ids[static_cast<std::size_t>(j)]);
  g.target_features = features.get(inst.context_ids[static_cast<std::size_t>(inst.target_pos)]);
  return g;
}

// History vectors are the mean of the provider embeddings of the candidate's
// last prior mention.
inline res::ResInstance make_res_instance(const text::ModelInstance& inst,
                                          const EmbeddingProvider& provider,
                                          const FeatureStore& features,
                                          const std::vector<std::string>* utterance_override =
                                              nullptr) {
  require(inst.context_ids.size() == 6, "instance " + inst.game_id + ": need 6 context images");
  res::ResInstance r;
  const std::vector<std::string>& tokens =
      utterance_override != nullptr ? *utterance_override : inst.target_tokens;
  require(!tokens.empty(), "resolution instance " + inst.game_id + ":" +
                               std::to_string(inst.message_id) + " has an empty utterance");
  r.token_embeddings = provider.embed(tokens, utterance_key(inst.game_id, inst.message_id));
  const int f = features.dim();
  r.context_features = Eigen::VectorXd(6 * f);
  for (int j = 0; j < 6; ++j) {
    const auto& id = inst.context_ids[static_cast<std::size_t>(j)];
    r.context_features.segment(j * f, f) = features.get(id);
    r.candidate_features.push_back(features.get(id));
  }
  r.histories.assign(6, std::nullopt);
  for (std::size_t j = 0; j < inst.candidate_histories.size(); ++j) {
    const auto& h = inst.candidate_histories[j];
    if (!h) continue;
    auto toks = text::tokenize(h->text);
    if (toks.empty()) continue;
    Eigen::MatrixXd emb = provider.embed(toks, utterance_key(inst.game_id, h->message_id));
    r.histories[j] = emb.colwise().mean().transpose();
  }
  r.target_pos = inst.target_pos;
  r.is_first = inst.is_first();
  return r;
}

// ---------------------------------------------------------------------------
// Model-instance dataset files: line-delimited JSON with explicit index
// fields, one instance per line.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json instance_to_json(const text::ModelInstance& inst) {
  nlohmann::ordered_json j;
  j["game_id"] = inst.game_id;
  j["image_id"] = inst.image_id;
  j["round_index"] = inst.round_index;
  j["message_id"] = inst.message_id;
  j["chain_position"] = inst.chain_position;
  j["split"] = inst.split;
  j["source_tokens"] = inst.source_tokens;
  j["target_tokens"] = inst.target_tokens;
  j["context_ids"] = inst.context_ids;
  j["target_pos"] = inst.target_pos;
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& h : inst.candidate_histories) {
    if (h)
      hist.push_back({{"text", h->text}, {"message_id", h->message_id}});
    else
      hist.push_back(nullptr);
  }
  j["candidate_histories"] = hist;
  j["chain_refs"] = inst.chain_refs;
  return j;
}

inline text::ModelInstance instance_from_json(const nlohmann::json& j) {
  text::ModelInstance inst;
  inst.game_id = j.at("game_id").get<std::string>();
  inst.image_id = j.at("image_id").get<std::string>();
  inst.round_index = j.at("round_index").get<int>();
  inst.message_id = j.at("message_id").get<int>();
  inst.chain_position = j.at("chain_position").get<int>();
  inst.split = j.value("split", std::string());
  inst.source_tokens = j.at("source_tokens").get<std::vector<std::string>>();
  inst.target_tokens = j.at("target_tokens").get<std::vector<std::string>>();
  inst.context_ids = j.at("context_ids").get<std::vector<std::string>>();
  inst.target_pos = j.at("target_pos").get<int>();
  for (const auto& h : j.value("candidate_histories", nlohmann::json::array())) {
    if (h.is_null())
      inst.candidate_histories.push_back(std::nullopt);
    else
      inst.candidate_histories.push_back(
          text::CandidateHistory{h.at("text").get<std::string>(), h.at("message_id").get<int>()});
  }
  for (const auto& r : j.value("chain_refs", nlohmann::json::array()))
    inst.chain_refs.push_back(r.get<std::vector<std::string>>());
  return inst;
}

inline std::string instances_to_jsonl(const std::vector<text::ModelInstance>& instances) {
  std::string out;
  for (const auto& inst : instances) {
    out += instance_to_json(inst).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<text::ModelInstance> instances_from_jsonl(const std::string& content) {
  std::vector<text::ModelInstance> out;
  for (const auto& line : split_lines(content)) {
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.contains("__meta__")) continue;  // provenance header line
      out.push_back(instance_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("bad instance record: ") + e.what());
    }
  }
  return out;
}

inline std::vector<text::ModelInstance> load_instances(const std::string& path) {
  return instances_from_jsonl(read_file(path));
}

}  // namespace refdial
