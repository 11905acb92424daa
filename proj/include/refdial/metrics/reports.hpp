#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "refdial/corpus/evaluate.hpp"
#include "refdial/metrics/embedding_f1.hpp"
#include "refdial/metrics/ngram.hpp"
#include "refdial/metrics/ranking.hpp"
#include "refdial/text/stopwords.hpp"

namespace refdial::metrics {

// One generated utterance with everything needed to score it.
struct GenEvalInstance {
  std::string game_id;
  std::string image_id;
  int message_id = 0;
  int chain_position = 1;
  std::vector<std::string> hypothesis;              // generated tokens
  std::vector<std::string> gold;                    // the human utterance
  std::vector<std::vector<std::string>> chain_refs; // all utterances in the chain
  std::optional<RankedInstance> resolution;         // resolver ranking of the hypothesis

  bool is_first() const { return chain_position == 1; }
};

struct SubsetScores {
  int count = 0;
  double bleu2 = 0.0;
  double rouge = 0.0;
  double cider = 0.0;
  double embedding_f1 = 0.0;
  std::optional<AccuracyMrr> resolution;
};

struct MetricReport {
  SubsetScores first;
  SubsetScores later;
  SubsetScores overall;
};

inline SubsetScores score_subset(const std::vector<const GenEvalInstance*>& subset,
                                 const EmbeddingProvider& provider) {
  SubsetScores s;
  s.count = static_cast<int>(subset.size());
  if (subset.empty()) return s;
  std::vector<Tokens> hyps;
  std::vector<std::vector<Tokens>> refs;
  std::vector<std::vector<Tokens>> chain_refs;
  std::vector<RankedInstance> rankings;
  bool all_ranked = true;
  for (const auto* inst : subset) {
    hyps.push_back(inst->hypothesis);
    refs.push_back({inst->gold});
    chain_refs.push_back(inst->chain_refs);
    if (inst->resolution)
      rankings.push_back(*inst->resolution);
    else
      all_ranked = false;
  }
  s.bleu2 = bleu2(hyps, refs);
  s.rouge = rouge_l(hyps, refs);
  s.cider = 10.0 * cider(hyps, refs);  // report convention: native 0-10 scaled by 10
  s.embedding_f1 = embedding_f1_corpus(hyps, chain_refs, provider);
  if (all_ranked && !rankings.empty()) s.resolution = accuracy_mrr(rankings);
  return s;
}

// First / Later split is by chain position: position 1 vs everything later.
inline MetricReport metric_report(const std::vector<GenEvalInstance>& instances,
                                  const EmbeddingProvider& provider) {
  require(!instances.empty(), "metric_report: no instances");
  std::vector<const GenEvalInstance*> first, later, overall;
  for (const auto& inst : instances) {
    overall.push_back(&inst);
    (inst.is_first() ? first : later).push_back(&inst);
  }
  MetricReport r;
  r.first = score_subset(first, provider);
  r.later = score_subset(later, provider);
  r.overall = score_subset(overall, provider);
  ensure(r.first.count + r.later.count == r.overall.count, "metric_report: subset counts");
  return r;
}

// Replaces every later mention with the chain's first generated utterance.
// Chains without a first-position generation are skipped with a warning.
struct VerbatimBaseline {
  std::vector<GenEvalInstance> later_instances;
  std::vector<std::string> warnings;
};

inline VerbatimBaseline verbatim_baseline(const std::vector<GenEvalInstance>& instances) {
  std::map<std::pair<std::string, std::string>, const GenEvalInstance*> firsts;
  for (const auto& inst : instances)
    if (inst.is_first()) firsts[{inst.game_id, inst.image_id}] = &inst;
  VerbatimBaseline out;
  for (const auto& inst : instances) {
    if (inst.is_first()) continue;
    auto it = firsts.find({inst.game_id, inst.image_id});
    if (it == firsts.end()) {
      out.warnings.push_back("chain " + inst.game_id + "/" + inst.image_id +
                             " lacks a first generation; skipped");
      continue;
    }
    GenEvalInstance copy = inst;
    copy.hypothesis = it->second->hypothesis;
    copy.resolution.reset();  // rankings must be recomputed on the new text
    out.later_instances.push_back(std::move(copy));
  }
  return out;
}

struct RepetitionVocab {
  double repeat_rate = 0.0;  // fraction of utterances with a duplicated content word
  int vocab_size = 0;        // distinct tokens across all utterances
};

inline RepetitionVocab repetition_and_vocab(const std::vector<Tokens>& hypotheses) {
  RepetitionVocab out;
  if (hypotheses.empty()) return out;
  std::set<std::string> vocab;
  int repeating = 0;
  for (const auto& hyp : hypotheses) {
    std::map<std::string, int> content_counts;
    for (const auto& tok : hyp) {
      vocab.insert(tok);
      if (!text::is_stopword(tok)) ++content_counts[tok];
    }
    bool repeats = false;
    for (const auto& [tok, c] : content_counts) repeats = repeats || c >= 2;
    repeating += repeats ? 1 : 0;
  }
  out.repeat_rate = static_cast<double>(repeating) / static_cast<double>(hypotheses.size());
  out.vocab_size = static_cast<int>(vocab.size());
  return out;
}

inline std::string format_mean_sd(const corpus::MeanSd& m, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f (%.*f)", precision, m.mean, precision, m.sd);
  return buf;
}

inline nlohmann::ordered_json subset_to_json(const SubsetScores& s) {
  nlohmann::ordered_json j;
  j["count"] = s.count;
  j["bleu2"] = s.bleu2;
  j["rouge"] = s.rouge;
  j["cider"] = s.cider;
  j["embedding_f1"] = s.embedding_f1;
  if (s.resolution) {
    j["accuracy"] = s.resolution->accuracy;
    j["mrr"] = s.resolution->mrr;
  }
  return j;
}

inline nlohmann::ordered_json report_to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["first"] = subset_to_json(r.first);
  j["later"] = subset_to_json(r.later);
  j["overall"] = subset_to_json(r.overall);
  return j;
}

}  // namespace refdial::metrics
