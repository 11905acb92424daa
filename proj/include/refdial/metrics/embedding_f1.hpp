#pragma once

#include <string>
#include <vector>

#include "refdial/corpus/similarity.hpp"
#include "refdial/embeddings.hpp"

namespace refdial::metrics {

// Chain-referenced embedding score: greedy token matching on cosine
// similarity aggregated as F1 against each reference in the chain, best
// reference wins. No idf weighting, no baseline rescaling.
inline double embedding_f1(const std::vector<std::string>& hypothesis,
                           const std::vector<std::vector<std::string>>& chain_references,
                           const EmbeddingProvider& provider) {
  require(!chain_references.empty(), "embedding_f1: empty reference set");
  if (hypothesis.empty()) return 0.0;
  Eigen::MatrixXd hyp = provider.embed(hypothesis);
  double best = 0.0;
  bool any = false;
  for (const auto& ref : chain_references) {
    if (ref.empty()) continue;
    any = true;
    best = std::max(best, corpus::greedy_match_f1(hyp, provider.embed(ref)));
  }
  require(any, "embedding_f1: all references empty");
  return best;
}

// Corpus mean on the 0-100 scale used by the reports.
inline double embedding_f1_corpus(const std::vector<std::vector<std::string>>& hypotheses,
                                  const std::vector<std::vector<std::vector<std::string>>>& refs,
                                  const EmbeddingProvider& provider) {
  require(!hypotheses.empty(), "embedding_f1_corpus: empty hypothesis set");
  require(hypotheses.size() == refs.size(), "embedding_f1_corpus: count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i)
    total += embedding_f1(hypotheses[i], refs[i], provider);
  return 100.0 * total / static_cast<double>(hypotheses.size());
}

}  // namespace refdial::metrics
