#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "refdial/corpus/extract.hpp"
#include "refdial/text/tokenizer.hpp"

namespace refdial::corpus {

struct ExtractionEval {
  std::optional<double> precision;  // null when nothing was extracted
  std::optional<double> recall;     // null when the gold set is empty
  int extracted_links = 0;
  int gold_links = 0;
  int correct_links = 0;
  std::vector<std::string> warnings;
};

// Links are (game, message, image) triples; message ids are unique per game.
inline ExtractionEval evaluate_extraction(const std::vector<ReferenceChain>& extracted,
                                          const std::vector<ReferenceChain>& gold) {
  using Link = std::tuple<std::string, int, std::string>;
  auto links_of = [](const std::vector<ReferenceChain>& chains) {
    std::set<Link> links;
    for (const auto& c : chains)
      for (const auto& e : c.entries) links.insert({c.game_id, e.message_id, c.image_id});
    return links;
  };
  auto ex = links_of(extracted);
  auto gd = links_of(gold);
  ExtractionEval ev;
  ev.extracted_links = static_cast<int>(ex.size());
  ev.gold_links = static_cast<int>(gd.size());
  for (const auto& l : ex) ev.correct_links += gd.count(l) > 0 ? 1 : 0;
  if (ex.empty())
    ev.warnings.push_back("no extracted links; precision undefined");
  else
    ev.precision = static_cast<double>(ev.correct_links) / static_cast<double>(ex.size());
  if (gd.empty())
    ev.warnings.push_back("no gold links; recall undefined");
  else
    ev.recall = static_cast<double>(ev.correct_links) / static_cast<double>(gd.size());
  return ev;
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  int n = 0;
};

inline MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd m;
  m.n = static_cast<int>(xs.size());
  if (xs.empty()) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double sq = 0.0;
    for (double x : xs) sq += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(sq / static_cast<double>(xs.size() - 1));
  }
  return m;
}

struct ChainStats {
  int num_chains = 0;
  int num_utterances = 0;
  MeanSd first_length;           // token lengths of first mentions
  MeanSd later_length;           // token lengths of subsequent mentions
  std::map<int, int> chain_length_histogram;
  double median_chain_length = 0.0;
};

inline ChainStats chain_statistics(const std::vector<ReferenceChain>& chains) {
  require(!chains.empty(), "chain_statistics: empty chain set");
  ChainStats st;
  std::vector<double> first_lens;
  std::vector<double> later_lens;
  std::vector<int> chain_lens;
  for (const auto& c : chains) {
    ++st.num_chains;
    chain_lens.push_back(static_cast<int>(c.entries.size()));
    ++st.chain_length_histogram[static_cast<int>(c.entries.size())];
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
      ++st.num_utterances;
      double len = static_cast<double>(text::tokenize(c.entries[i].text).size());
      (i == 0 ? first_lens : later_lens).push_back(len);
    }
  }
  st.first_length = mean_sd(first_lens);
  st.later_length = mean_sd(later_lens);
  std::sort(chain_lens.begin(), chain_lens.end());
  std::size_t n = chain_lens.size();
  st.median_chain_length = n % 2 == 1
                               ? chain_lens[n / 2]
                               : (chain_lens[n / 2 - 1] + chain_lens[n / 2]) / 2.0;
  return st;
}

}  // namespace refdial::corpus
