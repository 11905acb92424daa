#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "refdial/ling/postag.hpp"
#include "refdial/text/stopwords.hpp"

namespace refdial::ling {

// Marker sets. "seen" is the anaphoric subset of the givenness markers.
inline const std::set<std::string>& givenness_markers() {
  static const std::set<std::string> m = {"the", "one", "same", "again", "also", "before"};
  return m;
}
inline const std::set<std::string>& seen_markers() {
  static const std::set<std::string> m = {"again", "before", "one", "same", "also"};
  return m;
}
inline const std::set<std::string>& indefinite_markers() {
  static const std::set<std::string> m = {"some", "a", "an"};
  return m;
}

struct LinguisticProfile {
  double givenness_prop = 0.0;
  double definite_prop = 0.0;
  double seen_prop = 0.0;
  double indefinite_prop = 0.0;
  int length_tokens = 0;
  int length_content = 0;
  double content_prop = 0.0;
  double noun_prop = 0.0;  // share of content tokens
  double adj_prop = 0.0;
  double verb_prop = 0.0;
  double ttr = 0.0;  // distinct / total tokens
  int chain_position = 1;
  bool empty = false;
};

// Marker proportions are over all tokens; part-of-speech proportions are over
// content (non-stopword) tokens.
inline LinguisticProfile profile(const std::vector<std::string>& tokens,
                                 const std::vector<Pos>& tags, int chain_position = 1) {
  ensure(tokens.size() == tags.size(), "profile: tokens/tags size mismatch");
  LinguisticProfile p;
  p.chain_position = chain_position;
  if (tokens.empty()) {
    p.empty = true;
    return p;
  }
  p.length_tokens = static_cast<int>(tokens.size());
  double n = static_cast<double>(tokens.size());
  int nouns = 0, adjs = 0, verbs = 0;
  std::set<std::string> types;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = tokens[i];
    types.insert(tok);
    if (givenness_markers().count(tok)) p.givenness_prop += 1.0;
    if (tok == "the") p.definite_prop += 1.0;
    if (seen_markers().count(tok)) p.seen_prop += 1.0;
    if (indefinite_markers().count(tok)) p.indefinite_prop += 1.0;
    if (!text::is_stopword(tok)) {
      ++p.length_content;
      if (tags[i] == Pos::kNoun) ++nouns;
      if (tags[i] == Pos::kAdj) ++adjs;
      if (tags[i] == Pos::kVerb) ++verbs;
    }
  }
  p.givenness_prop /= n;
  p.definite_prop /= n;
  p.seen_prop /= n;
  p.indefinite_prop /= n;
  p.content_prop = p.length_content / n;
  if (p.length_content > 0) {
    p.noun_prop = static_cast<double>(nouns) / p.length_content;
    p.adj_prop = static_cast<double>(adjs) / p.length_content;
    p.verb_prop = static_cast<double>(verbs) / p.length_content;
  }
  p.ttr = static_cast<double>(types.size()) / n;
  return p;
}

struct ReuseProfile {
  double reuse_unigrams = 0.0;       // content-unigram reuse proportion
  double reuse_bigrams = 0.0;        // content-bigram reuse proportion
  double within_noun = 0.0;          // shares within the reused unigrams
  double within_adj = 0.0;
  double within_verb = 0.0;
  double within_nn_bigrams = 0.0;    // noun-noun share within reused bigrams
  bool has_bigrams = false;
};

namespace detail {

struct ContentToken {
  std::string tok;
  Pos pos;
};

inline std::vector<ContentToken> content_with_tags(const std::vector<std::string>& tokens,
                                                   const std::vector<Pos>& tags) {
  std::vector<ContentToken> out;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (!text::is_stopword(tokens[i])) out.push_back({tokens[i], tags[i]});
  return out;
}

}  // namespace detail

// Lexical entrainment of the current mention with respect to the previous
// one. Reuse counts multiset overlap of content tokens, position-counted on
// the current side; bigrams are formed over the content-token subsequence.
// Undefined (nullopt) when the current utterance has no content tokens.
inline std::optional<ReuseProfile> reuse(const std::vector<std::string>& prev_tokens,
                                         const std::vector<Pos>& prev_tags,
                                         const std::vector<std::string>& cur_tokens,
                                         const std::vector<Pos>& cur_tags) {
  auto prev = detail::content_with_tags(prev_tokens, prev_tags);
  auto cur = detail::content_with_tags(cur_tokens, cur_tags);
  if (cur.empty()) return std::nullopt;

  ReuseProfile r;
  std::map<std::string, int> prev_counts;
  for (const auto& c : prev) ++prev_counts[c.tok];
  int reused = 0, noun = 0, adj = 0, verb = 0;
  std::map<std::string, int> budget = prev_counts;
  for (const auto& c : cur) {
    auto it = budget.find(c.tok);
    if (it == budget.end() || it->second == 0) continue;
    --it->second;
    ++reused;
    if (c.pos == Pos::kNoun) ++noun;
    if (c.pos == Pos::kAdj) ++adj;
    if (c.pos == Pos::kVerb) ++verb;
  }
  r.reuse_unigrams = static_cast<double>(reused) / static_cast<double>(cur.size());
  if (reused > 0) {
    r.within_noun = static_cast<double>(noun) / reused;
    r.within_adj = static_cast<double>(adj) / reused;
    r.within_verb = static_cast<double>(verb) / reused;
  }

  if (cur.size() >= 2) {
    r.has_bigrams = true;
    std::map<std::pair<std::string, std::string>, int> prev_bigrams;
    for (std::size_t i = 0; i + 1 < prev.size(); ++i)
      ++prev_bigrams[{prev[i].tok, prev[i + 1].tok}];
    int reused_bi = 0, nn = 0;
    auto bi_budget = prev_bigrams;
    for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
      auto key = std::make_pair(cur[i].tok, cur[i + 1].tok);
      auto it = bi_budget.find(key);
      if (it == bi_budget.end() || it->second == 0) continue;
      --it->second;
      ++reused_bi;
      if (cur[i].pos == Pos::kNoun && cur[i + 1].pos == Pos::kNoun) ++nn;
    }
    r.reuse_bigrams = static_cast<double>(reused_bi) / static_cast<double>(cur.size() - 1);
    if (reused_bi > 0) r.within_nn_bigrams = static_cast<double>(nn) / reused_bi;
  }
  return r;
}

// Noun-noun compound screening: adjacent noun-noun pairs over the raw token
// sequence, plus flagged short-utterance candidates split into reuse
// (both nouns appear in the previous mention) and non-reuse cases.
struct CompoundCandidate {
  std::size_t utterance_index = 0;
  std::string first_noun;
  std::string second_noun;
  bool reuse_case = false;  // both nouns present in the previous mention
};

struct CompoundReport {
  std::vector<double> nn_bigram_props;  // per utterance
  std::vector<CompoundCandidate> candidates;
};

struct TaggedUtterance {
  std::vector<std::string> tokens;
  std::vector<Pos> tags;
  std::vector<std::string> prev_tokens;  // empty for first mentions
  int chain_position = 1;
};

inline CompoundReport nn_compounds(const std::vector<TaggedUtterance>& utterances,
                                   int length_threshold = 5) {
  CompoundReport report;
  for (std::size_t u = 0; u < utterances.size(); ++u) {
    const auto& utt = utterances[u];
    ensure(utt.tokens.size() == utt.tags.size(), "nn_compounds: tokens/tags size mismatch");
    int pairs = 0, nn = 0;
    for (std::size_t i = 0; i + 1 < utt.tokens.size(); ++i) {
      ++pairs;
      if (utt.tags[i] == Pos::kNoun && utt.tags[i + 1] == Pos::kNoun) {
        ++nn;
        if (utt.chain_position > 1 &&
            static_cast<int>(utt.tokens.size()) <= length_threshold) {
          CompoundCandidate cand;
          cand.utterance_index = u;
          cand.first_noun = utt.tokens[i];
          cand.second_noun = utt.tokens[i + 1];
          auto in_prev = [&](const std::string& tok) {
            return std::find(utt.prev_tokens.begin(), utt.prev_tokens.end(), tok) !=
                   utt.prev_tokens.end();
          };
          cand.reuse_case = in_prev(cand.first_noun) && in_prev(cand.second_noun);
          report.candidates.push_back(std::move(cand));
        }
      }
    }
    report.nn_bigram_props.push_back(pairs == 0 ? 0.0
                                                : static_cast<double>(nn) /
                                                      static_cast<double>(pairs));
  }
  return report;
}

}  // namespace refdial::ling
