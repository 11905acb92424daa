#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "refdial/common.hpp"

namespace refdial::metrics {

using Tokens = std::vector<std::string>;
using Ngram = std::vector<std::string>;

inline std::map<Ngram, int> ngram_counts(const Tokens& tokens, int n) {
  std::map<Ngram, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i)
    ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + static_cast<std::size_t>(n)))];
  return counts;
}

// Corpus BLEU truncated at bigrams: clipped modified precisions with uniform
// weights and the brevity penalty; no smoothing, so zero bigram overlap gives
// 0. Reference lengths use the closest-length convention. 0-100 scale.
inline double bleu2(const std::vector<Tokens>& hypotheses,
                    const std::vector<std::vector<Tokens>>& references) {
  require(!hypotheses.empty(), "bleu2: empty hypothesis set");
  require(hypotheses.size() == references.size(), "bleu2: hypothesis/reference count mismatch");
  long hyp_len = 0;
  long ref_len = 0;
  double log_prec_sum = 0.0;
  for (int n = 1; n <= 2; ++n) {
    long matched = 0;
    long total = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
      auto hyp_counts = ngram_counts(hypotheses[i], n);
      std::map<Ngram, int> max_ref;
      for (const auto& ref : references[i])
        for (const auto& [g, c] : ngram_counts(ref, n))
          max_ref[g] = std::max(max_ref[g], c);
      for (const auto& [g, c] : hyp_counts) {
        auto it = max_ref.find(g);
        matched += it == max_ref.end() ? 0 : std::min(c, it->second);
        total += c;
      }
    }
    if (total == 0 || matched == 0) return 0.0;
    log_prec_sum += 0.5 * std::log(static_cast<double>(matched) / static_cast<double>(total));
  }
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    long h = static_cast<long>(hypotheses[i].size());
    hyp_len += h;
    require(!references[i].empty(), "bleu2: instance without references");
    long best = static_cast<long>(references[i][0].size());
    for (const auto& ref : references[i]) {
      long r = static_cast<long>(ref.size());
      if (std::llabs(r - h) < std::llabs(best - h) || (std::llabs(r - h) == std::llabs(best - h) && r < best))
        best = r;
    }
    ref_len += best;
  }
  double bp = hyp_len >= ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * bp * std::exp(log_prec_sum);
}

namespace detail {

inline int lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::vector<int>> dp(a.size() + 1, std::vector<int>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                      : std::max(dp[i - 1][j], dp[i][j - 1]);
  return dp[a.size()][b.size()];
}

}  // namespace detail

// ROUGE-L F-measure with beta = 1.2, best reference per instance, averaged
// over instances. 0-100 scale.
inline double rouge_l(const std::vector<Tokens>& hypotheses,
                      const std::vector<std::vector<Tokens>>& references, double beta = 1.2) {
  require(!hypotheses.empty(), "rouge_l: empty hypothesis set");
  require(hypotheses.size() == references.size(), "rouge_l: count mismatch");
  double total = 0.0;
  const double b2 = beta * beta;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    double best = 0.0;
    for (const auto& ref : references[i]) {
      if (hypotheses[i].empty() || ref.empty()) continue;
      int lcs = detail::lcs_length(hypotheses[i], ref);
      if (lcs == 0) continue;
      double p = static_cast<double>(lcs) / static_cast<double>(hypotheses[i].size());
      double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
      best = std::max(best, (1.0 + b2) * r * p / (r + b2 * p));
    }
    total += best;
  }
  return 100.0 * total / static_cast<double>(hypotheses.size());
}

// Plain tf-idf n-gram cosine consensus, n = 1..4, averaged and scaled by 10,
// so an identical corpus with informative n-grams scores 10. Document
// frequencies come from the reference sides only; an n-gram unseen in any
// reference set gets idf log(N).
inline double cider(const std::vector<Tokens>& hypotheses,
                    const std::vector<std::vector<Tokens>>& references) {
  require(!hypotheses.empty(), "cider: empty hypothesis set");
  require(hypotheses.size() == references.size(), "cider: count mismatch");
  const int kMaxN = 4;
  const double n_docs = static_cast<double>(references.size());

  std::vector<std::map<Ngram, int>> df(kMaxN + 1);
  for (const auto& refs : references) {
    for (int n = 1; n <= kMaxN; ++n) {
      std::map<Ngram, bool> seen;
      for (const auto& ref : refs)
        for (const auto& [g, c] : ngram_counts(ref, n)) seen[g] = true;
      for (const auto& [g, c] : seen) ++df[static_cast<std::size_t>(n)][g];
    }
  }
  auto idf = [&](int n, const Ngram& g) {
    auto it = df[static_cast<std::size_t>(n)].find(g);
    double d = it == df[static_cast<std::size_t>(n)].end() ? 1.0 : static_cast<double>(it->second);
    return std::log(n_docs / d);
  };
  auto tfidf = [&](const Tokens& toks, int n) {
    std::map<Ngram, double> v;
    for (const auto& [g, c] : ngram_counts(toks, n)) v[g] = c * idf(n, g);
    return v;
  };
  auto norm = [](const std::map<Ngram, double>& v) {
    double s = 0.0;
    for (const auto& [g, x] : v) s += x * x;
    return std::sqrt(s);
  };

  double total = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    double inst = 0.0;
    for (int n = 1; n <= kMaxN; ++n) {
      auto vh = tfidf(hypotheses[i], n);
      double nh = norm(vh);
      double acc = 0.0;
      for (const auto& ref : references[i]) {
        auto vr = tfidf(ref, n);
        double nr = norm(vr);
        if (nh == 0.0 || nr == 0.0) continue;
        double dot = 0.0;
        for (const auto& [g, x] : vh) {
          auto it = vr.find(g);
          if (it != vr.end()) dot += x * it->second;
        }
        acc += dot / (nh * nr);
      }
      inst += acc / static_cast<double>(references[i].size());
    }
    total += 10.0 * inst / kMaxN;
  }
  return total / static_cast<double>(hypotheses.size());
}

}  // namespace refdial::metrics
