#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace refdial::corpus {

// Unigram F-mean of the alignment-based score with the fragmentation penalty
// fixed to 0, which is appropriate when the reference is an unordered token
// collection. Each candidate token aligns to at most one reference token, so
// the match count is the multiset intersection. F = 10PR / (R + 9P).
inline double meteor_fmean(const std::vector<std::string>& candidate,
                           const std::set<std::string>& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::map<std::string, int> cand_counts;
  for (const auto& t : candidate) ++cand_counts[t];
  int matches = 0;
  for (const auto& [tok, n] : cand_counts)
    if (reference.count(tok) > 0) matches += std::min(n, 1);
  if (matches == 0) return 0.0;
  double p = static_cast<double>(matches) / static_cast<double>(candidate.size());
  double r = static_cast<double>(matches) / static_cast<double>(reference.size());
  return 10.0 * p * r / (r + 9.0 * p);
}

}  // namespace refdial::corpus
