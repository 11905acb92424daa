#pragma once

#include <vector>

#include "refdial/common.hpp"

namespace refdial::metrics {

struct RankedInstance {
  std::vector<int> ranking;  // candidate indices, best first
  int target = 0;
};

struct AccuracyMrr {
  double accuracy = 0.0;  // 0-100
  double mrr = 0.0;       // 0-100
};

inline AccuracyMrr accuracy_mrr(const std::vector<RankedInstance>& instances) {
  require(!instances.empty(), "accuracy_mrr: empty ranking set");
  double correct = 0.0;
  double rr = 0.0;
  for (const auto& inst : instances) {
    int rank = 0;
    for (std::size_t k = 0; k < inst.ranking.size(); ++k)
      if (inst.ranking[k] == inst.target) {
        rank = static_cast<int>(k) + 1;
        break;
      }
    ensure(rank > 0, "accuracy_mrr: target missing from ranking");
    correct += rank == 1 ? 1.0 : 0.0;
    rr += 1.0 / static_cast<double>(rank);
  }
  double n = static_cast<double>(instances.size());
  return {100.0 * correct / n, 100.0 * rr / n};
}

}  // namespace refdial::metrics
