#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "refdial/embeddings.hpp"

namespace refdial::corpus {

// Greedy-matching F1 between two token sequences under an embedding provider:
// precision is the mean over candidate tokens of the best cosine similarity
// against any reference token, recall is the symmetric quantity, and the two
// combine harmonically. No idf weighting, no baseline rescaling. Empty input
// on either side scores 0 by contract.
inline double greedy_match_f1(const Eigen::MatrixXd& cand, const Eigen::MatrixXd& ref) {
  if (cand.rows() == 0 || ref.rows() == 0) return 0.0;
  Eigen::MatrixXd cn = cand;
  Eigen::MatrixXd rn = ref;
  for (Eigen::Index i = 0; i < cn.rows(); ++i) {
    double n = cn.row(i).norm();
    if (n > 0) cn.row(i) /= n;
  }
  for (Eigen::Index i = 0; i < rn.rows(); ++i) {
    double n = rn.row(i).norm();
    if (n > 0) rn.row(i) /= n;
  }
  Eigen::MatrixXd sim = cn * rn.transpose();  // (|cand| x |ref|)
  double p = sim.rowwise().maxCoeff().mean();
  double r = sim.colwise().maxCoeff().mean();
  if (p + r <= 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

// Caption-similarity provider: token lists in, pairwise similarity F1 out.
class CaptionScorer {
 public:
  virtual ~CaptionScorer() = default;
  virtual double f1(const std::vector<std::string>& candidate,
                    const std::vector<std::string>& reference) const = 0;

  // Multi-reference convention: best-matching reference wins.
  double best_f1(const std::vector<std::string>& candidate,
                 const std::vector<std::vector<std::string>>& references) const {
    double best = 0.0;
    for (const auto& ref : references) best = std::max(best, f1(candidate, ref));
    return best;
  }
};

class EmbeddingCaptionScorer : public CaptionScorer {
 public:
  explicit EmbeddingCaptionScorer(std::shared_ptr<const EmbeddingProvider> provider)
      : provider_(std::move(provider)) {}

  double f1(const std::vector<std::string>& candidate,
            const std::vector<std::string>& reference) const override {
    if (candidate.empty() || reference.empty()) return 0.0;
    return greedy_match_f1(provider_->embed(candidate), provider_->embed(reference));
  }

 private:
  std::shared_ptr<const EmbeddingProvider> provider_;
};

}  // namespace refdial::corpus
