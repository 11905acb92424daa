#pragma once

#include <cmath>
#include <map>
#include <string>

#include "refdial/nn/layers.hpp"

namespace refdial::nn {

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Global-norm gradient clipping; 0 disables it.
  void set_grad_clip(double c) { clip_ = c; }

  void step(ParamStore& ps) {
    ++t_;
    if (clip_ > 0.0) {
      double sq = 0.0;
      for (auto& [name, v] : ps.all()) sq += v.grad().squaredNorm();
      double norm = std::sqrt(sq);
      if (norm > clip_) {
        double s = clip_ / norm;
        for (auto& [name, v] : ps.all()) v.grad() *= s;
      }
    }
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& [name, v] : ps.all()) {
      Mat& m = moment1_[name];
      Mat& s = moment2_[name];
      if (m.rows() != v.rows() || m.cols() != v.cols()) {
        m = Mat::Zero(v.rows(), v.cols());
        s = Mat::Zero(v.rows(), v.cols());
      }
      const Mat& g = v.grad();
      m = beta1_ * m + (1.0 - beta1_) * g;
      s = beta2_ * s + (1.0 - beta2_) * g.cwiseProduct(g);
      Mat mhat = m / bc1;
      Mat shat = s / bc2;
      v.value() -= lr_ * mhat.cwiseQuotient((shat.cwiseSqrt().array() + eps_).matrix());
    }
  }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  double clip_ = 0.0;
  long t_ = 0;
  std::map<std::string, Mat> moment1_;
  std::map<std::string, Mat> moment2_;
};

}  // namespace refdial::nn
