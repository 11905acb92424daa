#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "refdial/common.hpp"
#include "refdial/rng.hpp"

namespace refdial {

// Token-sequence embedding provider. Implementations: a deterministic
// hash-based provider (tests, fixture runs) and a file-backed cache of
// precomputed contextual embeddings (full-scale runs). Providers return one
// row per token.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dim() const = 0;
  // key identifies the utterance for cache-backed providers; hash providers
  // ignore it.
  virtual Eigen::MatrixXd embed(const std::vector<std::string>& tokens,
                                const std::string& key = std::string()) const = 0;
};

// Deterministic pseudo-random unit vector per surface form: the token's hash
// seeds an RNG that draws the vector. Identical tokens always get identical
// embeddings, so exact matches score 1.0 under cosine similarity.
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(int dim = 64, std::uint64_t seed = 17)
      : dim_(dim), seed_(seed) {}

  int dim() const override { return dim_; }

  Eigen::MatrixXd embed(const std::vector<std::string>& tokens,
                        const std::string& = std::string()) const override {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(tokens.size()), dim_);
    for (std::size_t i = 0; i < tokens.size(); ++i)
      m.row(static_cast<Eigen::Index>(i)) = token_vector(tokens[i]);
    return m;
  }

  Eigen::RowVectorXd token_vector(const std::string& token) const {
    Rng rng = make_rng(fnv1a64(token, seed_ ^ 0x9e3779b97f4a7c15ULL));
    std::normal_distribution<double> d(0.0, 1.0);
    Eigen::RowVectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) v(i) = d(rng);
    double n = v.norm();
    if (n > 0) v /= n;
    return v;
  }

 private:
  int dim_;
  std::uint64_t seed_;
};

// Orthogonal one-hot embeddings over an explicit token universe; distinct
// tokens have similarity exactly 0, identical tokens exactly 1. Test-only.
class OneHotEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit OneHotEmbeddingProvider(std::vector<std::string> universe)
      : universe_(std::move(universe)) {
    for (std::size_t i = 0; i < universe_.size(); ++i) index_[universe_[i]] = static_cast<int>(i);
  }

  int dim() const override { return static_cast<int>(universe_.size()); }

  Eigen::MatrixXd embed(const std::vector<std::string>& tokens,
                        const std::string& = std::string()) const override {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tokens.size()), dim());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      auto it = index_.find(tokens[i]);
      require(it != index_.end(), "OneHotEmbeddingProvider: unknown token " + tokens[i]);
      m(static_cast<Eigen::Index>(i), it->second) = 1.0;
    }
    return m;
  }

 private:
  std::vector<std::string> universe_;
  std::map<std::string, int> index_;
};

// Binary cache of precomputed per-utterance embeddings, keyed by utterance id.
// Format: magic "RDEC0001", u64 dim, u64 record count, then per record:
// u64 key length, key bytes, u64 token count, tokens*dim f64.
class FileEmbeddingCache : public EmbeddingProvider {
 public:
  static constexpr char kMagic[] = "RDEC0001";

  static void write(const std::string& path, int dim,
                    const std::map<std::string, Eigen::MatrixXd>& records) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write embedding cache: " + path);
    out.write(kMagic, 8);
    auto put64 = [&out](std::uint64_t v) {
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    put64(static_cast<std::uint64_t>(dim));
    put64(records.size());
    for (const auto& [key, m] : records) {
      ensure(m.cols() == dim, "embedding cache: dim mismatch for " + key);
      put64(key.size());
      out.write(key.data(), static_cast<std::streamsize>(key.size()));
      put64(static_cast<std::uint64_t>(m.rows()));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          double v = m(r, c);
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    }
  }

  explicit FileEmbeddingCache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open embedding cache: " + path);
    char magic[8];
    in.read(magic, 8);
    require(in.good() && std::memcmp(magic, kMagic, 8) == 0,
            "not an embedding cache file: " + path);
    auto get64 = [&in]() {
      std::uint64_t v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      require(in.good(), "embedding cache: truncated");
      return v;
    };
    dim_ = static_cast<int>(get64());
    std::uint64_t count = get64();
    for (std::uint64_t i = 0; i < count; ++i) {
      std::string key(get64(), '\0');
      in.read(key.data(), static_cast<std::streamsize>(key.size()));
      auto rows = get64();
      Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), dim_);
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          double v = 0;
          in.read(reinterpret_cast<char*>(&v), sizeof(v));
          m(r, c) = v;
        }
      require(in.good(), "embedding cache: truncated record");
      records_.emplace(std::move(key), std::move(m));
    }
  }

  int dim() const override { return dim_; }

  Eigen::MatrixXd embed(const std::vector<std::string>& tokens,
                        const std::string& key = std::string()) const override {
    auto it = records_.find(key);
    require(it != records_.end(), "embedding cache: missing key " + key);
    require(it->second.rows() == static_cast<Eigen::Index>(tokens.size()),
            "embedding cache: token count mismatch for key " + key);
    return it->second;
  }

  bool contains(const std::string& key) const { return records_.count(key) > 0; }

 private:
  int dim_ = 0;
  std::map<std::string, Eigen::MatrixXd> records_;
};

}  // namespace refdial
