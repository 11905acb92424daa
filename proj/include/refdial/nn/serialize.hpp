#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "refdial/nn/layers.hpp"

// Checkpoint format (little-endian):
//   magic "RDCP0001"
//   u64 header length, header bytes (JSON: variant tag, dims, vocab hash, seed)
//   u64 tensor count
//   per tensor: u64 name length, name bytes, i64 rows, i64 cols, rows*cols f64

namespace refdial::nn {

namespace detail_ser {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  refdial::require(in.good(), "checkpoint: truncated file");
  return v;
}

}  // namespace detail_ser

inline constexpr char kCheckpointMagic[] = "RDCP0001";

inline void save_checkpoint(const std::string& path, const nlohmann::ordered_json& header,
                            const std::map<std::string, Mat>& tensors) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 8);
  std::string hdr = header.dump();
  detail_ser::put<std::uint64_t>(out, hdr.size());
  out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  detail_ser::put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, m] : tensors) {
    detail_ser::put<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail_ser::put<std::int64_t>(out, m.rows());
    detail_ser::put<std::int64_t>(out, m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) detail_ser::put<double>(out, m(r, c));
  }
  require(out.good(), "checkpoint write failed: " + path);
}

struct Checkpoint {
  nlohmann::ordered_json header;
  std::map<std::string, Mat> tensors;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::memcmp(magic, kCheckpointMagic, 8) == 0,
          "not a checkpoint file: " + path);
  auto hlen = detail_ser::get<std::uint64_t>(in);
  std::string hdr(hlen, '\0');
  in.read(hdr.data(), static_cast<std::streamsize>(hlen));
  require(in.good(), "checkpoint: truncated header");
  Checkpoint ck;
  ck.header = nlohmann::ordered_json::parse(hdr);
  auto count = detail_ser::get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto nlen = detail_ser::get<std::uint64_t>(in);
    std::string name(nlen, '\0');
    in.read(name.data(), static_cast<std::streamsize>(nlen));
    auto rows = detail_ser::get<std::int64_t>(in);
    auto cols = detail_ser::get<std::int64_t>(in);
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = detail_ser::get<double>(in);
    ck.tensors.emplace(std::move(name), std::move(m));
  }
  return ck;
}

}  // namespace refdial::nn
