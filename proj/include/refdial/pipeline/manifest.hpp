#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "refdial/common.hpp"

namespace refdial::pipeline {

// Experiment manifest: all input paths, configuration blocks, and the seed
// list. Relative paths resolve against the manifest's directory. The raw
// manifest bytes are hashed into every emitted artifact.
struct ExperimentManifest {
  std::string games;
  std::string captions;
  std::string vg;
  std::string features;
  std::string embedding_cache;  // optional: precomputed contextual embeddings
  std::string gold_chains;      // optional: hand-annotated links
  std::string out_dir;

  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // multiseed runs; defaults to {seed}

  int top_n = 4;
  int min_count = 2;
  int provider_dim = 768;  // resolver token-embedding provider (hash fallback)
  int metric_dim = 64;     // embedding-score provider
  int beam_width = 3;
  int max_decode_len = 30;

  std::vector<std::string> gen_variants = {"ref", "reref", "copy"};
  std::vector<std::string> res_variants = {"resolver"};
  nlohmann::json gen_config = nlohmann::json::object();  // TrainConfig overrides
  nlohmann::json res_config = nlohmann::json::object();

  std::uint64_t manifest_hash = 0;

  static ExperimentManifest load(const std::string& path, const std::string& out_override = "") {
    std::string raw = read_file(path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("bad manifest " + path + ": " + e.what());
    }
    ExperimentManifest m;
    m.manifest_hash = fnv1a64(raw);
    auto base = std::filesystem::absolute(std::filesystem::path(path)).parent_path();
    auto resolve = [&](const std::string& p) {
      if (p.empty()) return p;
      std::filesystem::path fp(p);
      return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    m.games = resolve(j.at("games").get<std::string>());
    m.captions = resolve(j.at("captions").get<std::string>());
    m.vg = resolve(j.value("vg", std::string()));
    m.features = resolve(j.at("features").get<std::string>());
    m.embedding_cache = resolve(j.value("embedding_cache", std::string()));
    m.gold_chains = resolve(j.value("gold_chains", std::string()));
    m.out_dir = out_override.empty() ? resolve(j.value("out_dir", std::string("out"))) : out_override;

    m.seed = j.value("seed", 1ULL);
    if (j.contains("seeds"))
      m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (m.seeds.empty()) m.seeds = {m.seed};
    m.top_n = j.value("top_n", 4);
    m.min_count = j.value("min_count", 2);
    m.provider_dim = j.value("provider_dim", 768);
    m.metric_dim = j.value("metric_dim", 64);
    m.beam_width = j.value("beam_width", 3);
    m.max_decode_len = j.value("max_decode_len", 30);
    if (j.contains("gen_variants"))
      m.gen_variants = j.at("gen_variants").get<std::vector<std::string>>();
    if (j.contains("res_variants"))
      m.res_variants = j.at("res_variants").get<std::vector<std::string>>();
    m.gen_config = j.value("gen_config", nlohmann::json::object());
    m.res_config = j.value("res_config", nlohmann::json::object());

    for (const auto& [name, p] :
         std::vector<std::pair<std::string, std::string>>{{"games", m.games},
                                                          {"captions", m.captions},
                                                          {"features", m.features}})
      require(std::filesystem::exists(p), "manifest: " + name + " path does not exist: " + p);
    for (const auto& [name, p] : std::vector<std::pair<std::string, std::string>>{
             {"vg", m.vg},
             {"embedding_cache", m.embedding_cache},
             {"gold_chains", m.gold_chains}})
      require(p.empty() || std::filesystem::exists(p),
              "manifest: " + name + " path does not exist: " + p);
    return m;
  }

  nlohmann::ordered_json provenance(std::uint64_t run_seed) const {
    nlohmann::ordered_json j;
    j["manifest_hash"] = hex64(manifest_hash);
    j["seed"] = run_seed;
    return j;
  }
};

}  // namespace refdial::pipeline
