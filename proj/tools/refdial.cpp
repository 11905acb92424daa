// Command-line front end: chain extraction, dataset preparation, training,
// decoding, resolution, evaluation, and linguistic analysis, individually or
// as a manifest-driven pipeline. Exit codes: 0 ok, 1 input error, 2 internal.

#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "refdial/corpus/chain_dataset.hpp"
#include "refdial/pipeline/stages.hpp"

namespace {

using refdial::pipeline::ExperimentManifest;
using refdial::pipeline::Pipeline;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

ExperimentManifest load_manifest(const std::string& path, const std::string& out_override) {
  auto m = ExperimentManifest::load(path, out_override);
  if (m.embedding_cache.empty()) {
    if (const char* cache_dir = std::getenv("REFDIAL_CACHE")) {
      auto candidate = std::filesystem::path(cache_dir) / "embeddings.bin";
      if (std::filesystem::exists(candidate)) m.embedding_cache = candidate.string();
    }
  }
  return m;
}

int run_standalone_extract(const std::string& games, const std::string& captions,
                           const std::string& vg, const std::string& out_path, int top_n,
                           int metric_dim, const std::string& gold,
                           const std::string& report_path) {
  using namespace refdial;
  auto game_logs = corpus::load_games(games);
  corpus::ReferenceStore store;
  store.load_captions(captions);
  if (!vg.empty()) store.load_vg(vg);
  auto provider = std::make_shared<HashEmbeddingProvider>(metric_dim, 17);
  corpus::EmbeddingCaptionScorer scorer(provider);
  corpus::ExtractorConfig cfg;
  cfg.top_n = top_n;

  std::vector<corpus::ReferenceChain> all;
  for (const auto& game : game_logs) {
    auto chains = corpus::extract_chains(game, store, scorer, cfg);
    all.insert(all.end(), chains.begin(), chains.end());
  }
  require(!all.empty(), "no chains extracted");
  write_file(out_path, corpus::chains_to_jsonl(all));
  std::cout << "wrote " << all.size() << " chains to " << out_path << "\n";

  if (!gold.empty()) {
    auto gold_chains = corpus::load_chains(gold);
    auto ev = corpus::evaluate_extraction(all, gold_chains);
    nlohmann::ordered_json j;
    j["extracted_links"] = ev.extracted_links;
    j["gold_links"] = ev.gold_links;
    j["correct_links"] = ev.correct_links;
    if (ev.precision)
      j["precision"] = *ev.precision;
    else
      j["precision"] = nullptr;
    if (ev.recall)
      j["recall"] = *ev.recall;
    else
      j["recall"] = nullptr;
    j["warnings"] = ev.warnings;
    std::string text = j.dump(2) + "\n";
    if (report_path.empty())
      std::cout << text;
    else
      write_file(report_path, text);
    for (const auto& w : ev.warnings) std::cerr << "warning: " << w << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reference chains, grounded generation, and resolution toolkit"};
  app.require_subcommand(1);

  // ---- extract ----
  std::string x_games, x_captions, x_vg, x_out, x_gold, x_report, x_manifest, x_outdir;
  int x_topn = 4;
  int x_metric_dim = 64;
  auto* extract = app.add_subcommand("extract", "extract reference chains from game logs");
  extract->add_option("--games", x_games, "game-log JSONL file");
  extract->add_option("--captions", x_captions, "captions JSON file");
  extract->add_option("--vg", x_vg, "scene-graph token JSON file");
  extract->add_option("--out", x_out, "chain dataset output path");
  extract->add_option("--top-n", x_topn, "candidates kept per image and round");
  extract->add_option("--metric-dim", x_metric_dim, "caption-similarity embedding dimension");
  extract->add_option("--gold", x_gold, "hand-annotated chains for precision/recall");
  extract->add_option("--report", x_report, "where to write the evaluation report");
  extract->add_option("--manifest", x_manifest, "run as the pipeline extract stage");
  extract->add_option("--out-dir", x_outdir, "override the manifest output directory");

  // ---- manifest-driven stages ----
  struct StageCmd {
    CLI::App* cmd = nullptr;
    std::string manifest;
    std::string out_dir;
    std::vector<std::string> stages;
  };
  std::map<std::string, StageCmd> stage_cmds;
  auto add_stage_cmd = [&](const std::string& name, const std::string& help,
                           std::vector<std::string> stages) {
    auto& sc = stage_cmds[name];
    sc.cmd = app.add_subcommand(name, help);
    sc.cmd->add_option("--manifest", sc.manifest, "experiment manifest")->required();
    sc.cmd->add_option("--out-dir", sc.out_dir, "override the manifest output directory");
    sc.stages = std::move(stages);
  };
  add_stage_cmd("prep", "build vocabularies and model-ready datasets", {"prep"});
  add_stage_cmd("generate", "decode the test split with trained checkpoints", {"generate"});
  add_stage_cmd("resolve", "rank candidates for gold and generated utterances", {"resolve"});
  add_stage_cmd("evaluate", "score generations and resolutions", {"evaluate"});
  add_stage_cmd("analyze", "linguistic profiling of human and generated utterances",
                {"analyze"});
  add_stage_cmd("report", "merge stage reports into one file", {"report"});

  std::string t_manifest, t_outdir, t_family = "all";
  auto* train_cmd = app.add_subcommand("train", "train generation and resolution models");
  train_cmd->add_option("--manifest", t_manifest, "experiment manifest")->required();
  train_cmd->add_option("--out-dir", t_outdir, "override the manifest output directory");
  train_cmd->add_option("--family", t_family, "gen, res, or all")
      ->check(CLI::IsMember({"gen", "res", "all"}));

  std::string p_manifest, p_outdir, p_stages;
  auto* pipe_cmd = app.add_subcommand("pipeline", "run pipeline stages in order");
  pipe_cmd->add_option("--manifest", p_manifest, "experiment manifest")->required();
  pipe_cmd->add_option("--out-dir", p_outdir, "override the manifest output directory");
  pipe_cmd->add_option("--stages", p_stages,
                       "comma-separated subset of: extract,prep,train-gen,train-res,"
                       "generate,resolve,evaluate,analyze,report");

  CLI11_PARSE(app, argc, argv);

  try {
    if (extract->parsed()) {
      if (!x_manifest.empty()) {
        Pipeline pipe(load_manifest(x_manifest, x_outdir));
        pipe.run({"extract"});
        return 0;
      }
      refdial::require(!x_games.empty() && !x_captions.empty() && !x_out.empty(),
                       "extract needs --games, --captions, and --out (or --manifest)");
      return run_standalone_extract(x_games, x_captions, x_vg, x_out, x_topn, x_metric_dim,
                                    x_gold, x_report);
    }
    for (auto& [name, sc] : stage_cmds) {
      if (sc.cmd->parsed()) {
        Pipeline pipe(load_manifest(sc.manifest, sc.out_dir));
        pipe.run(sc.stages);
        return 0;
      }
    }
    if (train_cmd->parsed()) {
      Pipeline pipe(load_manifest(t_manifest, t_outdir));
      std::vector<std::string> stages;
      if (t_family == "gen" || t_family == "all") stages.push_back("train-gen");
      if (t_family == "res" || t_family == "all") stages.push_back("train-res");
      pipe.run(stages);
      return 0;
    }
    if (pipe_cmd->parsed()) {
      Pipeline pipe(load_manifest(p_manifest, p_outdir));
      pipe.run(split_csv(p_stages));
      return 0;
    }
  } catch (const refdial::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
