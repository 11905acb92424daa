#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "refdial/corpus/chain_dataset.hpp"
#include "refdial/corpus/evaluate.hpp"
#include "refdial/corpus/extract.hpp"
#include "refdial/data.hpp"
#include "refdial/ling/report.hpp"
#include "refdial/metrics/reports.hpp"
#include "refdial/pipeline/manifest.hpp"
#include "refdial/train/loop.hpp"

namespace refdial::pipeline {

namespace fs = std::filesystem;

inline const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order = {"extract",  "prep",    "train-gen",
                                                 "train-res", "generate", "resolve",
                                                 "evaluate", "analyze", "report"};
  return order;
}

// One generated hypothesis, serialized one per line in the hypotheses files.
struct Hypothesis {
  std::string game_id;
  std::string image_id;
  int message_id = 0;
  int chain_position = 1;
  std::vector<std::string> tokens;
  bool completed = true;
};

// One resolver ranking, serialized one per line in the rankings files.
struct RankingRecord {
  std::string game_id;
  std::string image_id;
  int message_id = 0;
  bool is_first = true;
  std::vector<int> ranking;
  int target_pos = 0;
  int predicted = 0;
  bool tie = false;
};

class Pipeline {
 public:
  explicit Pipeline(ExperimentManifest manifest) : m_(std::move(manifest)) {
    fs::create_directories(out());
    fs::create_directories(out() / ".stamps");
  }

  const ExperimentManifest& manifest() const { return m_; }

  void run(std::vector<std::string> stages) {
    if (stages.empty()) stages = stage_order();
    for (const auto& s : stages)
      require(std::find(stage_order().begin(), stage_order().end(), s) != stage_order().end(),
              "unknown pipeline stage: " + s);
    std::vector<std::string> ordered;
    for (const auto& s : stage_order())
      if (std::find(stages.begin(), stages.end(), s) != stages.end()) ordered.push_back(s);
    for (const auto& s : ordered) {
      try {
        run_stage(s);
      } catch (...) {
        record_state(s, "failed");
        throw;
      }
      record_state(s, "completed");
    }
  }

  void run_stage(const std::string& stage) {
    if (stage == "extract") return stage_extract();
    if (stage == "prep") return stage_prep();
    if (stage == "train-gen") return stage_train_gen();
    if (stage == "train-res") return stage_train_res();
    if (stage == "generate") return stage_generate();
    if (stage == "resolve") return stage_resolve();
    if (stage == "evaluate") return stage_evaluate();
    if (stage == "analyze") return stage_analyze();
    if (stage == "report") return stage_report();
    throw InputError("unknown pipeline stage: " + stage);
  }

  // -------------------------------------------------------------------
  // extract: game logs -> reference chains + extraction report
  // -------------------------------------------------------------------
  void stage_extract() {
    std::vector<std::string> inputs = {m_.games, m_.captions};
    if (!m_.vg.empty()) inputs.push_back(m_.vg);
    if (!m_.gold_chains.empty()) inputs.push_back(m_.gold_chains);
    if (skip_if_unchanged("extract", inputs, {chains_path(), extraction_report_path()})) return;

    auto games = corpus::load_games(m_.games);
    corpus::ReferenceStore store;
    store.load_captions(m_.captions);
    if (!m_.vg.empty()) store.load_vg(m_.vg);
    EmbeddingCaptionScorerWrapper scorer(m_.metric_dim);
    corpus::ExtractorConfig cfg;
    cfg.top_n = m_.top_n;

    std::vector<corpus::ReferenceChain> all;
    std::map<std::string, std::vector<corpus::ReferenceChain>> by_split;
    for (const auto& game : games) {
      auto chains = corpus::extract_chains(game, store, scorer.scorer(), cfg);
      by_split[game.split_tag].insert(by_split[game.split_tag].end(), chains.begin(),
                                      chains.end());
      all.insert(all.end(), chains.begin(), chains.end());
    }
    require(!all.empty(), "extract: no chains extracted");
    write_with_meta(chains_path(), corpus::chains_to_jsonl(all));

    nlohmann::ordered_json report;
    report["provenance"] = m_.provenance(m_.seed);
    for (const auto& [split, chains] : by_split) {
      if (chains.empty()) continue;
      auto st = corpus::chain_statistics(chains);
      nlohmann::ordered_json js;
      js["chains"] = st.num_chains;
      js["utterances"] = st.num_utterances;
      js["first_length_mean"] = st.first_length.mean;
      js["first_length_sd"] = st.first_length.sd;
      js["later_length_mean"] = st.later_length.mean;
      js["later_length_sd"] = st.later_length.sd;
      js["median_chain_length"] = st.median_chain_length;
      nlohmann::ordered_json hist = nlohmann::ordered_json::object();
      for (const auto& [len, count] : st.chain_length_histogram)
        hist[std::to_string(len)] = count;
      js["chain_length_histogram"] = hist;
      report["splits"][split] = js;
    }
    if (!m_.gold_chains.empty()) {
      auto gold = corpus::load_chains(m_.gold_chains);
      auto ev = corpus::evaluate_extraction(all, gold);
      nlohmann::ordered_json je;
      je["extracted_links"] = ev.extracted_links;
      je["gold_links"] = ev.gold_links;
      je["correct_links"] = ev.correct_links;
      if (ev.precision)
        je["precision"] = *ev.precision;
      else
        je["precision"] = nullptr;
      if (ev.recall)
        je["recall"] = *ev.recall;
      else
        je["recall"] = nullptr;
      je["warnings"] = ev.warnings;
      report["extraction_eval"] = je;
    }
    write_file(extraction_report_path(), report.dump(2) + "\n");
    stamp("extract", inputs);
  }

  // -------------------------------------------------------------------
  // prep: chains + games -> vocabularies and model-ready datasets
  // -------------------------------------------------------------------
  void stage_prep() {
    need(chains_path(), "prep", "extract");
    std::vector<std::string> inputs = {chains_path(), m_.games};
    std::vector<std::string> outputs = {vocab_path(), vocab_full_path()};
    for (const auto& split : splits()) {
      outputs.push_back(gen_split_path(split));
      outputs.push_back(res_split_path(split));
    }
    if (skip_if_unchanged("prep", inputs, outputs)) return;

    auto games = corpus::load_games(m_.games);
    auto chains = corpus::load_chains(chains_path());
    std::map<std::string, const corpus::GameLog*> game_index;
    for (const auto& g : games) game_index[g.game_id] = &g;

    // chain lookups for histories: (game, image) -> entries
    std::map<std::pair<std::string, std::string>, const corpus::ReferenceChain*> chain_index;
    for (const auto& c : chains) chain_index[{c.game_id, c.image_id}] = &c;

    std::map<std::string, std::vector<text::ModelInstance>> by_split;
    for (const auto& chain : chains) {
      auto git = game_index.find(chain.game_id);
      require(git != game_index.end(), "prep: chain references unknown game " + chain.game_id);
      const auto& game = *git->second;
      std::vector<std::vector<std::string>> chain_tokens;
      for (const auto& e : chain.entries) chain_tokens.push_back(text::tokenize(e.text));

      for (std::size_t k = 0; k < chain.entries.size(); ++k) {
        const auto& entry = chain.entries[k];
        const corpus::RoundLog* round = nullptr;
        const corpus::Message* message = nullptr;
        for (const auto& r : game.rounds)
          if (r.round_index == entry.round_index) {
            round = &r;
            for (const auto& msg : r.messages)
              if (msg.message_id == entry.message_id) message = &msg;
          }
        require(round != nullptr && message != nullptr,
                "prep: chain entry does not match the game log");

        text::ModelInstance inst;
        inst.game_id = chain.game_id;
        inst.image_id = chain.image_id;
        inst.round_index = entry.round_index;
        inst.message_id = entry.message_id;
        inst.chain_position = static_cast<int>(k) + 1;
        inst.split = game.split_tag;
        inst.target_tokens = chain_tokens[k];
        inst.source_tokens = k == 0 ? std::vector<std::string>{text::kNohsTok}
                                    : text::tokenize(chain.entries[k - 1].text);
        auto vit = round->views.find(message->speaker);
        require(vit != round->views.end(), "prep: speaker view missing");
        inst.context_ids = vit->second;
        auto pos = std::find(inst.context_ids.begin(), inst.context_ids.end(), chain.image_id);
        require(pos != inst.context_ids.end(), "prep: target image not in the speaker view");
        inst.target_pos = static_cast<int>(pos - inst.context_ids.begin());
        inst.chain_refs = chain_tokens;

        for (const auto& cand : inst.context_ids) {
          auto cit = chain_index.find({chain.game_id, cand});
          std::optional<text::CandidateHistory> hist;
          if (cit != chain_index.end()) {
            for (const auto& ce : cit->second->entries) {
              bool before = ce.round_index < entry.round_index ||
                            (ce.round_index == entry.round_index &&
                             ce.message_id < entry.message_id);
              if (before) hist = text::CandidateHistory{ce.text, ce.message_id};
            }
          }
          inst.candidate_histories.push_back(hist);
        }
        by_split[game.split_tag].push_back(std::move(inst));
      }
    }

    std::vector<std::vector<std::string>> train_utts, all_utts;
    for (const auto& [split, insts] : by_split)
      for (const auto& inst : insts) {
        all_utts.push_back(inst.target_tokens);
        if (split == "train") train_utts.push_back(inst.target_tokens);
      }
    require(!train_utts.empty(), "prep: no train-split utterances");
    auto vocab = text::Vocabulary::build(train_utts, m_.min_count);
    auto vocab_full = text::Vocabulary::build(all_utts, 1);
    write_file(vocab_path(), vocab.serialize());
    write_file(vocab_full_path(), vocab_full.serialize());

    for (const auto& split : splits()) {
      auto gen = by_split.count(split) ? by_split.at(split) : std::vector<text::ModelInstance>{};
      auto res = gen;
      text::shuffle_contexts(gen, m_.seed);  // generation contexts shuffle once here
      write_with_meta(gen_split_path(split), instances_to_jsonl(gen));
      write_with_meta(res_split_path(split), instances_to_jsonl(res));
    }

    nlohmann::ordered_json report;
    report["provenance"] = m_.provenance(m_.seed);
    report["vocab_size"] = vocab.size();
    report["vocab_full_size"] = vocab_full.size();
    for (const auto& [split, insts] : by_split) report["instances"][split] = insts.size();
    write_file((out() / "prep" / "prep_report.json").string(), report.dump(2) + "\n");
    stamp("prep", inputs);
  }

  // -------------------------------------------------------------------
  // train-gen / train-res
  // -------------------------------------------------------------------
  void stage_train_gen() {
    need(vocab_path(), "train-gen", "prep");
    need(gen_split_path("train"), "train-gen", "prep");
    std::vector<std::string> inputs = {vocab_path(), gen_split_path("train"),
                                       gen_split_path("val"), m_.features};
    std::vector<std::string> outputs;
    for (const auto& variant : m_.gen_variants)
      for (auto seed : m_.seeds) outputs.push_back(gen_checkpoint_path(variant, seed));
    if (skip_if_unchanged("train-gen", inputs, outputs)) return;

    auto vocab = text::Vocabulary::parse(read_file(vocab_path()));
    auto features = FeatureStore::load(m_.features);
    auto train_set = load_instances_meta(gen_split_path("train"));
    auto val_set = load_instances_meta(gen_split_path("val"));
    HashEmbeddingProvider metric_provider(m_.metric_dim, 17);

    for (const auto& variant : m_.gen_variants) {
      auto base_cfg = gen_train_config(variant, features.dim());
      auto run = [&](std::uint64_t seed) {
        auto cfg = base_cfg;
        cfg.seed = seed;
        gen::GenConfig gcfg = to_gen_config(cfg, vocab.size());
        gen::GenerationModel model(gcfg, seed);
        auto record = train_generation(model, cfg, train_set, val_set, vocab, features,
                                       metric_provider);
        auto dir = out() / "train" / variant / ("seed_" + std::to_string(seed));
        fs::create_directories(dir);
        auto header = model.checkpoint_header(vocab.content_hash(), seed);
        header["provenance"] = m_.provenance(seed);
        nn::save_checkpoint((dir / "checkpoint.bin").string(), header, model.params().snapshot());
        nlohmann::ordered_json jr = record.to_json();
        jr["provenance"] = m_.provenance(seed);
        jr["config"] = cfg.to_json();
        write_file((dir / "run.json").string(), jr.dump(2) + "\n");
        write_file((dir / "timing.log").string(),
                   "wall_seconds " + std::to_string(record.wall_seconds) + "\n");
        return std::map<std::string, double>{{"val_" + cfg.selection_metric, record.best_metric}};
      };
      summarize_training(variant, run);
    }
    stamp("train-gen", inputs);
  }

  void stage_train_res() {
    need(res_split_path("train"), "train-res", "prep");
    std::vector<std::string> inputs = {res_split_path("train"), res_split_path("val"), m_.features};
    std::vector<std::string> outputs;
    for (const auto& variant : m_.res_variants)
      for (auto seed : m_.seeds) outputs.push_back(res_checkpoint_path(variant, seed));
    if (skip_if_unchanged("train-res", inputs, outputs)) return;

    auto features = FeatureStore::load(m_.features);
    auto train_set = load_instances_meta(res_split_path("train"));
    auto val_set = load_instances_meta(res_split_path("val"));
    auto provider = embedding_provider();

    for (const auto& variant : m_.res_variants) {
      auto base_cfg = res_train_config(variant, features.dim());
      auto run = [&](std::uint64_t seed) {
        auto cfg = base_cfg;
        cfg.seed = seed;
        auto dir = out() / "train" / variant / ("seed_" + std::to_string(seed));
        fs::create_directories(dir);
        train::RunRecord record;
        nlohmann::ordered_json header;
        std::map<std::string, nn::Mat> tensors;
        if (variant == "baseline-onehot") {
          std::set<std::string> ids;
          for (const auto& inst : train_set)
            ids.insert(inst.context_ids.begin(), inst.context_ids.end());
          for (const auto& inst : val_set)
            ids.insert(inst.context_ids.begin(), inst.context_ids.end());
          res::OneHotBaseline model({ids.begin(), ids.end()}, cfg.hidden_dim, cfg.dropout, seed);
          record = train_onehot_baseline(model, cfg, train_set, val_set);
          header["kind"] = "resolution";
          header["variant"] = "baseline-onehot";
          header["hidden_dim"] = cfg.hidden_dim;
          header["dropout"] = cfg.dropout;
          header["seed"] = seed;
          nlohmann::ordered_json universe = nlohmann::ordered_json::array();
          for (const auto& id : ids) universe.push_back(id);
          header["id_universe"] = universe;
          tensors = model.params().snapshot();
        } else {
          res::ResConfig rcfg;
          rcfg.embed_dim = provider->dim();
          rcfg.feature_dim = features.dim();
          rcfg.hidden_dim = cfg.hidden_dim;
          rcfg.attn_dim = cfg.attn_dim;
          rcfg.dropout = cfg.dropout;
          rcfg.use_history = variant != "resolver-ablated";
          res::ResolutionModel model(rcfg, seed);
          record = train_resolution(model, cfg, train_set, val_set, *provider, features);
          header = model.checkpoint_header(seed);
          tensors = model.params().snapshot();
        }
        header["provenance"] = m_.provenance(seed);
        nn::save_checkpoint((dir / "checkpoint.bin").string(), header, tensors);
        nlohmann::ordered_json jr = record.to_json();
        jr["provenance"] = m_.provenance(seed);
        jr["config"] = cfg.to_json();
        write_file((dir / "run.json").string(), jr.dump(2) + "\n");
        write_file((dir / "timing.log").string(),
                   "wall_seconds " + std::to_string(record.wall_seconds) + "\n");
        return std::map<std::string, double>{{"val_" + cfg.selection_metric, record.best_metric}};
      };
      summarize_training(variant, run);
    }
    stamp("train-res", inputs);
  }

  // -------------------------------------------------------------------
  // generate: decode the test split with every generation checkpoint
  // -------------------------------------------------------------------
  void stage_generate() {
    need(gen_split_path("test"), "generate", "prep");
    std::vector<std::string> inputs = {vocab_path(), gen_split_path("test"), m_.features};
    std::vector<std::string> outputs;
    for (const auto& variant : m_.gen_variants) {
      need(gen_checkpoint_path(variant, m_.seeds.front()), "generate", "train-gen");
      for (auto seed : m_.seeds) {
        inputs.push_back(gen_checkpoint_path(variant, seed));
        outputs.push_back(hyps_path(variant, seed));
      }
    }
    if (skip_if_unchanged("generate", inputs, outputs)) return;

    auto vocab = text::Vocabulary::parse(read_file(vocab_path()));
    auto features = FeatureStore::load(m_.features);
    auto test_set = load_instances_meta(gen_split_path("test"));

    for (const auto& variant : m_.gen_variants) {
      for (auto seed : m_.seeds) {
        auto ck = nn::load_checkpoint(gen_checkpoint_path(variant, seed));
        require(ck.header.at("vocab_hash").get<std::string>() == hex64(vocab.content_hash()),
                "generate: checkpoint vocabulary hash does not match the prepared vocabulary");
        auto gcfg = gen::GenerationModel::config_from_header(ck.header);
        gen::GenerationModel model(gcfg, seed);
        model.params().restore(ck.tensors);

        std::string lines;
        for (const auto& inst : test_set) {
          auto g = make_gen_instance(inst, vocab, features);
          auto ext = text::extend_for_copy(inst.source_tokens, vocab);
          gen::GenerationModel::DecodeSession session(model, g);
          auto hyp = m_.beam_width <= 1
                         ? gen::BeamHypothesis{model.greedy_decode(g, m_.max_decode_len).tokens,
                                               0.0, true}
                         : gen::beam_search(session, m_.beam_width, m_.max_decode_len);
          nlohmann::ordered_json j;
          j["game_id"] = inst.game_id;
          j["image_id"] = inst.image_id;
          j["message_id"] = inst.message_id;
          j["chain_position"] = inst.chain_position;
          std::vector<std::string> tokens;
          for (int id : hyp.tokens) tokens.push_back(ext.ext.extended_token(id));
          j["tokens"] = tokens;
          j["completed"] = hyp.completed;
          lines += j.dump();
          lines += '\n';
        }
        write_with_meta(hyps_path(variant, seed), lines, seed);
      }
    }
    stamp("generate", inputs);
  }

  // -------------------------------------------------------------------
  // resolve: rank candidates for gold utterances (all resolver seeds) and
  // for generated + verbatim-baseline hypotheses (best resolver seed)
  // -------------------------------------------------------------------
  void stage_resolve() {
    need(res_split_path("test"), "resolve", "prep");
    const std::string resolver = resolver_variant();
    need(res_checkpoint_path(resolver, m_.seeds.front()), "resolve", "train-res");
    std::vector<std::string> inputs = {res_split_path("test"), m_.features};
    std::vector<std::string> outputs;
    for (auto seed : m_.seeds) {
      inputs.push_back(res_checkpoint_path(resolver, seed));
      outputs.push_back(rankings_path("gold", seed));
    }
    for (const auto& variant : m_.gen_variants)
      for (auto seed : m_.seeds) {
        need(hyps_path(variant, seed), "resolve", "generate");
        inputs.push_back(hyps_path(variant, seed));
        outputs.push_back(rankings_path(variant, seed));
        outputs.push_back(rankings_path(variant + "-baseline", seed));
      }
    if (skip_if_unchanged("resolve", inputs, outputs)) return;

    auto features = FeatureStore::load(m_.features);
    auto provider = embedding_provider();
    auto test_set = load_instances_meta(res_split_path("test"));
    // deterministic evaluation-time context shuffle, shared by every pass
    text::shuffle_contexts(test_set, m_.seed, 0x4556414cULL);

    std::uint64_t best_seed = best_seed_of(resolver);
    for (auto seed : m_.seeds) {
      auto model = load_resolver(resolver, seed, features.dim(), provider->dim());
      write_rankings(rankings_path("gold", seed), *model, test_set, *provider, features, nullptr,
                     seed);
    }
    auto best_model = load_resolver(resolver, best_seed, features.dim(), provider->dim());
    for (const auto& variant : m_.gen_variants) {
      for (auto seed : m_.seeds) {
        auto hyps = load_hypotheses(hyps_path(variant, seed));
        write_rankings(rankings_path(variant, seed), *best_model, test_set, *provider, features,
                       &hyps, seed);
        auto baseline = baseline_hypotheses(hyps);
        write_rankings(rankings_path(variant + "-baseline", seed), *best_model, test_set,
                       *provider, features, &baseline, seed);
      }
    }
    stamp("resolve", inputs);
  }

  // -------------------------------------------------------------------
  // evaluate: metric report per variant plus resolver and baseline tables
  // -------------------------------------------------------------------
  void stage_evaluate() {
    need(res_split_path("test"), "evaluate", "prep");
    std::vector<std::string> inputs = {res_split_path("test")};
    for (auto seed : m_.seeds) {
      need(rankings_path("gold", seed), "evaluate", "resolve");
      inputs.push_back(rankings_path("gold", seed));
    }
    for (const auto& variant : m_.gen_variants)
      for (auto seed : m_.seeds) {
        need(hyps_path(variant, seed), "evaluate", "generate");
        need(rankings_path(variant, seed), "evaluate", "resolve");
        inputs.push_back(hyps_path(variant, seed));
        inputs.push_back(rankings_path(variant, seed));
        inputs.push_back(rankings_path(variant + "-baseline", seed));
      }
    std::vector<std::string> outputs = {evaluate_report_path(),
                                        (out() / "evaluate" / "report.txt").string()};
    if (skip_if_unchanged("evaluate", inputs, outputs)) return;

    auto test_set = load_instances_meta(res_split_path("test"));
    std::map<std::pair<std::string, int>, const text::ModelInstance*> index;
    for (const auto& inst : test_set) index[{inst.game_id, inst.message_id}] = &inst;
    HashEmbeddingProvider metric_provider(m_.metric_dim, 17);

    nlohmann::ordered_json report;
    report["provenance"] = m_.provenance(m_.seed);

    // resolver on human utterances, aggregated over seeds
    {
      std::map<std::string, std::vector<double>> columns;
      for (auto seed : m_.seeds) {
        auto rankings = load_rankings(rankings_path("gold", seed));
        accumulate_ranking_metrics(rankings, columns);
      }
      report["resolution"]["gold"] = aggregate_columns(columns);
    }

    for (const auto& variant : m_.gen_variants) {
      std::map<std::string, std::vector<double>> columns;
      std::map<std::string, std::vector<double>> baseline_columns;
      std::vector<metrics::Tokens> best_seed_hyps;
      std::uint64_t best_seed = best_seed_of(variant);
      for (auto seed : m_.seeds) {
        auto hyps = load_hypotheses(hyps_path(variant, seed));
        auto rankings = load_rankings(rankings_path(variant, seed));
        auto eval = build_eval_instances(hyps, rankings, index);
        auto mr = metrics::metric_report(eval, metric_provider);
        accumulate_subset(columns, "first", mr.first);
        accumulate_subset(columns, "later", mr.later);
        accumulate_subset(columns, "overall", mr.overall);

        auto vb = metrics::verbatim_baseline(eval);
        if (!vb.later_instances.empty()) {
          auto brank = load_rankings(rankings_path(variant + "-baseline", seed));
          attach_rankings(vb.later_instances, brank);
          std::vector<const metrics::GenEvalInstance*> later;
          for (const auto& e : vb.later_instances) later.push_back(&e);
          accumulate_subset(baseline_columns, "later", metrics::score_subset(later, metric_provider));
        }
        if (seed == best_seed) {
          for (const auto& h : hyps) best_seed_hyps.push_back(h.tokens);
        }
      }
      report["generation"][variant] = aggregate_columns(columns);
      if (!baseline_columns.empty())
        report["generation"][variant + "-verbatim-baseline"] = aggregate_columns(baseline_columns);
      auto rv = metrics::repetition_and_vocab(best_seed_hyps);
      report["generation"][variant]["repetition_rate"] = rv.repeat_rate;
      report["generation"][variant]["vocab_size"] = rv.vocab_size;
    }
    // human repetition/vocabulary on the same split for comparison
    {
      std::vector<metrics::Tokens> gold;
      for (const auto& inst : test_set) gold.push_back(inst.target_tokens);
      auto rv = metrics::repetition_and_vocab(gold);
      report["human"]["repetition_rate"] = rv.repeat_rate;
      report["human"]["vocab_size"] = rv.vocab_size;
    }

    fs::create_directories(out() / "evaluate");
    write_file(evaluate_report_path(), report.dump(2) + "\n");
    write_file((out() / "evaluate" / "report.txt").string(), render_evaluation(report));
    stamp("evaluate", inputs);
  }

  // -------------------------------------------------------------------
  // analyze: linguistic profile of human chains and best-seed generations
  // -------------------------------------------------------------------
  void stage_analyze() {
    need(res_split_path("test"), "analyze", "prep");
    std::vector<std::string> inputs = {res_split_path("test")};
    for (const auto& variant : m_.gen_variants) {
      need(hyps_path(variant, best_seed_of(variant)), "analyze", "generate");
      inputs.push_back(hyps_path(variant, best_seed_of(variant)));
    }
    std::vector<std::string> outputs = {analyze_report_path(),
                                        (out() / "analyze" / "profile_report.txt").string()};
    if (skip_if_unchanged("analyze", inputs, outputs)) return;

    ling::LexiconSuffixTagger tagger;
    auto test_set = load_instances_meta(res_split_path("test"));
    std::map<std::string, std::vector<ling::TaggedUtterance>> systems;
    for (const auto& inst : test_set) {
      ling::TaggedUtterance u;
      u.tokens = inst.target_tokens;
      u.tags = tagger.tag(u.tokens);
      if (!inst.is_first()) u.prev_tokens = inst.source_tokens;
      u.chain_position = inst.chain_position;
      systems["human"].push_back(std::move(u));
    }
    std::map<std::pair<std::string, int>, const text::ModelInstance*> index;
    for (const auto& inst : test_set) index[{inst.game_id, inst.message_id}] = &inst;
    for (const auto& variant : m_.gen_variants) {
      auto hyps = load_hypotheses(hyps_path(variant, best_seed_of(variant)));
      for (const auto& h : hyps) {
        auto it = index.find({h.game_id, h.message_id});
        require(it != index.end(), "analyze: hypothesis without a matching instance");
        ling::TaggedUtterance u;
        u.tokens = h.tokens;
        u.tags = tagger.tag(u.tokens);
        if (h.chain_position > 1) u.prev_tokens = it->second->source_tokens;
        u.chain_position = h.chain_position;
        systems[variant].push_back(std::move(u));
      }
    }

    auto report = ling::profile_report(systems, tagger);
    report["provenance"] = m_.provenance(m_.seed);
    // compound screening per system (later mentions only by construction)
    nlohmann::ordered_json compounds = nlohmann::ordered_json::object();
    for (const auto& [name, utts] : systems) {
      auto cr = ling::nn_compounds(utts);
      double mean_prop = 0.0;
      for (double p : cr.nn_bigram_props) mean_prop += p;
      if (!cr.nn_bigram_props.empty()) mean_prop /= static_cast<double>(cr.nn_bigram_props.size());
      nlohmann::ordered_json jc;
      jc["mean_nn_bigram_prop"] = mean_prop;
      nlohmann::ordered_json cands = nlohmann::ordered_json::array();
      for (const auto& c : cr.candidates)
        cands.push_back({{"first_noun", c.first_noun},
                         {"second_noun", c.second_noun},
                         {"reuse_case", c.reuse_case}});
      jc["candidates"] = cands;
      compounds[name] = jc;
    }
    report["compounds"] = compounds;

    fs::create_directories(out() / "analyze");
    write_file(analyze_report_path(), report.dump(2) + "\n");
    write_file((out() / "analyze" / "profile_report.txt").string(),
               ling::render_profile_report(report));
    stamp("analyze", inputs);
  }

  // -------------------------------------------------------------------
  // report: merge everything into one rendered file
  // -------------------------------------------------------------------
  void stage_report() {
    need(extraction_report_path(), "report", "extract");
    need(evaluate_report_path(), "report", "evaluate");
    need(analyze_report_path(), "report", "analyze");
    std::vector<std::string> inputs = {extraction_report_path(), evaluate_report_path(),
                                       analyze_report_path()};
    std::vector<std::string> outputs = {(out() / "report.txt").string()};
    if (skip_if_unchanged("report", inputs, outputs)) return;

    std::ostringstream os;
    os << "experiment report\n";
    os << "=================\n";
    os << "manifest hash: " << hex64(m_.manifest_hash) << "\n";
    os << "seeds:";
    for (auto s : m_.seeds) os << " " << s;
    os << "\n\n";
    os << "extraction\n----------\n" << read_file(extraction_report_path()) << "\n";
    os << "evaluation\n----------\n"
       << read_file((out() / "evaluate" / "report.txt").string()) << "\n";
    os << "linguistic analysis\n-------------------\n"
       << read_file((out() / "analyze" / "profile_report.txt").string());
    write_file((out() / "report.txt").string(), os.str());
    stamp("report", inputs);
  }

  // ---------------- path helpers (public for tests and the CLI) ----------
  fs::path out() const { return fs::path(m_.out_dir); }
  std::string chains_path() const { return (out() / "chains.jsonl").string(); }
  std::string extraction_report_path() const {
    return (out() / "extraction_report.json").string();
  }
  std::string vocab_path() const { return (out() / "prep" / "vocab.txt").string(); }
  std::string vocab_full_path() const { return (out() / "prep" / "vocab_full.txt").string(); }
  std::string gen_split_path(const std::string& split) const {
    return (out() / "prep" / ("gen_" + split + ".jsonl")).string();
  }
  std::string res_split_path(const std::string& split) const {
    return (out() / "prep" / ("res_" + split + ".jsonl")).string();
  }
  std::string gen_checkpoint_path(const std::string& variant, std::uint64_t seed) const {
    return (out() / "train" / variant / ("seed_" + std::to_string(seed)) / "checkpoint.bin")
        .string();
  }
  std::string res_checkpoint_path(const std::string& variant, std::uint64_t seed) const {
    return gen_checkpoint_path(variant, seed);
  }
  std::string hyps_path(const std::string& variant, std::uint64_t seed) const {
    return (out() / "generate" / variant / ("seed_" + std::to_string(seed) + "_test.jsonl"))
        .string();
  }
  std::string rankings_path(const std::string& tag, std::uint64_t seed) const {
    return (out() / "resolve" / (tag + "_seed_" + std::to_string(seed) + ".jsonl")).string();
  }
  std::string evaluate_report_path() const { return (out() / "evaluate" / "report.json").string(); }
  std::string analyze_report_path() const {
    return (out() / "analyze" / "profile_report.json").string();
  }

  static std::vector<std::string> splits() { return {"train", "val", "test"}; }

 private:
  // Wraps the hash-based caption scorer so extraction stays deterministic.
  struct EmbeddingCaptionScorerWrapper {
    explicit EmbeddingCaptionScorerWrapper(int dim)
        : provider(std::make_shared<HashEmbeddingProvider>(dim, 17)), scorer_(provider) {}
    const corpus::CaptionScorer& scorer() const { return scorer_; }
    std::shared_ptr<HashEmbeddingProvider> provider;
    corpus::EmbeddingCaptionScorer scorer_;
  };

  std::string resolver_variant() const {
    for (const auto& v : m_.res_variants)
      if (v == "resolver") return v;
    require(!m_.res_variants.empty(), "no resolution variants configured");
    return m_.res_variants.front();
  }

  train::TrainConfig gen_train_config(const std::string& variant, int feature_dim) const {
    auto cfg = train::TrainConfig::defaults_for(variant);
    if (!m_.gen_config.empty()) {
      nlohmann::json merged = cfg.to_json();
      merged.update(m_.gen_config);
      merged["variant"] = variant;
      cfg = train::TrainConfig::from_json(merged);
    }
    cfg.feature_dim = feature_dim;
    cfg.max_decode_len = m_.max_decode_len;
    return cfg;
  }

  train::TrainConfig res_train_config(const std::string& variant, int feature_dim) const {
    auto cfg = train::TrainConfig::defaults_for(variant);
    if (!m_.res_config.empty()) {
      nlohmann::json merged = cfg.to_json();
      merged.update(m_.res_config);
      merged["variant"] = variant;
      cfg = train::TrainConfig::from_json(merged);
    }
    cfg.feature_dim = feature_dim;
    return cfg;
  }

  static gen::GenConfig to_gen_config(const train::TrainConfig& cfg, int vocab_size) {
    gen::GenConfig g;
    g.variant = gen::parse_variant(cfg.variant);
    g.vocab_size = vocab_size;
    g.feature_dim = cfg.feature_dim;
    g.embed_dim = cfg.embed_dim;
    g.hidden_dim = cfg.hidden_dim;
    g.attn_dim = cfg.attn_dim;
    g.dropout = cfg.dropout;
    g.max_decode_len = cfg.max_decode_len;
    return g;
  }

  std::shared_ptr<EmbeddingProvider> embedding_provider() const {
    if (!m_.embedding_cache.empty())
      return std::make_shared<FileEmbeddingCache>(m_.embedding_cache);
    return std::make_shared<HashEmbeddingProvider>(m_.provider_dim, 23);
  }

  void summarize_training(const std::string& variant,
                          const std::function<std::map<std::string, double>(std::uint64_t)>& run) {
    nlohmann::ordered_json summary;
    summary["provenance"] = m_.provenance(m_.seed);
    if (m_.seeds.size() >= 2) {
      auto report = train::multiseed(m_.seeds, run);
      summary["multiseed"] = report.to_json();
      // best seed by the selection metric
      std::size_t best = 0;
      for (std::size_t i = 1; i < report.per_seed.size(); ++i)
        if (report.per_seed[i].begin()->second > report.per_seed[best].begin()->second) best = i;
      summary["best_seed"] = m_.seeds[best];
    } else {
      auto metrics_map = run(m_.seeds.front());
      summary["single_seed"] = metrics_map;
      summary["best_seed"] = m_.seeds.front();
    }
    write_file((out() / "train" / variant / "summary.json").string(), summary.dump(2) + "\n");
  }

  std::uint64_t best_seed_of(const std::string& variant) const {
    auto path = out() / "train" / variant / "summary.json";
    need(path.string(), "downstream stages", variant == resolver_variant() ? "train-res"
                                                                            : "train-gen");
    auto j = nlohmann::json::parse(read_file(path.string()));
    return j.at("best_seed").get<std::uint64_t>();
  }

  std::shared_ptr<res::ResolutionModel> load_resolver(const std::string& variant,
                                                      std::uint64_t seed, int feature_dim,
                                                      int provider_dim) const {
    auto ck = nn::load_checkpoint(res_checkpoint_path(variant, seed));
    auto rcfg = res::ResolutionModel::config_from_header(ck.header);
    require(rcfg.feature_dim == feature_dim && rcfg.embed_dim == provider_dim,
            "resolver checkpoint dimensions do not match the inputs");
    auto model = std::make_shared<res::ResolutionModel>(rcfg, seed);
    model->params().restore(ck.tensors);
    return model;
  }

  std::vector<Hypothesis> load_hypotheses(const std::string& path) const {
    std::vector<Hypothesis> out;
    for (const auto& line : split_lines(read_file(path))) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      if (j.contains("__meta__")) continue;
      Hypothesis h;
      h.game_id = j.at("game_id").get<std::string>();
      h.image_id = j.at("image_id").get<std::string>();
      h.message_id = j.at("message_id").get<int>();
      h.chain_position = j.at("chain_position").get<int>();
      h.tokens = j.at("tokens").get<std::vector<std::string>>();
      h.completed = j.value("completed", true);
      out.push_back(std::move(h));
    }
    return out;
  }

  // Later mentions take the chain's first generated utterance verbatim.
  std::vector<Hypothesis> baseline_hypotheses(const std::vector<Hypothesis>& hyps) const {
    std::map<std::pair<std::string, std::string>, const Hypothesis*> firsts;
    for (const auto& h : hyps)
      if (h.chain_position == 1) firsts[{h.game_id, h.image_id}] = &h;
    std::vector<Hypothesis> out;
    for (const auto& h : hyps) {
      Hypothesis copy = h;
      if (h.chain_position > 1) {
        auto it = firsts.find({h.game_id, h.image_id});
        if (it == firsts.end()) continue;
        copy.tokens = it->second->tokens;
      }
      out.push_back(std::move(copy));
    }
    return out;
  }

  void write_rankings(const std::string& path, const res::ResolutionModel& model,
                      const std::vector<text::ModelInstance>& test_set,
                      const EmbeddingProvider& provider, const FeatureStore& features,
                      const std::vector<Hypothesis>* hyps, std::uint64_t seed) const {
    std::map<std::pair<std::string, int>, const Hypothesis*> hyp_index;
    if (hyps != nullptr)
      for (const auto& h : *hyps) hyp_index[{h.game_id, h.message_id}] = &h;
    std::string lines;
    static const std::vector<std::string> placeholder = {text::kUnkTok};
    for (const auto& inst : test_set) {
      const std::vector<std::string>* tokens = nullptr;
      if (hyps != nullptr) {
        auto it = hyp_index.find({inst.game_id, inst.message_id});
        if (it == hyp_index.end()) continue;  // baseline may skip orphan chains
        tokens = it->second->tokens.empty() ? &placeholder : &it->second->tokens;
      }
      auto r = make_res_instance(inst, provider, features, tokens);
      auto res = model.resolve({r}).front();
      nlohmann::ordered_json j;
      j["game_id"] = inst.game_id;
      j["image_id"] = inst.image_id;
      j["message_id"] = inst.message_id;
      j["is_first"] = inst.is_first();
      j["ranking"] = res.ranking;
      j["target_pos"] = inst.target_pos;
      j["predicted"] = res.predicted;
      j["tie"] = res.tie;
      lines += j.dump();
      lines += '\n';
    }
    fs::create_directories(fs::path(path).parent_path());
    write_with_meta(path, lines, seed);
  }

  std::vector<RankingRecord> load_rankings(const std::string& path) const {
    std::vector<RankingRecord> out;
    for (const auto& line : split_lines(read_file(path))) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      if (j.contains("__meta__")) continue;
      RankingRecord r;
      r.game_id = j.at("game_id").get<std::string>();
      r.image_id = j.at("image_id").get<std::string>();
      r.message_id = j.at("message_id").get<int>();
      r.is_first = j.at("is_first").get<bool>();
      r.ranking = j.at("ranking").get<std::vector<int>>();
      r.target_pos = j.at("target_pos").get<int>();
      r.predicted = j.at("predicted").get<int>();
      r.tie = j.value("tie", false);
      out.push_back(std::move(r));
    }
    return out;
  }

  std::vector<metrics::GenEvalInstance> build_eval_instances(
      const std::vector<Hypothesis>& hyps, const std::vector<RankingRecord>& rankings,
      const std::map<std::pair<std::string, int>, const text::ModelInstance*>& index) const {
    std::map<std::pair<std::string, int>, const RankingRecord*> rank_index;
    for (const auto& r : rankings) rank_index[{r.game_id, r.message_id}] = &r;
    std::vector<metrics::GenEvalInstance> out;
    for (const auto& h : hyps) {
      auto it = index.find({h.game_id, h.message_id});
      require(it != index.end(), "evaluate: hypothesis without a matching instance");
      metrics::GenEvalInstance e;
      e.game_id = h.game_id;
      e.image_id = h.image_id;
      e.message_id = h.message_id;
      e.chain_position = h.chain_position;
      e.hypothesis = h.tokens;
      e.gold = it->second->target_tokens;
      e.chain_refs = it->second->chain_refs;
      auto rit = rank_index.find({h.game_id, h.message_id});
      if (rit != rank_index.end())
        e.resolution = metrics::RankedInstance{rit->second->ranking, rit->second->target_pos};
      out.push_back(std::move(e));
    }
    return out;
  }

  static void attach_rankings(std::vector<metrics::GenEvalInstance>& eval,
                              const std::vector<RankingRecord>& rankings) {
    std::map<std::pair<std::string, int>, const RankingRecord*> rank_index;
    for (const auto& r : rankings) rank_index[{r.game_id, r.message_id}] = &r;
    for (auto& e : eval) {
      auto it = rank_index.find({e.game_id, e.message_id});
      if (it != rank_index.end())
        e.resolution = metrics::RankedInstance{it->second->ranking, it->second->target_pos};
      else
        e.resolution.reset();
    }
  }

  static void accumulate_subset(std::map<std::string, std::vector<double>>& columns,
                                const std::string& subset, const metrics::SubsetScores& s) {
    if (s.count == 0) return;
    columns[subset + ".count"].push_back(s.count);
    columns[subset + ".bleu2"].push_back(s.bleu2);
    columns[subset + ".rouge"].push_back(s.rouge);
    columns[subset + ".cider"].push_back(s.cider);
    columns[subset + ".embedding_f1"].push_back(s.embedding_f1);
    if (s.resolution) {
      columns[subset + ".accuracy"].push_back(s.resolution->accuracy);
      columns[subset + ".mrr"].push_back(s.resolution->mrr);
    }
  }

  void accumulate_ranking_metrics(const std::vector<RankingRecord>& rankings,
                                  std::map<std::string, std::vector<double>>& columns) const {
    auto subset = [&](const std::string& name, auto pred) {
      std::vector<metrics::RankedInstance> insts;
      for (const auto& r : rankings)
        if (pred(r)) insts.push_back({r.ranking, r.target_pos});
      if (insts.empty()) return;
      auto am = metrics::accuracy_mrr(insts);
      columns[name + ".count"].push_back(static_cast<double>(insts.size()));
      columns[name + ".accuracy"].push_back(am.accuracy);
      columns[name + ".mrr"].push_back(am.mrr);
    };
    subset("first", [](const RankingRecord& r) { return r.is_first; });
    subset("later", [](const RankingRecord& r) { return !r.is_first; });
    subset("overall", [](const RankingRecord&) { return true; });
  }

  static nlohmann::ordered_json aggregate_columns(
      const std::map<std::string, std::vector<double>>& columns) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [name, values] : columns) {
      auto ms = corpus::mean_sd(values);
      j[name] = {{"mean", ms.mean}, {"sd", ms.sd}, {"formatted", metrics::format_mean_sd(ms)}};
    }
    return j;
  }

  static std::string render_evaluation(const nlohmann::ordered_json& report) {
    std::ostringstream os;
    auto cell = [&](const nlohmann::ordered_json& sys, const std::string& subset,
                    const std::string& metric) {
      std::string key = subset + "." + metric;
      return sys.contains(key) ? sys.at(key).at("formatted").get<std::string>()
                               : std::string("-");
    };
    os << "resolution (gold utterances)\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "  %-8s %-16s %-16s\n", "subset", "ACC", "MRR");
    os << buf;
    const auto& gold = report.at("resolution").at("gold");
    for (const auto& subset : {"first", "later", "overall"}) {
      std::snprintf(buf, sizeof(buf), "  %-8s %-16s %-16s\n", subset,
                    cell(gold, subset, "accuracy").c_str(), cell(gold, subset, "mrr").c_str());
      os << buf;
    }
    os << "\ngeneration\n";
    std::snprintf(buf, sizeof(buf), "  %-26s %-8s %-15s %-15s %-15s %-15s %-15s %-15s\n", "model",
                  "subset", "BLEU-2", "ROUGE", "CIDEr", "Embed-F1", "ACC", "MRR");
    os << buf;
    for (const auto& [name, sys] : report.at("generation").items()) {
      for (const auto& subset : {"first", "later", "overall"}) {
        if (!sys.contains(std::string(subset) + ".bleu2")) continue;
        std::snprintf(buf, sizeof(buf), "  %-26s %-8s %-15s %-15s %-15s %-15s %-15s %-15s\n",
                      name.c_str(), subset, cell(sys, subset, "bleu2").c_str(),
                      cell(sys, subset, "rouge").c_str(), cell(sys, subset, "cider").c_str(),
                      cell(sys, subset, "embedding_f1").c_str(),
                      cell(sys, subset, "accuracy").c_str(), cell(sys, subset, "mrr").c_str());
        os << buf;
      }
      if (sys.contains("repetition_rate")) {
        std::snprintf(buf, sizeof(buf), "  %-26s repetition_rate: %.3f  vocab: %d\n", name.c_str(),
                      sys.at("repetition_rate").get<double>(), sys.at("vocab_size").get<int>());
        os << buf;
      }
    }
    if (report.contains("human")) {
      std::snprintf(buf, sizeof(buf), "  %-26s repetition_rate: %.3f  vocab: %d\n", "human",
                    report.at("human").at("repetition_rate").get<double>(),
                    report.at("human").at("vocab_size").get<int>());
      os << buf;
    }
    return os.str();
  }

  // ---------------- plumbing: stamps, meta lines, state ----------------

  void write_with_meta(const std::string& path, const std::string& body) const {
    write_with_meta(path, body, m_.seed);
  }
  void write_with_meta(const std::string& path, const std::string& body,
                       std::uint64_t seed) const {
    fs::create_directories(fs::path(path).parent_path());
    nlohmann::ordered_json meta;
    meta["__meta__"] = m_.provenance(seed);
    write_file(path, meta.dump() + "\n" + body);
  }

  std::vector<text::ModelInstance> load_instances_meta(const std::string& path) const {
    return instances_from_jsonl(read_file(path));
  }

  void need(const std::string& path, const std::string& stage,
            const std::string& producer) const {
    require(fs::exists(path), "stage " + stage + ": missing input " + path + "; run the " +
                                  producer + " stage first");
  }

  std::uint64_t signature(const std::vector<std::string>& inputs) const {
    std::uint64_t h = m_.manifest_hash;
    for (const auto& p : inputs) {
      h = fnv1a64(p, h);
      if (fs::exists(p)) h = fnv1a64(read_file(p), h);
    }
    return h;
  }

  bool skip_if_unchanged(const std::string& stage, const std::vector<std::string>& inputs,
                         const std::vector<std::string>& outputs) {
    auto stamp_path = out() / ".stamps" / (stage + ".json");
    if (!fs::exists(stamp_path)) return false;
    for (const auto& o : outputs)
      if (!fs::exists(o)) return false;
    auto j = nlohmann::json::parse(read_file(stamp_path.string()));
    bool same = j.value("signature", std::string()) == hex64(signature(inputs));
    if (same) record_state(stage, "skipped");
    return same;
  }

  void stamp(const std::string& stage, const std::vector<std::string>& inputs) const {
    nlohmann::ordered_json j;
    j["signature"] = hex64(signature(inputs));
    write_file((out() / ".stamps" / (stage + ".json")).string(), j.dump() + "\n");
  }

  void record_state(const std::string& stage, const std::string& status) const {
    auto path = out() / "pipeline_state.json";
    nlohmann::ordered_json state;
    if (fs::exists(path)) {
      try {
        state = nlohmann::ordered_json::parse(read_file(path.string()));
      } catch (...) {
        state = nlohmann::ordered_json::object();
      }
    }
    state["manifest_hash"] = hex64(m_.manifest_hash);
    state["stages"][stage] = status;
    write_file(path.string(), state.dump(2) + "\n");
  }

  ExperimentManifest m_;
};

}  // namespace refdial::pipeline
