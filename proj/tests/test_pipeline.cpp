#include <catch2/catch_amalgamated.hpp>

#include "refdial/pipeline/stages.hpp"

#include <filesystem>
#include <map>

using namespace refdial;
using namespace refdial::pipeline;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = REFDIAL_FIXTURE_DIR;

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("refdial_pipe_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentManifest fixture_manifest(const fs::path& out_dir) {
  return ExperimentManifest::load(kFixtures + "/manifest.json", out_dir.string());
}

// Every regular file under the output tree except logs and stamps.
std::map<std::string, std::string> collect_outputs(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    auto rel = fs::relative(entry.path(), root).string();
    if (entry.path().extension() == ".log") continue;
    if (rel.find(".stamps") != std::string::npos) continue;
    if (rel == "pipeline_state.json") continue;
    files[rel] = read_file(entry.path().string());
  }
  return files;
}

}  // namespace

TEST_CASE("manifest loading") {
  SECTION("relative paths resolve against the manifest directory") {
    auto m = fixture_manifest(fresh_dir("manifest"));
    REQUIRE(fs::exists(m.games));
    REQUIRE(fs::exists(m.captions));
    REQUIRE(m.seeds == std::vector<std::uint64_t>{11, 12});
    REQUIRE(m.manifest_hash != 0);
  }
  SECTION("missing referenced paths are input errors") {
    auto dir = fresh_dir("manifest_bad");
    write_file((dir / "bad.json").string(),
               R"({"games":"nope.jsonl","captions":"c.json","features":"f.txt"})");
    REQUIRE_THROWS_AS(ExperimentManifest::load((dir / "bad.json").string()), InputError);
  }
}

TEST_CASE("full fixture pipeline") {
  auto out_dir = fresh_dir("full");
  Pipeline pipe(fixture_manifest(out_dir));
  pipe.run({});

  SECTION("all stage outputs exist") {
    REQUIRE(fs::exists(pipe.chains_path()));
    REQUIRE(fs::exists(pipe.vocab_path()));
    REQUIRE(fs::exists(pipe.gen_split_path("train")));
    REQUIRE(fs::exists(pipe.res_split_path("test")));
    REQUIRE(fs::exists(pipe.gen_checkpoint_path("reref", 11)));
    REQUIRE(fs::exists(pipe.gen_checkpoint_path("reref", 12)));
    REQUIRE(fs::exists(pipe.res_checkpoint_path("resolver", 11)));
    REQUIRE(fs::exists(pipe.hyps_path("reref", 11)));
    REQUIRE(fs::exists(pipe.rankings_path("gold", 11)));
    REQUIRE(fs::exists(pipe.rankings_path("reref", 12)));
    REQUIRE(fs::exists(pipe.evaluate_report_path()));
    REQUIRE(fs::exists(pipe.analyze_report_path()));
    REQUIRE(fs::exists(out_dir / "report.txt"));
  }
  SECTION("artifacts embed the manifest hash") {
    auto m = pipe.manifest();
    auto needle = hex64(m.manifest_hash);
    REQUIRE(read_file(pipe.chains_path()).find("__meta__") != std::string::npos);
    REQUIRE(read_file(pipe.evaluate_report_path()).find(needle) != std::string::npos);
    REQUIRE(read_file((out_dir / "report.txt").string()).find(needle) != std::string::npos);
    auto ck = nn::load_checkpoint(pipe.gen_checkpoint_path("reref", 11));
    REQUIRE(ck.header.at("provenance").at("manifest_hash").get<std::string>() == needle);
  }
  SECTION("datasets carry six-image contexts and causal histories") {
    auto insts = load_instances(pipe.res_split_path("test"));
    REQUIRE_FALSE(insts.empty());
    for (const auto& inst : insts) {
      REQUIRE(inst.context_ids.size() == 6);
      REQUIRE(inst.context_ids[static_cast<std::size_t>(inst.target_pos)] == inst.image_id);
      for (const auto& h : inst.candidate_histories)
        if (h) REQUIRE(h->message_id < inst.message_id);
      if (inst.is_first()) {
        REQUIRE(inst.source_tokens == std::vector<std::string>{text::kNohsTok});
        // a first mention's own target never has history
        auto& own = inst.candidate_histories[static_cast<std::size_t>(inst.target_pos)];
        REQUIRE_FALSE(own.has_value());
      }
    }
  }
  SECTION("vocabulary comes from the train split only") {
    auto vocab = text::Vocabulary::parse(read_file(pipe.vocab_path()));
    auto full = text::Vocabulary::parse(read_file(pipe.vocab_full_path()));
    REQUIRE(vocab.size() >= 6);
    REQUIRE(full.size() > vocab.size());
    // "runway" appears only in the test split, so the train vocab lacks it
    REQUIRE_FALSE(vocab.contains("runway"));
    REQUIRE(full.contains("runway"));
  }
  SECTION("hypotheses cover the test split with recorded chain positions") {
    auto hyps_text = read_file(pipe.hyps_path("reref", 11));
    auto test = load_instances(pipe.gen_split_path("test"));
    long lines = 0;
    for (const auto& line : split_lines(hyps_text))
      if (!line.empty() && line.find("__meta__") == std::string::npos) ++lines;
    REQUIRE(lines == static_cast<long>(test.size()));
  }
  SECTION("rerunning the same pipeline skips every stage") {
    auto before = collect_outputs(out_dir);
    Pipeline again(fixture_manifest(out_dir));
    again.run({});
    auto state = nlohmann::json::parse(read_file((out_dir / "pipeline_state.json").string()));
    for (const auto& [stage, status] : state.at("stages").items())
      REQUIRE(status.get<std::string>() == "skipped");
    REQUIRE(collect_outputs(out_dir) == before);
  }
  SECTION("changing an upstream input re-runs dependent stages") {
    // touch the chains file with different content: prep must re-run
    auto chains = read_file(pipe.chains_path());
    write_file(pipe.chains_path(), chains + "\n");
    Pipeline again(fixture_manifest(out_dir));
    again.run({"prep"});
    auto state = nlohmann::json::parse(read_file((out_dir / "pipeline_state.json").string()));
    REQUIRE(state.at("stages").at("prep").get<std::string>() == "completed");
  }
}

TEST_CASE("pipeline determinism: two runs produce byte-identical outputs") {
  auto dir_a = fresh_dir("det_a");
  auto dir_b = fresh_dir("det_b");
  Pipeline a(fixture_manifest(dir_a));
  a.run({});
  Pipeline b(fixture_manifest(dir_b));
  b.run({});
  auto fa = collect_outputs(dir_a);
  auto fb = collect_outputs(dir_b);
  REQUIRE(fa.size() == fb.size());
  for (const auto& [rel, content] : fa) {
    INFO(rel);
    REQUIRE(fb.count(rel) == 1);
    REQUIRE(content == fb.at(rel));
  }
}

TEST_CASE("missing upstream artifacts name the absent stage") {
  auto out_dir = fresh_dir("missing");
  Pipeline pipe(fixture_manifest(out_dir));
  try {
    pipe.run({"prep"});
    FAIL("expected an input error");
  } catch (const InputError& e) {
    REQUIRE(std::string(e.what()).find("extract") != std::string::npos);
  }
  auto state = nlohmann::json::parse(read_file((out_dir / "pipeline_state.json").string()));
  REQUIRE(state.at("stages").at("prep").get<std::string>() == "failed");
}

TEST_CASE("analyze-only rerun regenerates reports from precomputed outputs") {
  auto out_dir = fresh_dir("analyze_only");
  Pipeline pipe(fixture_manifest(out_dir));
  pipe.run({});
  fs::remove(pipe.analyze_report_path());
  fs::remove(out_dir / ".stamps" / "analyze.json");
  Pipeline again(fixture_manifest(out_dir));
  again.run({"analyze"});
  REQUIRE(fs::exists(pipe.analyze_report_path()));
  auto report = nlohmann::json::parse(read_file(pipe.analyze_report_path()));
  REQUIRE(report.contains("trends"));
  REQUIRE(report.at("trends").contains("human"));
  REQUIRE(report.at("trends").contains("reref"));
  REQUIRE(report.contains("compounds"));
}

TEST_CASE("checkpoint vocabulary hash mismatch refuses to decode") {
  auto out_dir = fresh_dir("vocab_mismatch");
  Pipeline pipe(fixture_manifest(out_dir));
  pipe.run({"extract", "prep", "train-gen"});
  // corrupt the vocabulary: hash changes, generate must refuse
  auto vocab_text = read_file(pipe.vocab_path());
  write_file(pipe.vocab_path(), vocab_text + "zzzz\n");
  Pipeline again(fixture_manifest(out_dir));
  try {
    again.run({"generate"});
    FAIL("expected a vocabulary hash mismatch");
  } catch (const InputError& e) {
    REQUIRE(std::string(e.what()).find("hash") != std::string::npos);
  }
}
