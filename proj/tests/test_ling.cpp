#include <catch2/catch_amalgamated.hpp>

#include "refdial/ling/postag.hpp"
#include "refdial/ling/profile.hpp"
#include "refdial/ling/report.hpp"
#include "refdial/ling/stats.hpp"
#include "refdial/rng.hpp"
#include "refdial/text/tokenizer.hpp"

using namespace refdial;
using namespace refdial::ling;
using Catch::Matchers::WithinAbs;

namespace {

const LexiconSuffixTagger kTagger;

LinguisticProfile prof(const std::string& s, int pos = 1) {
  auto toks = text::tokenize(s);
  return profile(toks, kTagger.tag(toks), pos);
}

std::optional<ReuseProfile> reuse_of(const std::string& prev, const std::string& cur) {
  auto p = text::tokenize(prev);
  auto c = text::tokenize(cur);
  return reuse(p, kTagger.tag(p), c, kTagger.tag(c));
}

}  // namespace

TEST_CASE("linguistic profile") {
  SECTION("the same dog again: givenness 3/4") {
    auto p = prof("the same dog again");
    REQUIRE_THAT(p.givenness_prop, WithinAbs(0.75, 1e-12));
    REQUIRE_THAT(p.definite_prop, WithinAbs(0.25, 1e-12));
    REQUIRE_THAT(p.seen_prop, WithinAbs(0.5, 1e-12));  // same, again
    REQUIRE(p.indefinite_prop == 0.0);
  }
  SECTION("the dog the dog: TTR 0.5") {
    auto p = prof("the dog the dog");
    REQUIRE_THAT(p.ttr, WithinAbs(0.5, 1e-12));
  }
  SECTION("a white dog: indefinite and PoS proportions over content tokens") {
    auto p = prof("a white dog runs");
    REQUIRE_THAT(p.indefinite_prop, WithinAbs(0.25, 1e-12));
    REQUIRE(p.length_tokens == 4);
    REQUIRE(p.length_content == 3);  // white, dog, runs
    REQUIRE_THAT(p.content_prop, WithinAbs(0.75, 1e-12));
    REQUIRE_THAT(p.noun_prop, WithinAbs(1.0 / 3.0, 1e-12));
    REQUIRE_THAT(p.adj_prop, WithinAbs(1.0 / 3.0, 1e-12));
    REQUIRE_THAT(p.verb_prop, WithinAbs(1.0 / 3.0, 1e-12));
  }
  SECTION("empty utterance is flagged with zeroed fields") {
    auto p = prof("");
    REQUIRE(p.empty);
    REQUIRE(p.length_tokens == 0);
    REQUIRE(p.givenness_prop == 0.0);
  }
  SECTION("all proportions stay in [0,1] on random token soup") {
    Rng rng = make_rng(7);
    std::vector<std::string> pool = {"the", "a",    "dog",  "guy",   "same", "again",
                                     "see", "white", "runs", "camera", "!",    "one"};
    for (int trial = 0; trial < 300; ++trial) {
      std::uniform_int_distribution<int> len(1, 10);
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      std::vector<std::string> toks;
      int n = len(rng);
      for (int i = 0; i < n; ++i) toks.push_back(pool[pick(rng)]);
      auto p = profile(toks, kTagger.tag(toks));
      for (double v : {p.givenness_prop, p.definite_prop, p.seen_prop, p.indefinite_prop,
                       p.content_prop, p.noun_prop, p.adj_prop, p.verb_prop}) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
      }
      REQUIRE(p.ttr > 0.0);
      REQUIRE(p.ttr <= 1.0);
    }
  }
}

TEST_CASE("reuse") {
  SECTION("guy with camera -> camera guy reuses every content token") {
    auto r = reuse_of("guy with camera", "camera guy");
    REQUIRE(r.has_value());
    REQUIRE_THAT(r->reuse_unigrams, WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(r->within_noun, WithinAbs(1.0, 1e-12));
  }
  SECTION("disjoint utterances reuse nothing") {
    auto r = reuse_of("pink bowls with rice", "tattoo guy");
    REQUIRE(r->reuse_unigrams == 0.0);
  }
  SECTION("reuse(u, u) = 1 including bigrams") {
    auto r = reuse_of("white dog on red chair", "white dog on red chair");
    REQUIRE_THAT(r->reuse_unigrams, WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(r->reuse_bigrams, WithinAbs(1.0, 1e-12));
  }
  SECTION("reuse(u, u) = 1 for random utterances with content") {
    Rng rng = make_rng(11);
    std::vector<std::string> pool = {"dog", "guy", "camera", "white", "runway", "basket",
                                     "the", "a",   "with"};
    for (int trial = 0; trial < 1000; ++trial) {
      std::uniform_int_distribution<int> len(1, 8);
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      std::vector<std::string> toks;
      int n = len(rng);
      for (int i = 0; i < n; ++i) toks.push_back(pool[pick(rng)]);
      auto tags = kTagger.tag(toks);
      auto r = reuse(toks, tags, toks, tags);
      bool has_content = false;
      for (const auto& t : toks) has_content = has_content || !text::is_stopword(t);
      if (!has_content) {
        REQUIRE_FALSE(r.has_value());
      } else {
        REQUIRE(r.has_value());
        REQUIRE_THAT(r->reuse_unigrams, WithinAbs(1.0, 1e-12));
      }
    }
  }
  SECTION("multiset counting: duplicates only reuse up to the previous count") {
    // prev has one "dog"; current has two -> 1 of 2 content tokens reused
    auto r = reuse_of("a dog", "dog dog");
    REQUIRE_THAT(r->reuse_unigrams, WithinAbs(0.5, 1e-12));
  }
  SECTION("within-reused PoS shares sum to at most 1") {
    auto r = reuse_of("white dog runs fast", "white dog runs");
    REQUIRE(r->within_noun + r->within_adj + r->within_verb <= 1.0 + 1e-12);
  }
  SECTION("no content tokens in the current utterance -> undefined") {
    REQUIRE_FALSE(reuse_of("guy with camera", "the of and").has_value());
  }
  SECTION("bigrams are formed over the content subsequence") {
    // content of prev: guy camera; current "guy camera" matches the bigram
    // even though "with" intervened in the previous mention
    auto r = reuse_of("guy with camera", "guy camera");
    REQUIRE_THAT(r->reuse_bigrams, WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("noun-noun compounds") {
  auto make = [](const std::string& text, const std::string& prev, int pos) {
    TaggedUtterance u;
    u.tokens = text::tokenize(text);
    u.tags = kTagger.tag(u.tokens);
    u.prev_tokens = text::tokenize(prev);
    u.chain_position = pos;
    return u;
  };

  SECTION("camera guy after guy with camera is a reuse compound") {
    auto report = nn_compounds({make("camera guy", "guy with camera", 2)});
    REQUIRE(report.candidates.size() == 1);
    REQUIRE(report.candidates[0].reuse_case);
    REQUIRE_THAT(report.nn_bigram_props[0], WithinAbs(1.0, 1e-12));
  }
  SECTION("tattoo guy after headband guy is a non-reuse compound") {
    auto report = nn_compounds({make("tattoo guy ?", "do you have headband guy ?", 3)});
    REQUIRE(report.candidates.size() == 1);
    REQUIRE_FALSE(report.candidates[0].reuse_case);
  }
  SECTION("no adjacent noun pairs gives proportion 0") {
    auto report = nn_compounds({make("the white dog runs", "", 1)});
    REQUIRE(report.nn_bigram_props[0] == 0.0);
    REQUIRE(report.candidates.empty());
  }
  SECTION("long utterances are not flagged as candidates") {
    auto report =
        nn_compounds({make("i think the camera guy is on the left side", "guy with camera", 2)});
    REQUIRE(report.candidates.empty());
    REQUIRE(report.nn_bigram_props[0] > 0.0);
  }
  SECTION("first mentions are never candidates") {
    auto report = nn_compounds({make("camera guy", "", 1)});
    REQUIRE(report.candidates.empty());
  }
}

TEST_CASE("two-sample comparison") {
  SECTION("samples [1,2,3] vs [2,3,4] give d = -1 and the scipy p-value") {
    auto st = compare_groups({1, 2, 3}, {2, 3, 4});
    REQUIRE(st.cohen_d.has_value());
    REQUIRE_THAT(*st.cohen_d, WithinAbs(-1.0, 1e-12));
    REQUIRE_THAT(st.t, WithinAbs(-1.2247448714, 1e-9));
    REQUIRE_THAT(st.p, WithinAbs(0.2878641347, 1e-8));
    REQUIRE(st.stars.empty());
  }
  SECTION("identical groups: d = 0, p = 1") {
    auto st = compare_groups({1, 2, 3}, {1, 2, 3});
    REQUIRE_THAT(*st.cohen_d, WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(st.p, WithinAbs(1.0, 1e-12));
  }
  SECTION("zero pooled variance: d undefined") {
    auto st = compare_groups({5, 5, 5}, {5, 5, 5});
    REQUIRE_FALSE(st.cohen_d.has_value());
    REQUIRE_THAT(st.p, WithinAbs(1.0, 1e-12));
    auto st2 = compare_groups({5, 5}, {7, 7});
    REQUIRE_FALSE(st2.cohen_d.has_value());
    REQUIRE(st2.p == 0.0);
  }
  SECTION("p-values match scipy on further cases") {
    REQUIRE_THAT(compare_groups({1, 2, 3, 4}, {3, 4, 5, 6}).p, WithinAbs(0.0709876543, 1e-8));
    REQUIRE_THAT(compare_groups({0.1, 0.2, 0.15, 0.3}, {0.5, 0.4, 0.45}).p,
                 WithinAbs(0.0053950621, 1e-8));
  }
  SECTION("antisymmetry of d, symmetry of p under group swap") {
    Rng rng = make_rng(3);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> a, b;
      for (int i = 0; i < 5; ++i) a.push_back(d(rng));
      for (int i = 0; i < 7; ++i) b.push_back(d(rng));
      auto ab = compare_groups(a, b);
      auto ba = compare_groups(b, a);
      REQUIRE_THAT(*ab.cohen_d, WithinAbs(-*ba.cohen_d, 1e-12));
      REQUIRE_THAT(ab.p, WithinAbs(ba.p, 1e-12));
    }
  }
  SECTION("star coding") {
    REQUIRE(significance_stars(0.0005) == "***");
    REQUIRE(significance_stars(0.002) == "**");
    REQUIRE(significance_stars(0.008) == "*");
    REQUIRE(significance_stars(0.02).empty());
  }
}

TEST_CASE("profile report") {
  auto utt = [](const std::string& text, const std::string& prev, int pos) {
    TaggedUtterance u;
    u.tokens = text::tokenize(text);
    u.tags = kTagger.tag(u.tokens);
    u.prev_tokens = text::tokenize(prev);
    u.chain_position = pos;
    return u;
  };

  SECTION("synthetic corpus with designed marker frequencies") {
    // firsts: givenness 0, indefinite 1/4; laters: givenness 1/2
    std::map<std::string, std::vector<TaggedUtterance>> systems;
    systems["human"] = {
        utt("a white dog here", "", 1),
        utt("a guy with camera", "", 1),
        utt("the dog again", "a white dog here", 2),
        utt("the same guy", "a guy with camera", 2),
    };
    auto report = profile_report(systems, kTagger);
    auto& human = report["trends"]["human"];
    REQUIRE_THAT(human["givenness"]["first_mean"].get<double>(), WithinAbs(0.0, 1e-12));
    // later givenness: "the dog again" 2/3, "the same guy" 2/3
    REQUIRE_THAT(human["givenness"]["later_mean"].get<double>(), WithinAbs(2.0 / 3.0, 1e-12));
    REQUIRE_THAT(human["indefinite"]["first_mean"].get<double>(), WithinAbs(0.25, 1e-12));
    REQUIRE_THAT(human["length"]["first_mean"].get<double>(), WithinAbs(4.0, 1e-12));
    REQUIRE_THAT(human["length"]["later_mean"].get<double>(), WithinAbs(3.0, 1e-12));
    REQUIRE(human["vocabulary"]["first"].get<int>() == 7);
    // reuse means exist for the human system
    REQUIRE(report["entrainment"]["human"]["reuse_c"]["mean"].get<double>() > 0.0);
  }
  SECTION("model columns carry a comparison against the human anchor") {
    std::map<std::string, std::vector<TaggedUtterance>> systems;
    systems["human"] = {
        utt("a white dog", "", 1),
        utt("the dog again", "a white dog", 2),
        utt("a pink bowl", "", 1),
        utt("the bowl again", "a pink bowl", 2),
        utt("the camera guy", "guy with a camera", 2),
    };
    systems["reref"] = {
        utt("a dog", "", 1),
        utt("dog again", "a dog", 2),
        utt("bowl", "a pink bowl", 2),
        utt("camera guy", "guy with a camera", 2),
    };
    auto report = profile_report(systems, kTagger);
    REQUIRE(report["entrainment"]["reref"]["reuse_c"].contains("d_vs_human"));
    // single-system report degenerates cleanly
    std::map<std::string, std::vector<TaggedUtterance>> one;
    one["human"] = systems["human"];
    auto single = profile_report(one, kTagger);
    REQUIRE(single["trends"].size() == 1);
    REQUIRE_FALSE(single["entrainment"]["human"]["reuse_c"].contains("d_vs_human"));
    // rendering smoke check
    auto text_render = render_profile_report(report);
    REQUIRE(text_render.find("reuse_c") != std::string::npos);
    REQUIRE(text_render.find("[human]") != std::string::npos);
  }
}
