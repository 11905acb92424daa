#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "refdial/ling/profile.hpp"
#include "refdial/ling/stats.hpp"

namespace refdial::ling {

struct SystemAnalysis {
  // per-measure first/later samples
  std::map<std::string, std::vector<double>> first_samples;
  std::map<std::string, std::vector<double>> later_samples;
  // later-only reuse samples
  std::map<std::string, std::vector<double>> reuse_samples;
  int vocab_first = 0;
  int vocab_later = 0;
};

inline SystemAnalysis analyze_system(const std::vector<TaggedUtterance>& utterances,
                                     const PosTagger& tagger) {
  SystemAnalysis a;
  std::set<std::string> vocab_first, vocab_later;
  for (const auto& utt : utterances) {
    auto prof = profile(utt.tokens, utt.tags, utt.chain_position);
    if (prof.empty) continue;
    auto& dest = utt.chain_position == 1 ? a.first_samples : a.later_samples;
    dest["givenness"].push_back(prof.givenness_prop);
    dest["definite"].push_back(prof.definite_prop);
    dest["seen"].push_back(prof.seen_prop);
    dest["indefinite"].push_back(prof.indefinite_prop);
    dest["length"].push_back(prof.length_tokens);
    dest["prop content"].push_back(prof.content_prop);
    dest["prop noun"].push_back(prof.noun_prop);
    dest["prop adj"].push_back(prof.adj_prop);
    dest["prop verb"].push_back(prof.verb_prop);
    dest["ttr"].push_back(prof.ttr);
    auto& vocab = utt.chain_position == 1 ? vocab_first : vocab_later;
    for (const auto& t : utt.tokens) vocab.insert(t);

    if (utt.chain_position > 1) {
      auto prev_tags = tagger.tag(utt.prev_tokens);
      auto r = reuse(utt.prev_tokens, prev_tags, utt.tokens, utt.tags);
      if (r) {
        a.reuse_samples["reuse_c"].push_back(r->reuse_unigrams);
        if (r->has_bigrams) a.reuse_samples["reuse_bigrams_c"].push_back(r->reuse_bigrams);
        a.reuse_samples["within noun"].push_back(r->within_noun);
        a.reuse_samples["within adj"].push_back(r->within_adj);
        a.reuse_samples["within verb"].push_back(r->within_verb);
        if (r->has_bigrams) a.reuse_samples["within nn bigrams"].push_back(r->within_nn_bigrams);
      }
    }
  }
  a.vocab_first = static_cast<int>(vocab_first.size());
  a.vocab_later = static_cast<int>(vocab_later.size());
  return a;
}

inline const std::vector<std::string>& trend_measures() {
  static const std::vector<std::string> m = {"givenness", "definite",     "seen",
                                             "indefinite", "length",      "prop content",
                                             "prop noun",  "prop adj",    "prop verb",
                                             "ttr"};
  return m;
}

inline const std::vector<std::string>& reuse_measures() {
  static const std::vector<std::string> m = {"reuse_c",    "reuse_bigrams_c", "within noun",
                                             "within adj", "within verb",     "within nn bigrams"};
  return m;
}

inline double sample_mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// First-vs-later trends per system plus human-vs-model entrainment
// comparisons, emitted as machine-readable JSON. "human" names the anchor
// system for the reuse comparisons when present.
inline nlohmann::ordered_json profile_report(
    const std::map<std::string, std::vector<TaggedUtterance>>& systems, const PosTagger& tagger) {
  std::map<std::string, SystemAnalysis> analyses;
  for (const auto& [name, utts] : systems) analyses[name] = analyze_system(utts, tagger);

  nlohmann::ordered_json out;
  nlohmann::ordered_json trends = nlohmann::ordered_json::object();
  for (const auto& [name, a] : analyses) {
    nlohmann::ordered_json sys = nlohmann::ordered_json::object();
    for (const auto& measure : trend_measures()) {
      nlohmann::ordered_json row;
      auto fit = a.first_samples.find(measure);
      auto lit = a.later_samples.find(measure);
      const std::vector<double> empty;
      const auto& first = fit == a.first_samples.end() ? empty : fit->second;
      const auto& later = lit == a.later_samples.end() ? empty : lit->second;
      row["first_mean"] = sample_mean(first);
      row["later_mean"] = sample_mean(later);
      if (first.size() >= 2 && later.size() >= 2) {
        auto st = compare_groups(first, later);
        if (st.cohen_d)
          row["d"] = *st.cohen_d;
        else
          row["d"] = nullptr;
        row["p"] = st.p;
        row["stars"] = st.stars;
      }
      sys[measure] = row;
    }
    sys["vocabulary"] = {{"first", a.vocab_first}, {"later", a.vocab_later}};
    trends[name] = sys;
  }
  out["trends"] = trends;

  nlohmann::ordered_json entrainment = nlohmann::ordered_json::object();
  auto human = analyses.find("human");
  for (const auto& [name, a] : analyses) {
    nlohmann::ordered_json sys = nlohmann::ordered_json::object();
    for (const auto& measure : reuse_measures()) {
      nlohmann::ordered_json row;
      auto it = a.reuse_samples.find(measure);
      const std::vector<double> empty;
      const auto& mine = it == a.reuse_samples.end() ? empty : it->second;
      row["mean"] = sample_mean(mine);
      if (name != "human" && human != analyses.end()) {
        auto hit = human->second.reuse_samples.find(measure);
        if (hit != human->second.reuse_samples.end() && hit->second.size() >= 2 &&
            mine.size() >= 2) {
          auto st = compare_groups(hit->second, mine);
          if (st.cohen_d)
            row["d_vs_human"] = *st.cohen_d;
          else
            row["d_vs_human"] = nullptr;
          row["p_vs_human"] = st.p;
          row["stars"] = st.stars;
        }
      }
      sys[measure] = row;
    }
    entrainment[name] = sys;
  }
  out["entrainment"] = entrainment;
  return out;
}

// Plain-text rendering of the trends / entrainment tables.
inline std::string render_profile_report(const nlohmann::ordered_json& report) {
  std::ostringstream os;
  os << "First vs later trends\n";
  os << "---------------------\n";
  for (const auto& [name, sys] : report.at("trends").items()) {
    os << "[" << name << "]\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "  %-14s %10s %10s %8s %6s\n", "measure", "first", "later",
                  "d", "sig");
    os << buf;
    for (const auto& [measure, row] : sys.items()) {
      if (measure == "vocabulary") continue;
      std::string d = row.contains("d") && !row.at("d").is_null()
                          ? std::to_string(row.at("d").get<double>()).substr(0, 6)
                          : "-";
      std::snprintf(buf, sizeof(buf), "  %-14s %10.3f %10.3f %8s %6s\n", measure.c_str(),
                    row.at("first_mean").get<double>(), row.at("later_mean").get<double>(),
                    d.c_str(), row.value("stars", std::string()).c_str());
      os << buf;
    }
    os << "  vocabulary     first: " << sys.at("vocabulary").at("first")
       << "  later: " << sys.at("vocabulary").at("later") << "\n";
  }
  os << "\nLexical entrainment (later mentions)\n";
  os << "------------------------------------\n";
  for (const auto& [name, sys] : report.at("entrainment").items()) {
    os << "[" << name << "]\n";
    for (const auto& [measure, row] : sys.items()) {
      char buf[160];
      std::string d = row.contains("d_vs_human") && !row.at("d_vs_human").is_null()
                          ? std::to_string(row.at("d_vs_human").get<double>()).substr(0, 6)
                          : "-";
      std::snprintf(buf, sizeof(buf), "  %-18s %8.3f  d_vs_human: %6s %s\n", measure.c_str(),
                    row.at("mean").get<double>(), d.c_str(),
                    row.value("stars", std::string()).c_str());
      os << buf;
    }
  }
  return os.str();
}

}  // namespace refdial::ling
