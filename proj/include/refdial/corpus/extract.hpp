#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "refdial/corpus/gamelog.hpp"
#include "refdial/corpus/meteor.hpp"
#include "refdial/corpus/refset.hpp"
#include "refdial/corpus/similarity.hpp"
#include "refdial/text/stopwords.hpp"
#include "refdial/text/tokenizer.hpp"

namespace refdial::corpus {

struct ChainEntry {
  int round_index = 0;
  int message_id = 0;
  std::string text;
  double score = 0.0;
};

struct ReferenceChain {
  std::string game_id;
  std::string image_id;
  std::vector<ChainEntry> entries;  // round indices strictly increasing
};

struct Segment {
  int round_index = 0;
  std::vector<Message> candidates;
};

inline std::vector<std::string> content_tokens(const std::string& text) {
  std::vector<std::string> out;
  for (auto& tok : text::tokenize(text))
    if (!text::is_stopword(tok)) out.push_back(std::move(tok));
  return out;
}

// First round in which both speakers have the image in view; nullopt if the
// image is never co-visible.
inline std::optional<int> first_covisible_round(const GameLog& game, const std::string& image_id) {
  for (const auto& r : game.rounds) {
    bool all = !r.views.empty();
    for (const auto& [sp, v] : r.views)
      all = all && std::find(v.begin(), v.end(), image_id) != v.end();
    if (all) return r.round_index;
  }
  return std::nullopt;
}

// Earliest common-selection of the image in the round, if any.
inline std::optional<SelectionEvent> first_common_selection(const RoundLog& round,
                                                            const std::string& image_id) {
  std::optional<SelectionEvent> best;
  for (const auto& s : round.selections) {
    if (s.image_id != image_id || s.label != SelectionEvent::Label::kCommon) continue;
    if (!best || s.position < best->position) best = s;
  }
  return best;
}

// Candidate referring utterances for the image, one segment per round with a
// common-selection, starting at the first co-visible round. Within a round,
// candidates are the messages preceding the selection event whose speaker has
// the image in view.
inline std::vector<Segment> extract_segments(const GameLog& game, const std::string& image_id) {
  require(game.known_images().count(image_id) > 0,
          "game " + game.game_id + ": unknown image " + image_id);
  auto covis = first_covisible_round(game, image_id);
  if (!covis) return {};
  std::vector<Segment> segments;
  for (const auto& round : game.rounds) {
    if (round.round_index < *covis) continue;
    auto sel = first_common_selection(round, image_id);
    if (!sel) continue;
    Segment seg;
    seg.round_index = round.round_index;
    for (const auto& m : round.messages) {
      if (m.message_id > sel->position) break;
      if (round.in_view(m.speaker, image_id)) seg.candidates.push_back(m);
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

// Candidate-utterance score: best caption-similarity F1 over the reference
// captions (static plus dialogue-dynamic) plus the scene-graph token F-mean.
// Images without scene-graph annotation score on captions alone. Both sides
// are stopword-filtered before comparison.
inline double score_utterance(const std::string& utterance, const ReferenceSet& refset,
                              const std::vector<std::set<std::string>>& distractor_vg,
                              const CaptionScorer& scorer) {
  auto cand = content_tokens(utterance);
  std::vector<std::vector<std::string>> refs;
  for (const auto& cap : refset.all_captions()) refs.push_back(content_tokens(cap));
  double caption_component = scorer.best_f1(cand, refs);
  double meteor_component = 0.0;
  if (!refset.vg_tokens.empty()) {
    std::set<std::string> reference = refset.vg_tokens;
    for (const auto& d : distractor_vg)
      for (const auto& t : d) reference.erase(t);
    meteor_component = meteor_fmean(cand, reference);
  }
  return caption_component + meteor_component;
}

struct ScoredCandidate {
  int message_id = 0;
  std::string text;
  double score = 0.0;
};

// Per-round cross-image selection. Keeps the top-n candidates per image,
// drops a (utterance, image) pair when the same utterance scores strictly
// higher for another image, then picks the best remainder per image. Ties
// break toward the earlier message.
inline std::map<std::string, ScoredCandidate> select_round_utterances(
    const std::map<std::string, std::vector<ScoredCandidate>>& per_image, int top_n) {
  ensure(top_n >= 1, "select_round_utterances: top_n must be >= 1");
  auto better = [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.message_id < b.message_id;
  };
  std::map<std::string, std::vector<ScoredCandidate>> shortlists;
  for (const auto& [image, cands] : per_image) {
    auto sorted = cands;
    std::sort(sorted.begin(), sorted.end(), better);
    if (static_cast<int>(sorted.size()) > top_n) sorted.resize(static_cast<std::size_t>(top_n));
    shortlists[image] = std::move(sorted);
  }
  // Best score each utterance attains for any image in this round.
  std::map<int, double> best_elsewhere;
  for (const auto& [image, cands] : shortlists)
    for (const auto& c : cands) {
      auto it = best_elsewhere.find(c.message_id);
      if (it == best_elsewhere.end() || c.score > it->second) best_elsewhere[c.message_id] = c.score;
    }
  std::map<std::string, ScoredCandidate> selected;
  for (const auto& [image, cands] : shortlists) {
    std::optional<ScoredCandidate> pick;
    for (const auto& c : cands) {
      if (c.score < best_elsewhere.at(c.message_id)) continue;  // claimed by another image
      if (!pick || better(c, *pick)) pick = c;
    }
    if (pick) selected[image] = *pick;
  }
  return selected;
}

struct ExtractorConfig {
  int top_n = 4;
};

// Chain extraction over one game. Dynamic captions accumulate per image as
// rounds complete, so selection in round k only sees utterances chosen in
// rounds < k.
inline std::vector<ReferenceChain> extract_chains(const GameLog& game, const ReferenceStore& store,
                                                  const CaptionScorer& scorer,
                                                  const ExtractorConfig& cfg = {}) {
  std::map<std::string, ReferenceSet> refsets;
  std::map<std::string, std::vector<ChainEntry>> chains;

  for (const auto& round : game.rounds) {
    // Images commonly selected this round that already reached co-visibility.
    std::set<std::string> images;
    for (const auto& s : round.selections)
      if (s.label == SelectionEvent::Label::kCommon) images.insert(s.image_id);

    // Scene-graph material of every other image visible to either speaker.
    std::set<std::string> visible;
    for (const auto& [sp, v] : round.views) visible.insert(v.begin(), v.end());

    std::map<std::string, std::vector<ScoredCandidate>> per_image;
    for (const auto& image : images) {
      auto covis = first_covisible_round(game, image);
      if (!covis || round.round_index < *covis) continue;
      auto sel = first_common_selection(round, image);
      ensure(sel.has_value(), "extract_chains: selection disappeared");
      if (!store.has_captions(image)) continue;  // no reference material, cannot score
      auto& refset = refsets.try_emplace(image, ReferenceSet{}).first->second;
      if (refset.image_id.empty()) refset = store.make(image);

      std::vector<std::set<std::string>> distractor_vg;
      for (const auto& other : visible) {
        if (other == image) continue;
        auto toks = store.vg_retained(other);
        if (!toks.empty()) distractor_vg.push_back(std::move(toks));
      }

      for (const auto& m : round.messages) {
        if (m.message_id > sel->position) break;
        if (!round.in_view(m.speaker, image)) continue;
        per_image[image].push_back(
            {m.message_id, m.text, score_utterance(m.text, refset, distractor_vg, scorer)});
      }
    }

    for (const auto& [image, pick] : select_round_utterances(per_image, cfg.top_n)) {
      chains[image].push_back({round.round_index, pick.message_id, pick.text, pick.score});
      refsets.at(image).dynamic_captions.push_back(pick.text);
    }
  }

  std::vector<ReferenceChain> out;
  for (auto& [image, entries] : chains) {
    if (entries.empty()) continue;
    out.push_back({game.game_id, image, std::move(entries)});
  }
  return out;
}

}  // namespace refdial::corpus
