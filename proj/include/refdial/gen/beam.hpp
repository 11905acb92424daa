#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "refdial/common.hpp"

namespace refdial::gen {

struct BeamHypothesis {
  std::vector<int> tokens;  // emitted tokens, <eos> not included
  double logprob_sum = 0.0;
  bool completed = false;

  // Finalization score; length counts the terminating <eos> step so that a
  // bare <eos> at depth one has length 1.
  double final_score(bool length_normalize) const {
    double len = static_cast<double>(tokens.size() + (completed ? 1 : 0));
    if (len <= 0.0) len = 1.0;
    return length_normalize ? logprob_sum / len : logprob_sum;
  }
};

namespace detail {

inline bool hypothesis_before(const BeamHypothesis& a, const BeamHypothesis& b,
                              bool length_normalize) {
  double sa = a.final_score(length_normalize);
  double sb = b.final_score(length_normalize);
  if (sa != sb) return sa > sb;
  return a.tokens < b.tokens;  // deterministic tie order
}

}  // namespace detail

// Beam search over a stepwise decoder. Model requirements:
//   State initial_state() const-compatible copyable state
//   int start_token(), int eos_token(), int domain_size()
//   std::pair<Eigen::VectorXd, State> step(const State&, int prev_token)
// Tokens with log-probability -inf are never expanded. At each depth every
// extension of every live hypothesis (including the <eos> extension) competes
// for the beam width on cumulative log-probability; surviving <eos>
// hypotheses move to a completed pool and the rest keep expanding. At width 1
// this reduces exactly to stepwise argmax decoding. The best completed
// hypothesis under the finalization score wins; if nothing completed within
// max_len, the best partial is returned with completed = false.
template <typename Model>
BeamHypothesis beam_search(const Model& model, int width, int max_len,
                           bool length_normalize = true) {
  require(width >= 1, "beam_search: width must be >= 1");
  require(max_len >= 1, "beam_search: max_len must be >= 1");

  struct Live {
    BeamHypothesis hyp;
    typename Model::State state;
  };

  std::vector<Live> live;
  live.push_back({BeamHypothesis{}, model.initial_state()});
  std::vector<BeamHypothesis> completed;

  for (int depth = 0; depth < max_len && !live.empty(); ++depth) {
    std::vector<Live> candidates;
    for (const auto& l : live) {
      int prev = l.hyp.tokens.empty() ? model.start_token() : l.hyp.tokens.back();
      auto [logp, next] = model.step(l.state, prev);
      for (int tok = 0; tok < model.domain_size(); ++tok) {
        double lp = logp(tok);
        if (std::isinf(lp)) continue;
        Live ext;
        ext.hyp = l.hyp;
        ext.hyp.logprob_sum += lp;
        if (tok == model.eos_token()) {
          ext.hyp.completed = true;
        } else {
          ext.hyp.tokens.push_back(tok);
          ext.state = next;
        }
        candidates.push_back(std::move(ext));
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Live& a, const Live& b) {
      if (a.hyp.logprob_sum != b.hyp.logprob_sum) return a.hyp.logprob_sum > b.hyp.logprob_sum;
      if (a.hyp.tokens != b.hyp.tokens) return a.hyp.tokens < b.hyp.tokens;
      return a.hyp.completed && !b.hyp.completed;
    });
    if (static_cast<int>(candidates.size()) > width)
      candidates.resize(static_cast<std::size_t>(width));
    live.clear();
    for (auto& c : candidates) {
      if (c.hyp.completed)
        completed.push_back(std::move(c.hyp));
      else
        live.push_back(std::move(c));
    }
  }

  if (!completed.empty()) {
    auto best = std::min_element(completed.begin(), completed.end(),
                                 [&](const BeamHypothesis& a, const BeamHypothesis& b) {
                                   return detail::hypothesis_before(a, b, length_normalize);
                                 });
    return *best;
  }
  // nothing reached <eos>: best partial, flagged via completed = false
  ensure(!live.empty(), "beam_search: no hypotheses at all");
  auto best = std::min_element(live.begin(), live.end(), [&](const Live& a, const Live& b) {
    return detail::hypothesis_before(a.hyp, b.hyp, length_normalize);
  });
  return best->hyp;
}

}  // namespace refdial::gen
