#pragma once

#include <optional>
#include <string>
#include <vector>

#include "refdial/rng.hpp"
#include "refdial/text/tokenizer.hpp"
#include "refdial/text/vocab.hpp"

namespace refdial::text {

// The last prior mention of a candidate image; the message id keys the
// embedding cache.
struct CandidateHistory {
  std::string text;
  int message_id = -1;
};

// One model-ready instance: a chain entry plus the visual context it was
// produced in. Shared by the generation and resolution pipelines.
struct ModelInstance {
  std::string game_id;
  std::string image_id;
  int round_index = 0;
  int message_id = 0;
  int chain_position = 0;  // 1-based; 1 == first mention
  std::string split;

  std::vector<std::string> source_tokens;  // previous utterance or {<nohs>}
  std::vector<std::string> target_tokens;  // current utterance (no sos/eos)

  std::vector<std::string> context_ids;  // the 6 candidate images
  int target_pos = 0;                    // index of the target within context_ids

  // Per candidate: last utterance referring to it strictly before this one.
  std::vector<std::optional<CandidateHistory>> candidate_histories;

  // All utterances of this instance's chain, used as embedding-score
  // references and for the Later analyses.
  std::vector<std::vector<std::string>> chain_refs;

  bool is_first() const { return chain_position == 1; }
};

struct EncodedInstance {
  std::vector<int> source;               // base-vocab ids (OOV -> <unk>)
  std::vector<int> source_extended;      // extended-vocab ids for the copy scatter
  ExtendedVocabulary ext;
  std::vector<int> target_in;            // <sos> t1 .. tn
  std::vector<int> target_out;           // t1 .. tn <eos>
  std::vector<int> target_out_extended;  // target_out with copyable OOVs at temp indices
};

inline EncodedInstance encode_instance(const ModelInstance& inst, const Vocabulary& vocab) {
  EncodedInstance e;
  const auto& src = inst.source_tokens;
  ensure(!src.empty(), "encode_instance: source must be nonempty (<nohs> when no history)");
  for (const auto& t : src) e.source.push_back(vocab.index_of(t));
  auto ce = extend_for_copy(src, vocab);
  e.ext = std::move(ce.ext);
  e.source_extended = std::move(ce.source_extended);

  e.target_in.push_back(kSosId);
  for (const auto& t : inst.target_tokens) {
    int idx = vocab.index_of(t);
    e.target_in.push_back(idx);
    e.target_out.push_back(idx);
    e.target_out_extended.push_back(idx == kUnkId ? e.ext.extended_index(t) : idx);
  }
  e.target_out.push_back(kEosId);
  e.target_out_extended.push_back(kEosId);
  return e;
}

// Uniformly permutes the candidate images of one instance, keeping the
// target position and per-candidate histories consistent.
inline void shuffle_context(ModelInstance& inst, Rng& rng) {
  const int n = static_cast<int>(inst.context_ids.size());
  auto perm = random_permutation(rng, n);  // new_pos = perm[old_pos]
  std::vector<std::string> ids(inst.context_ids.size());
  std::vector<std::optional<CandidateHistory>> hist(inst.context_ids.size());
  for (int old_pos = 0; old_pos < n; ++old_pos) {
    ids[static_cast<std::size_t>(perm[old_pos])] = inst.context_ids[static_cast<std::size_t>(old_pos)];
    if (!inst.candidate_histories.empty())
      hist[static_cast<std::size_t>(perm[old_pos])] =
          inst.candidate_histories[static_cast<std::size_t>(old_pos)];
  }
  inst.context_ids = std::move(ids);
  if (!inst.candidate_histories.empty()) inst.candidate_histories = std::move(hist);
  inst.target_pos = perm[inst.target_pos];
}

enum class ShuffleMode { kOnce, kPerEpoch };

// Deterministic: the permutation of instance i depends only on (seed, epoch, i).
// Generation data is shuffled once during preparation; resolution data is
// reshuffled at the start of every training epoch.
inline void shuffle_contexts(std::vector<ModelInstance>& dataset, std::uint64_t seed,
                             std::uint64_t epoch = 0) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    Rng rng = derive_rng(seed, 0x53484600ULL + epoch, i);
    shuffle_context(dataset[i], rng);
  }
}

}  // namespace refdial::text
