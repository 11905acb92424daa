#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "refdial/common.hpp"

namespace refdial::text {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kSosId = 2;
inline constexpr int kEosId = 3;
inline constexpr int kNohsId = 4;

inline const char* kPadTok = "<pad>";
inline const char* kUnkTok = "<unk>";
inline const char* kSosTok = "<sos>";
inline const char* kEosTok = "<eos>";
inline const char* kNohsTok = "<nohs>";

class Vocabulary {
 public:
  Vocabulary() { add_specials(); }

  // Tokens kept iff corpus frequency >= min_count; order is frequency
  // descending, ties lexicographic, which makes construction deterministic.
  static Vocabulary build(const std::vector<std::vector<std::string>>& utterances,
                          int min_count = 2) {
    std::map<std::string, long> freq;
    for (const auto& utt : utterances)
      for (const auto& tok : utt) ++freq[tok];
    std::vector<std::pair<std::string, long>> kept;
    for (const auto& [tok, n] : freq)
      if (n >= min_count && !is_special(tok)) kept.emplace_back(tok, n);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    for (auto& [tok, n] : kept) v.push(tok);
    return v;
  }

  static bool is_special(const std::string& tok) {
    return tok == kPadTok || tok == kUnkTok || tok == kSosTok || tok == kEosTok || tok == kNohsTok;
  }

  int size() const { return static_cast<int>(tokens_.size()); }

  int index_of(const std::string& tok) const {
    auto it = index_.find(tok);
    return it == index_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& tok) const { return index_.count(tok) > 0; }

  const std::string& token_at(int idx) const {
    ensure(idx >= 0 && idx < size(), "Vocabulary: index out of range");
    return tokens_[static_cast<std::size_t>(idx)];
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  // One token per line; line number == index.
  std::string serialize() const {
    std::string out;
    for (const auto& t : tokens_) {
      out += t;
      out += '\n';
    }
    return out;
  }

  static Vocabulary parse(const std::string& text) {
    auto lines = split_lines(text);
    require(lines.size() >= 5, "vocabulary file: missing special tokens");
    require(lines[0] == kPadTok && lines[1] == kUnkTok && lines[2] == kSosTok &&
                lines[3] == kEosTok && lines[4] == kNohsTok,
            "vocabulary file: special tokens must be the first five lines");
    Vocabulary v;
    for (std::size_t i = 5; i < lines.size(); ++i) {
      require(!lines[i].empty(), "vocabulary file: empty token line");
      require(!v.contains(lines[i]), "vocabulary file: duplicate token " + lines[i]);
      v.push(lines[i]);
    }
    return v;
  }

  std::uint64_t content_hash() const { return fnv1a64(serialize()); }

 private:
  void add_specials() {
    push(kPadTok);
    push(kUnkTok);
    push(kSosTok);
    push(kEosTok);
    push(kNohsTok);
  }

  void push(const std::string& tok) {
    index_.emplace(tok, static_cast<int>(tokens_.size()));
    tokens_.push_back(tok);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Per-instance temporary indices for out-of-vocabulary surface forms in one
// source utterance. Repeated OOV forms share one index; <nohs> never extends.
struct ExtendedVocabulary {
  const Vocabulary* base = nullptr;
  std::vector<std::string> extra;

  int extended_size() const { return base->size() + static_cast<int>(extra.size()); }

  // Index valid in the extended space: base index if known, else temp index.
  int extended_index(const std::string& tok) const {
    if (base->contains(tok)) return base->index_of(tok);
    for (std::size_t i = 0; i < extra.size(); ++i)
      if (extra[i] == tok) return base->size() + static_cast<int>(i);
    return kUnkId;
  }

  const std::string& extended_token(int idx) const {
    if (idx < base->size()) return base->token_at(idx);
    int k = idx - base->size();
    ensure(k >= 0 && k < static_cast<int>(extra.size()), "ExtendedVocabulary: index out of range");
    return extra[static_cast<std::size_t>(k)];
  }
};

struct CopyExtension {
  ExtendedVocabulary ext;
  std::vector<int> source_extended;  // per source position
};

inline CopyExtension extend_for_copy(const std::vector<std::string>& source_tokens,
                                     const Vocabulary& vocab) {
  CopyExtension out;
  out.ext.base = &vocab;
  for (const auto& tok : source_tokens) {
    if (vocab.contains(tok) || tok == kNohsTok) {
      out.source_extended.push_back(vocab.index_of(tok));
      continue;
    }
    int idx = -1;
    for (std::size_t i = 0; i < out.ext.extra.size(); ++i)
      if (out.ext.extra[i] == tok) idx = vocab.size() + static_cast<int>(i);
    if (idx < 0) {
      idx = vocab.size() + static_cast<int>(out.ext.extra.size());
      out.ext.extra.push_back(tok);
    }
    out.source_extended.push_back(idx);
  }
  return out;
}

}  // namespace refdial::text
