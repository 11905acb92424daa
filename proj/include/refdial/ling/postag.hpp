#pragma once

#include <cctype>
#include <map>
#include <string>
#include <vector>

#include "refdial/text/stopwords.hpp"

namespace refdial::ling {

enum class Pos { kNoun, kVerb, kAdj, kOther };

inline const char* pos_name(Pos p) {
  switch (p) {
    case Pos::kNoun: return "noun";
    case Pos::kVerb: return "verb";
    case Pos::kAdj: return "adj";
    case Pos::kOther: return "other";
  }
  return "other";
}

class PosTagger {
 public:
  virtual ~PosTagger() = default;
  virtual std::vector<Pos> tag(const std::vector<std::string>& tokens) const = 0;
};

// Bundled fallback tagger: a small lexicon plus suffix rules, enough for the
// fixture corpora. Order: lexicon, stopword -> other, suffix rules, noun.
class LexiconSuffixTagger : public PosTagger {
 public:
  LexiconSuffixTagger() {
    static const char* nouns[] = {
        "guy",     "camera", "picture",  "pictures", "photo",    "photographer", "cake",
        "cloth",   "truck",  "trucks",   "dog",      "dogs",     "glass",        "wine",
        "chair",   "lady",   "ladies",   "runway",   "basket",   "bowl",         "bowls",
        "rice",    "broccoli", "salad",  "headband", "tattoo",   "man",          "woman",
        "face",    "table",  "image",    "round",    "game",     "model",        "dress",
        "market",  "goods",  "arm",      "racket",   "tennis",   "cat",          "mat",
        "bird",    "birds",  "sky",      "hat",      "time",     "compound",     "plate",
        "greens",  "fabric", "tablecloth"};
    static const char* verbs[] = {"see",  "have", "take",  "takes", "got",   "get",
                                  "hold", "is",   "are",   "was",   "say",   "walk",
                                  "sit",  "carry", "swing", "runs",  "fly",   "sat"};
    static const char* adjs[] = {"white", "red",   "pink",  "green", "fuzzy", "striped",
                                 "colored", "young", "small", "large", "tall",  "blue",
                                 "colorless", "multi", "fresh", "healthy", "plain", "frosted"};
    for (auto* w : nouns) lexicon_[w] = Pos::kNoun;
    for (auto* w : verbs) lexicon_[w] = Pos::kVerb;
    for (auto* w : adjs) lexicon_[w] = Pos::kAdj;
  }

  std::vector<Pos> tag(const std::vector<std::string>& tokens) const override {
    std::vector<Pos> tags;
    tags.reserve(tokens.size());
    for (const auto& tok : tokens) tags.push_back(tag_one(tok));
    return tags;
  }

  Pos tag_one(const std::string& tok) const {
    if (tok.empty() || !std::isalnum(static_cast<unsigned char>(tok[0]))) return Pos::kOther;
    auto it = lexicon_.find(tok);
    if (it != lexicon_.end()) return it->second;
    // plural lookup
    if (tok.size() > 3 && tok.back() == 's') {
      auto base = lexicon_.find(tok.substr(0, tok.size() - 1));
      if (base != lexicon_.end()) return base->second;
    }
    if (text::is_stopword(tok)) return Pos::kOther;
    return suffix_rule(tok);
  }

 private:
  static bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  }

  static Pos suffix_rule(const std::string& tok) {
    if (ends_with(tok, "ing") || ends_with(tok, "ed")) return Pos::kVerb;
    if (ends_with(tok, "ly")) return Pos::kOther;
    if (ends_with(tok, "ous") || ends_with(tok, "ful") || ends_with(tok, "ish") ||
        ends_with(tok, "ive") || ends_with(tok, "able") || ends_with(tok, "al"))
      return Pos::kAdj;
    return Pos::kNoun;
  }

  std::map<std::string, Pos> lexicon_;
};

}  // namespace refdial::ling
