#pragma once

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace refdial::text {

// Rule-table tokenizer:
//   1. split on whitespace
//   2. emoticons from the fixed table below are emitted verbatim
//   3. everything else is lowercased, then segmented into word cores and
//      punctuation runs; apostrophes and hyphens between word characters stay
//      inside the core ("don't", "multi-colored"), all other punctuation is
//      split off; a run of the same punctuation char is one token ("...")
inline const std::array<std::string_view, 14>& emoticon_table() {
  static const std::array<std::string_view, 14> table = {
      ":)", ":(", ":D", ":P", ":p", ":/", ":|", ";)", ":-)", ":-(", ":-D", ";-)", "<3", "xD"};
  return table;
}

namespace detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

inline bool is_emoticon(std::string_view s) {
  for (auto e : emoticon_table())
    if (s == e) return true;
  return false;
}

inline void tokenize_piece(std::string_view piece, std::vector<std::string>& out) {
  std::string lowered(piece);
  for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  std::size_t i = 0;
  const std::size_t n = lowered.size();
  while (i < n) {
    char c = lowered[i];
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < n) {
        if (is_word_char(lowered[j])) {
          ++j;
        } else if ((lowered[j] == '\'' || lowered[j] == '-') && j + 1 < n &&
                   is_word_char(lowered[j + 1]) && j > i) {
          j += 2;
        } else {
          break;
        }
      }
      out.emplace_back(lowered.substr(i, j - i));
      i = j;
    } else {
      std::size_t j = i;
      while (j < n && lowered[j] == c) ++j;
      out.emplace_back(lowered.substr(i, j - i));
      i = j;
    }
  }
}

}  // namespace detail

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])) != 0) ++i;
    std::size_t j = i;
    while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j])) == 0) ++j;
    if (j > i) {
      std::string_view piece = text.substr(i, j - i);
      if (detail::is_emoticon(piece)) {
        tokens.emplace_back(piece);
      } else {
        detail::tokenize_piece(piece, tokens);
      }
    }
    i = j;
  }
  return tokens;
}

inline std::string detokenize(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) s += ' ';
    s += tokens[i];
  }
  return s;
}

}  // namespace refdial::text
