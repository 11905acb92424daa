#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "refdial/common.hpp"

namespace refdial::corpus {

struct Message {
  int message_id = 0;
  std::string speaker;
  std::string text;
};

struct SelectionEvent {
  std::string speaker;
  std::string image_id;
  enum class Label { kCommon, kDifferent } label = Label::kCommon;
  int position = 0;  // message_id after which the event occurred; 0 = round start
};

struct RoundLog {
  int round_index = 0;
  std::map<std::string, std::vector<std::string>> views;  // speaker -> 6 image ids
  std::vector<Message> messages;
  std::vector<SelectionEvent> selections;

  bool in_view(const std::string& speaker, const std::string& image_id) const {
    auto it = views.find(speaker);
    if (it == views.end()) return false;
    return std::find(it->second.begin(), it->second.end(), image_id) != it->second.end();
  }

  bool message_exists(int id) const {
    for (const auto& m : messages)
      if (m.message_id == id) return true;
    return false;
  }
};

struct GameLog {
  std::string game_id;
  std::string split_tag;  // train | val | test | annotated
  std::vector<RoundLog> rounds;

  std::vector<std::string> speakers() const {
    std::set<std::string> s;
    for (const auto& r : rounds)
      for (const auto& [sp, v] : r.views) s.insert(sp);
    return {s.begin(), s.end()};
  }

  // All image ids appearing in any view of any round.
  std::set<std::string> known_images() const {
    std::set<std::string> s;
    for (const auto& r : rounds)
      for (const auto& [sp, v] : r.views) s.insert(v.begin(), v.end());
    return s;
  }

  void validate() const {
    require(rounds.size() == 5, "game " + game_id + ": expected exactly 5 rounds");
    static const std::set<std::string> splits = {"train", "val", "test", "annotated"};
    require(splits.count(split_tag) > 0, "game " + game_id + ": bad split tag " + split_tag);
    int prev = 0;
    std::set<int> msg_ids;
    for (const auto& r : rounds) {
      require(r.round_index >= 1 && r.round_index <= 5 && r.round_index > prev,
              "game " + game_id + ": round indices must be 1..5, strictly increasing");
      prev = r.round_index;
      require(r.views.size() == 2, "game " + game_id + ": each round needs two speaker views");
      for (const auto& [sp, v] : r.views)
        require(v.size() == 6,
                "game " + game_id + ": speaker " + sp + " must see exactly 6 images");
      int prev_msg = 0;
      for (const auto& m : r.messages) {
        require(m.message_id > prev_msg,
                "game " + game_id + ": message ids must increase within a round");
        prev_msg = m.message_id;
        require(msg_ids.insert(m.message_id).second,
                "game " + game_id + ": duplicate message id " + std::to_string(m.message_id));
        require(r.views.count(m.speaker) > 0,
                "game " + game_id + ": message from unknown speaker " + m.speaker);
      }
      for (const auto& s : r.selections) {
        require(r.in_view(s.speaker, s.image_id),
                "game " + game_id + ": selection of " + s.image_id +
                    " outside the view of speaker " + s.speaker);
        require(s.position == 0 || r.message_exists(s.position),
                "game " + game_id + ": selection position must be a message id or 0");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Line-delimited JSON game logs, one game per line:
// {"game_id": "...", "split": "train",
//  "rounds": [{"round": 1, "views": {"A": [...6 ids...], "B": [...]},
//              "messages": [{"id": 1, "speaker": "A", "text": "..."}],
//              "selections": [{"speaker": "A", "image": "...",
//                              "label": "common", "position": 1}]}]}
// ---------------------------------------------------------------------------

inline GameLog parse_game(const nlohmann::json& j) {
  GameLog g;
  try {
    g.game_id = j.at("game_id").get<std::string>();
    g.split_tag = j.at("split").get<std::string>();
    for (const auto& jr : j.at("rounds")) {
      RoundLog r;
      r.round_index = jr.at("round").get<int>();
      for (const auto& [sp, ids] : jr.at("views").items())
        r.views[sp] = ids.get<std::vector<std::string>>();
      for (const auto& jm : jr.value("messages", nlohmann::json::array())) {
        Message m;
        m.message_id = jm.at("id").get<int>();
        m.speaker = jm.at("speaker").get<std::string>();
        m.text = jm.at("text").get<std::string>();
        r.messages.push_back(std::move(m));
      }
      for (const auto& js : jr.value("selections", nlohmann::json::array())) {
        SelectionEvent s;
        s.speaker = js.at("speaker").get<std::string>();
        s.image_id = js.at("image").get<std::string>();
        std::string label = js.at("label").get<std::string>();
        require(label == "common" || label == "different",
                "selection label must be common or different, got " + label);
        s.label = label == "common" ? SelectionEvent::Label::kCommon
                                    : SelectionEvent::Label::kDifferent;
        s.position = js.at("position").get<int>();
        r.selections.push_back(std::move(s));
      }
      g.rounds.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad game record: ") + e.what());
  }
  g.validate();
  return g;
}

inline std::vector<GameLog> load_games(const std::string& path) {
  std::vector<GameLog> games;
  for (const auto& line : split_lines(read_file(path))) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("bad JSON in " + path + ": " + e.what());
    }
    games.push_back(parse_game(j));
  }
  require(!games.empty(), "no games in " + path);
  return games;
}

}  // namespace refdial::corpus
