#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "refdial/corpus/extract.hpp"

namespace refdial::corpus {

// Chain dataset file: line-delimited JSON, one record per utterance.
// {game_id, round_index, message_id, image_id, text, chain_position, score}

inline std::string chains_to_jsonl(const std::vector<ReferenceChain>& chains) {
  std::string out;
  for (const auto& chain : chains) {
    int pos = 0;
    for (const auto& e : chain.entries) {
      ++pos;
      nlohmann::ordered_json j;
      j["game_id"] = chain.game_id;
      j["round_index"] = e.round_index;
      j["message_id"] = e.message_id;
      j["image_id"] = chain.image_id;
      j["text"] = e.text;
      j["chain_position"] = pos;
      j["score"] = e.score;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

inline std::vector<ReferenceChain> chains_from_jsonl(const std::string& text) {
  // (game, image) -> chain; rebuilt in record order, then ordered by key.
  std::map<std::pair<std::string, std::string>, ReferenceChain> by_key;
  for (const auto& line : split_lines(text)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("bad chain record: ") + e.what());
    }
    if (j.contains("__meta__")) continue;  // provenance header line
    std::pair<std::string, std::string> key{j.at("game_id").get<std::string>(),
                                            j.at("image_id").get<std::string>()};
    auto& chain = by_key[key];
    chain.game_id = key.first;
    chain.image_id = key.second;
    chain.entries.push_back({j.at("round_index").get<int>(), j.at("message_id").get<int>(),
                             j.at("text").get<std::string>(), j.value("score", 0.0)});
  }
  std::vector<ReferenceChain> out;
  for (auto& [key, chain] : by_key) {
    int prev = 0;
    for (const auto& e : chain.entries) {
      require(e.round_index > prev, "chain " + chain.game_id + "/" + chain.image_id +
                                        ": round indices must increase");
      prev = e.round_index;
    }
    out.push_back(std::move(chain));
  }
  return out;
}

inline std::vector<ReferenceChain> load_chains(const std::string& path) {
  return chains_from_jsonl(read_file(path));
}

}  // namespace refdial::corpus
