#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "refdial/common.hpp"

namespace refdial::corpus {

struct VisualGenomeTokens {
  std::set<std::string> attribute_tokens;
  std::set<std::string> relationship_tokens;

  // Only tokens appearing both as attributes and inside relationships are
  // kept as reference material.
  std::set<std::string> retained() const {
    std::set<std::string> out;
    std::set_intersection(attribute_tokens.begin(), attribute_tokens.end(),
                          relationship_tokens.begin(), relationship_tokens.end(),
                          std::inserter(out, out.begin()));
    return out;
  }
};

struct ReferenceSet {
  std::string image_id;
  std::vector<std::string> captions;
  std::set<std::string> vg_tokens;              // retained scene-graph tokens; empty if unannotated
  std::vector<std::string> dynamic_captions;    // chain selections accumulated per dialogue

  std::vector<std::string> all_captions() const {
    std::vector<std::string> all = captions;
    all.insert(all.end(), dynamic_captions.begin(), dynamic_captions.end());
    return all;
  }
};

// Static per-image reference material (captions + scene-graph tokens).
class ReferenceStore {
 public:
  void add_captions(const std::string& image_id, std::vector<std::string> captions) {
    require(!captions.empty(), "image " + image_id + ": captions must be nonempty");
    captions_[image_id] = std::move(captions);
  }

  void add_vg(const std::string& image_id, VisualGenomeTokens vg) {
    vg_[image_id] = std::move(vg);
  }

  bool has_captions(const std::string& image_id) const { return captions_.count(image_id) > 0; }

  // Fresh per-dialogue reference set (dynamic captions start empty).
  ReferenceSet make(const std::string& image_id) const {
    auto it = captions_.find(image_id);
    require(it != captions_.end(), "no captions for image " + image_id);
    ReferenceSet rs;
    rs.image_id = image_id;
    rs.captions = it->second;
    auto vt = vg_.find(image_id);
    if (vt != vg_.end()) rs.vg_tokens = vt->second.retained();
    return rs;
  }

  std::set<std::string> vg_retained(const std::string& image_id) const {
    auto it = vg_.find(image_id);
    return it == vg_.end() ? std::set<std::string>{} : it->second.retained();
  }

  // Captions file: JSON object {image_id: ["caption", ...], ...}
  void load_captions(const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("bad captions file " + path + ": " + e.what());
    }
    require(j.is_object(), "captions file must be a JSON object: " + path);
    for (const auto& [image_id, caps] : j.items())
      add_captions(image_id, caps.get<std::vector<std::string>>());
  }

  // Scene-graph token file: {image_id: {"attributes": [...], "relations": [...]}}
  void load_vg(const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("bad scene-graph file " + path + ": " + e.what());
    }
    require(j.is_object(), "scene-graph file must be a JSON object: " + path);
    for (const auto& [image_id, tok] : j.items()) {
      VisualGenomeTokens vg;
      for (const auto& t : tok.value("attributes", nlohmann::json::array()))
        vg.attribute_tokens.insert(t.get<std::string>());
      for (const auto& t : tok.value("relations", nlohmann::json::array()))
        vg.relationship_tokens.insert(t.get<std::string>());
      add_vg(image_id, std::move(vg));
    }
  }

 private:
  std::map<std::string, std::vector<std::string>> captions_;
  std::map<std::string, VisualGenomeTokens> vg_;
};

}  // namespace refdial::corpus
