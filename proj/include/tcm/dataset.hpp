#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "geom_raster.hpp"

namespace tcm {

// Scenes of one study area in time order, footprints labeled at the last
// layer, and optional first-visible years for evaluation.
struct Dataset {
  std::vector<Scene> scenes;
  std::vector<Polygon> footprints;
  std::map<std::string, int> label_years;

  std::vector<int> years() const {
    std::vector<int> y;
    y.reserve(scenes.size());
    for (const auto& s : scenes) y.push_back(s.year);
    return y;
  }
  int layers() const { return static_cast<int>(scenes.size()); }
  bool has_labels() const { return !label_years.empty(); }

  void validate() const {
    require(!scenes.empty(), "NoScenes", "dataset has no scenes");
    for (std::size_t i = 1; i < scenes.size(); ++i) {
      require(scenes[i].year > scenes[i - 1].year, "UnorderedScenes", "scene years must be strictly increasing");
      require(scenes[i].image.channels == scenes[0].image.channels, "ChannelMismatch",
              "all scenes must share a channel count");
    }
    std::vector<std::string> ids;
    for (const auto& p : footprints) ids.push_back(p.id);
    std::sort(ids.begin(), ids.end());
    require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), "DuplicateFootprintId",
            "footprint ids must be unique");
  }
};

// 1-based position of `year` on the time axis, if present.
inline std::optional<int> year_to_index(const std::vector<int>& years, int year) {
  auto it = std::find(years.begin(), years.end(), year);
  if (it == years.end()) return std::nullopt;
  return static_cast<int>(it - years.begin()) + 1;
}

}  // namespace tcm
