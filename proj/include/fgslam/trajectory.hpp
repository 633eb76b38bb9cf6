#pragma once

#include <filesystem>
#include <vector>

#include "fgslam/geometry.hpp"

namespace fgslam {

/// Timestamped pose sequence with strictly increasing timestamps.
struct Trajectory {
  struct Entry {
    double timestamp = 0.0;
    Pose pose;
  };
  std::vector<Entry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  void push(double t, const Pose& p) { entries.push_back({t, p}); }

  void validate() const {
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (entries[i].timestamp <= entries[i - 1].timestamp)
        throw std::invalid_argument("trajectory: timestamps must be strictly increasing");
  }
};

/// TUM text format: "timestamp tx ty tz qx qy qz qw", '#' comments.
void save_trajectory_tum(const std::filesystem::path& path, const Trajectory& traj);
Trajectory load_trajectory_tum(const std::filesystem::path& path);

}  // namespace fgslam
