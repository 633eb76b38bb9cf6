#pragma once

#include <memory>
#include <span>
#include <optional>

#include "fgslam/geometry.hpp"
#include "fgslam/trajectory.hpp"

namespace fgslam {

/// One RGB-D observation. Depth stores z-depth in meters (TUM convention),
/// 0 marks invalid; color is [0,1] per channel.
struct Frame {
  int index = 0;
  double timestamp = 0.0;
  int width = 0, height = 0;
  std::vector<double> color;  // H*W*3
  std::vector<double> depth;  // H*W
  Pose pose;

  Vec3 color_at(int row, int col) const {
    const std::size_t i = (std::size_t(row) * width + col) * 3;
    return Vec3(color[i], color[i + 1], color[i + 2]);
  }
  double depth_at(int row, int col) const { return depth[std::size_t(row) * width + col]; }

  void validate(const CameraIntrinsics& intr) const;
};

/// Sequential frame iterator; one-frame lookahead is the only buffering.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<Frame> next() = 0;
  virtual const CameraIntrinsics& intrinsics() const = 0;
  virtual const std::optional<Trajectory>& ground_truth_trajectory() const = 0;
  virtual std::size_t size_hint() const = 0;
};

struct SequenceSpec {
  enum class Kind { TumRgbd, Directory, Synthetic };
  Kind kind = Kind::Synthetic;
  std::filesystem::path path;
  std::optional<CameraIntrinsics> intrinsics;  // overrides dataset defaults
  double depth_scale = 5000.0;
  // synthetic parameters live in SyntheticSceneSpec (synthetic.hpp)
};

/// TUM-RGBD directory: rgb.txt / depth.txt indices, optional groundtruth.txt.
/// Color and depth are associated by nearest timestamp within `max_dt`;
/// unmatched entries are skipped and counted.
class TumRgbdSource final : public FrameSource {
 public:
  explicit TumRgbdSource(const std::filesystem::path& dir, const CameraIntrinsics& intr,
                         double max_dt = 0.02);

  std::optional<Frame> next() override;
  const CameraIntrinsics& intrinsics() const override { return intr_; }
  const std::optional<Trajectory>& ground_truth_trajectory() const override { return gt_; }
  std::size_t size_hint() const override { return pairs_.size(); }
  int skipped_count() const { return skipped_; }

  /// Default TUM freiburg intrinsics (640x480, depth scale 5000).
  static CameraIntrinsics default_intrinsics();

 private:
  struct Pair {
    double timestamp;
    std::filesystem::path rgb, depth;
  };
  std::filesystem::path dir_;
  CameraIntrinsics intr_;
  std::vector<Pair> pairs_;
  std::optional<Trajectory> gt_;
  int skipped_ = 0;
  std::size_t cursor_ = 0;
};

/// Pre-associated folder with a JSON manifest listing intrinsics,
/// depth_scale, and per-frame color/depth file pairs.
class DirectorySource final : public FrameSource {
 public:
  explicit DirectorySource(const std::filesystem::path& manifest_path);

  std::optional<Frame> next() override;
  const CameraIntrinsics& intrinsics() const override { return intr_; }
  const std::optional<Trajectory>& ground_truth_trajectory() const override { return gt_; }
  std::size_t size_hint() const override { return frames_.size(); }

 private:
  struct Item {
    double timestamp;
    std::filesystem::path color, depth;
  };
  std::filesystem::path dir_;
  CameraIntrinsics intr_;
  double depth_scale_ = 5000.0;
  std::vector<Item> frames_;
  std::optional<Trajectory> gt_;
  std::size_t cursor_ = 0;
};

/// Writes frames in the DirectorySource layout (8-bit RGB + 16-bit depth
/// PNGs + manifest.json) and a TUM groundtruth.txt from the frame poses.
void write_frame_directory(const std::filesystem::path& dir,
                           const CameraIntrinsics& intr, double depth_scale,
                           std::span<const Frame> frames);

}  // namespace fgslam
