#include "fgslam/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fgslam/image_io.hpp"

namespace fgslam {

void Frame::validate(const CameraIntrinsics& intr) const {
  if (width != intr.width || height != intr.height)
    throw std::runtime_error("frame " + std::to_string(index) +
                             ": image dimensions do not match the intrinsics");
  if (color.size() != std::size_t(width) * height * 3 ||
      depth.size() != std::size_t(width) * height)
    throw std::runtime_error("frame " + std::to_string(index) + ": buffer size mismatch");
  for (double d : depth)
    if (!std::isfinite(d) || d < 0.0)
      throw std::runtime_error("frame " + std::to_string(index) + ": invalid depth value");
  for (double c : color)
    if (!std::isfinite(c))
      throw std::runtime_error("frame " + std::to_string(index) + ": NaN color value");
}

void save_trajectory_tum(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path.string());
  out << "# timestamp tx ty tz qx qy qz qw\n";
  out.precision(9);
  out << std::fixed;
  for (const auto& e : traj.entries) {
    const Quat& q = e.pose.q;
    out << e.timestamp << ' ' << e.pose.t.x() << ' ' << e.pose.t.y() << ' ' << e.pose.t.z()
        << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
  }
}

Trajectory load_trajectory_tum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory: " + path.string());
  Trajectory traj;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": unparseable trajectory line");
    traj.push(t, Pose(Quat(qw, qx, qy, qz), Vec3(tx, ty, tz)));
  }
  return traj;
}

namespace {

struct TimedFile {
  double timestamp;
  std::string filename;
};

std::vector<TimedFile> parse_tum_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing index file: " + path.string());
  std::vector<TimedFile> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TimedFile tf;
    if (!(ss >> tf.timestamp >> tf.filename))
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": unparseable index line");
    out.push_back(std::move(tf));
  }
  std::sort(out.begin(), out.end(),
            [](const TimedFile& a, const TimedFile& b) { return a.timestamp < b.timestamp; });
  return out;
}

Frame load_rgbd_pair(const std::filesystem::path& rgb_path,
                     const std::filesystem::path& depth_path, double depth_scale,
                     const CameraIntrinsics& intr, int index, double timestamp) {
  Frame f;
  f.index = index;
  f.timestamp = timestamp;
  const Rgb8Image rgb = read_png_rgb8(rgb_path);
  const Gray16Image d = read_png_gray16(depth_path);
  if (rgb.width != d.width || rgb.height != d.height)
    throw std::runtime_error("color/depth dimension mismatch: " + depth_path.string());
  f.width = rgb.width;
  f.height = rgb.height;
  f.color.resize(rgb.pixels.size());
  for (std::size_t i = 0; i < rgb.pixels.size(); ++i) f.color[i] = rgb.pixels[i] / 255.0;
  f.depth.resize(d.pixels.size());
  for (std::size_t i = 0; i < d.pixels.size(); ++i) f.depth[i] = d.pixels[i] / depth_scale;
  f.validate(intr);
  return f;
}

}  // namespace

CameraIntrinsics TumRgbdSource::default_intrinsics() {
  return {525.0, 525.0, 319.5, 239.5, 640, 480, 5000.0};
}

TumRgbdSource::TumRgbdSource(const std::filesystem::path& dir, const CameraIntrinsics& intr,
                             double max_dt)
    : dir_(dir), intr_(intr) {
  intr_.validate();
  const auto rgb = parse_tum_index(dir / "rgb.txt");
  const auto depth = parse_tum_index(dir / "depth.txt");
  if (depth.empty()) throw std::runtime_error("depth.txt lists no frames: " + dir.string());

  for (const TimedFile& r : rgb) {
    // nearest depth timestamp (depth list is sorted)
    auto it = std::lower_bound(
        depth.begin(), depth.end(), r.timestamp,
        [](const TimedFile& a, double t) { return a.timestamp < t; });
    const TimedFile* best = nullptr;
    if (it != depth.end()) best = &*it;
    if (it != depth.begin()) {
      const TimedFile* prev = &*(it - 1);
      if (!best ||
          std::abs(prev->timestamp - r.timestamp) <= std::abs(best->timestamp - r.timestamp))
        best = prev;
    }
    if (best && std::abs(best->timestamp - r.timestamp) <= max_dt) {
      pairs_.push_back({r.timestamp, dir / r.filename, dir / best->filename});
    } else {
      ++skipped_;
    }
  }
  if (std::filesystem::exists(dir / "groundtruth.txt"))
    gt_ = load_trajectory_tum(dir / "groundtruth.txt");
}

std::optional<Frame> TumRgbdSource::next() {
  if (cursor_ >= pairs_.size()) return std::nullopt;
  const Pair& p = pairs_[cursor_];
  Frame f = load_rgbd_pair(p.rgb, p.depth, intr_.depth_scale, intr_, int(cursor_), p.timestamp);
  ++cursor_;
  return f;
}

DirectorySource::DirectorySource(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path.string());
  nlohmann::json j;
  in >> j;
  dir_ = manifest_path.parent_path();

  const auto& ji = j.at("intrinsics");
  intr_.fx = ji.at("fx");
  intr_.fy = ji.at("fy");
  intr_.cx = ji.at("cx");
  intr_.cy = ji.at("cy");
  intr_.width = ji.at("width");
  intr_.height = ji.at("height");
  depth_scale_ = j.value("depth_scale", 5000.0);
  intr_.depth_scale = depth_scale_;
  intr_.validate();

  for (const auto& jf : j.at("frames")) {
    Item item;
    item.timestamp = jf.at("timestamp");
    item.color = dir_ / jf.at("color").get<std::string>();
    item.depth = dir_ / jf.at("depth").get<std::string>();
    if (!std::filesystem::exists(item.color))
      throw std::runtime_error("missing color file: " + item.color.string());
    if (!std::filesystem::exists(item.depth))
      throw std::runtime_error("missing depth file: " + item.depth.string());
    frames_.push_back(std::move(item));
  }
  if (std::filesystem::exists(dir_ / "groundtruth.txt"))
    gt_ = load_trajectory_tum(dir_ / "groundtruth.txt");
}

std::optional<Frame> DirectorySource::next() {
  if (cursor_ >= frames_.size()) return std::nullopt;
  const Item& item = frames_[cursor_];
  Frame f = load_rgbd_pair(item.color, item.depth, depth_scale_, intr_, int(cursor_),
                           item.timestamp);
  ++cursor_;
  return f;
}

void write_frame_directory(const std::filesystem::path& dir, const CameraIntrinsics& intr,
                           double depth_scale, std::span<const Frame> frames) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["intrinsics"] = {{"fx", intr.fx}, {"fy", intr.fy},         {"cx", intr.cx},
                     {"cy", intr.cy}, {"width", intr.width},   {"height", intr.height}};
  j["depth_scale"] = depth_scale;
  j["frames"] = nlohmann::json::array();

  Trajectory traj;
  char name[32];
  for (const Frame& f : frames) {
    std::snprintf(name, sizeof(name), "color_%05d.png", f.index);
    const std::string color_name = name;
    std::snprintf(name, sizeof(name), "depth_%05d.png", f.index);
    const std::string depth_name = name;

    Rgb8Image rgb;
    rgb.width = f.width;
    rgb.height = f.height;
    rgb.pixels.resize(f.color.size());
    for (std::size_t i = 0; i < f.color.size(); ++i)
      rgb.pixels[i] = uint8_t(std::lround(std::clamp(f.color[i], 0.0, 1.0) * 255.0));
    write_png_rgb8(dir / color_name, rgb);

    Gray16Image d;
    d.width = f.width;
    d.height = f.height;
    d.pixels.resize(f.depth.size());
    for (std::size_t i = 0; i < f.depth.size(); ++i) {
      const double raw = std::clamp(std::lround(f.depth[i] * depth_scale), 0L, 65535L);
      d.pixels[i] = uint16_t(raw);
    }
    write_png_gray16(dir / depth_name, d);

    j["frames"].push_back(
        {{"timestamp", f.timestamp}, {"color", color_name}, {"depth", depth_name}});
    traj.push(f.timestamp, f.pose);
  }

  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << '\n';
  save_trajectory_tum(dir / "groundtruth.txt", traj);
}

}  // namespace fgslam
