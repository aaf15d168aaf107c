#pragma once

#include <array>
#include <memory>
#include <vector>

#include "vslam/geometry.hpp"
#include "vslam/pyramid.hpp"

namespace vslam {

/// 8-pixel residual pattern around a host pixel (integer offsets).
constexpr int kPatternSize = 8;
constexpr std::array<std::array<int, 2>, kPatternSize> kPattern = {{
    {{0, -2}}, {{-1, -1}}, {{1, -1}}, {{-2, 0}},
    {{0, 0}}, {{2, 0}}, {{-1, 1}}, {{0, 2}},
}};

// Gradient-dependent point weight w = c^2 / (c^2 + |grad|^2).
constexpr double kWeightConst = 50.0;

enum class PointStatus { Candidate, Active, Marginalized, Outlier };

/// Sparse scene point parameterized by inverse depth along its host pixel ray.
struct InverseDepthPoint {
  Vec2 pixel = Vec2::Zero();
  double inv_depth = 1.0;
  double inv_depth_var = 1.0;
  int host_id = -1;
  PointStatus status = PointStatus::Candidate;
  double weight = 1.0;
  std::array<float, kPatternSize> host_intensity{};  // level-0 pattern intensities
};

struct Keyframe {
  int id = -1;
  PyramidPtr pyramid;
  CameraModel camera;
  SE3 pose;  // world_from_cam
  double affine_a = 0.0;
  double affine_b = 0.0;
  double exposure_t = 1.0;  // no photometric calibration available; fixed
  std::vector<InverseDepthPoint> points;
  bool is_marginalized = false;
  SE3 linearization_pose;
  bool linearization_set = false;
  double arclength = 0.0;  // trajectory distance from run start, meters
  double timestamp = 0.0;

  void setLinearizationPose(const SE3& p) {
    linearization_pose = p;
    linearization_set = true;
  }

  int countActive() const {
    int n = 0;
    for (const auto& p : points)
      if (p.status == PointStatus::Active) ++n;
    return n;
  }
};

using KeyframePtr = std::shared_ptr<Keyframe>;

/// Ordered set of live keyframes plus per-observation bookkeeping.
class SlidingWindow {
 public:
  explicit SlidingWindow(int max_keyframes = 7) : max_keyframes_(max_keyframes) {}

  int maxKeyframes() const { return max_keyframes_; }
  int size() const { return int(frames_.size()); }
  bool empty() const { return frames_.empty(); }

  const std::vector<KeyframePtr>& frames() const { return frames_; }
  KeyframePtr& frame(int i) { return frames_[i]; }
  const KeyframePtr& frame(int i) const { return frames_[i]; }
  KeyframePtr newest() const { return frames_.empty() ? nullptr : frames_.back(); }
  KeyframePtr oldest() const { return frames_.empty() ? nullptr : frames_.front(); }

  void push(KeyframePtr kf) { frames_.push_back(std::move(kf)); }

  KeyframePtr removeAt(int i) {
    KeyframePtr kf = frames_[i];
    frames_.erase(frames_.begin() + i);
    return kf;
  }

  KeyframePtr byId(int id) const {
    for (const auto& f : frames_)
      if (f->id == id) return f;
    return nullptr;
  }

  int totalActivePoints() const {
    int n = 0;
    for (const auto& f : frames_) n += f->countActive();
    return n;
  }

 private:
  int max_keyframes_;
  std::vector<KeyframePtr> frames_;
};

}  // namespace vslam
