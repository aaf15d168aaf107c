#pragma once

#include <deque>
#include <vector>

#include "vslam/depth_filter.hpp"
#include "vslam/frame.hpp"
#include "vslam/point_selection.hpp"
#include "vslam/rng.hpp"
#include "vslam/tracker.hpp"
#include "vslam/window_optimizer.hpp"

namespace vslam {

struct KeyframePolicy {
  double flow_threshold = 9.0;         // px
  double flow_norot_threshold = 6.0;   // px
  double affine_threshold = 0.4;       // |delta a|
  double energy_factor = 2.0;          // vs mean tracking energy
  int max_frame_gap = 25;
};

/// Weighted-sum keyframe rule: flow, translation-only flow, and affine change
/// against their thresholds, or a tracking-energy spike.
bool makeKeyframeDecision(double flow, double flow_norot, double affine_delta,
                          double tracking_energy, double mean_energy,
                          const KeyframePolicy& policy);

struct OdometryConfig {
  int max_keyframes = 7;
  int points_per_keyframe = 285;  // ~2000 points across a 7-keyframe window
  double min_visibility = 0.05;   // marginalization trigger
  TrackingConfig tracking;
  WindowOptimizerConfig window;
  DepthFilterConfig depth;
  PointSelectionConfig selection;
  KeyframePolicy keyframe;
};

struct FrameSummary {
  bool tracked = false;
  bool is_keyframe = false;
  bool lost = false;
  SE3 pose;  // world_from_cam
  double tracking_energy = 0;
  KeyframePtr created_keyframe;       // set when a keyframe was created
  KeyframePtr marginalized_keyframe;  // set when one was retired
  WindowOptimizeResult window_result;
};

/// Chooses the marginalization victim: among keyframes seeing < min_visibility
/// of their points in the newest frame the one with the highest distance
/// score, otherwise the oldest. Returns -1 when nothing must go.
int chooseMarginalizationVictim(const SlidingWindow& window, const CameraModel& cam,
                                double min_visibility, bool over_capacity);

/// Monocular sparse direct odometry: tracking, candidate depth refinement,
/// keyframe management, and windowed photometric optimization. Single
///-threaded; one instance owns its window.
class DirectOdometry {
 public:
  DirectOdometry(const CameraModel& cam, const OdometryConfig& config, uint64_t seed);

  FrameSummary processFrame(const Image& image, double timestamp);

  /// Restart after tracking loss: clears the window but keeps the pose so the
  /// next keyframe continues from the last known location.
  void reset();

  const SlidingWindow& window() const { return window_; }
  SlidingWindow& window() { return window_; }
  const CameraModel& camera() const { return cam_; }
  bool bootstrapped() const { return window_.size() >= 2; }
  double meanTrackingEnergy() const;
  double meanPatternEnergy() const { return mean_pattern_energy_; }
  double arclength() const { return arclength_; }
  int nextKeyframeId() const { return next_id_; }
  Rng& rng() { return rng_; }

 private:
  KeyframePtr createKeyframe(const PyramidPtr& pyramid, const SE3& pose, double a,
                             double b, double timestamp);
  void refineCandidates(const SE3& frame_pose, const ImagePyramid& pyramid, double a,
                        double b);

  CameraModel cam_;
  OdometryConfig cfg_;
  Rng rng_;
  SlidingWindow window_;
  int next_id_ = 0;
  int frames_since_keyframe_ = 0;
  double arclength_ = 0;
  SE3 last_pose_;
  SE3 last_motion_;  // constant-velocity prior
  bool has_last_ = false;
  double mean_pattern_energy_ = 0;
  std::deque<double> recent_energies_;
};

}  // namespace vslam
