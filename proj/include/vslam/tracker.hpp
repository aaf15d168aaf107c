#pragma once

#include <functional>
#include <vector>

#include "vslam/frame.hpp"
#include "vslam/rng.hpp"

namespace vslam {

/// Shared coarse-to-fine Gauss-Newton photometric alignment of a fixed set
/// of 3D pattern points against one target image, over 6-DoF pose plus
/// affine brightness (gain a, bias b). Exposure ratios are fixed to 1.
struct AlignInput {
  const ImagePyramid* target = nullptr;
  CameraModel cam;  // level-0 intrinsics of the target image

  struct Entry {
    Vec3 x_world;      // pattern-pixel point in the shared frame
    double weight;     // gradient-dependent w_p of the owning point
    double host_a, host_b;
    int point;         // owning point index (kPatternSize entries per point)
  };
  std::vector<Entry> entries;

  /// Reference intensity of entry `i` at pyramid level `l` of the target.
  std::function<double(int i, int l)> ref_intensity;

  double huber_gamma = 9.0;
  int coarsest_level = 4;
  int max_iterations = 15;
  double rel_decrease_eps = 1e-5;
};

struct AlignResult {
  SE3 cam_from_world;
  double affine_a = 0, affine_b = 0;
  double energy = 0;            // mean weighted Huber energy per residual
  double in_view_fraction = 0;  // level-0 entries that projected in-view
  bool diverged = false;
  Mat6 pose_information;        // J^T W J with affine block marginalized
};

AlignResult alignPhotometric(const AlignInput& input, const SE3& init_cam_from_world,
                             double a0, double b0);

struct TrackingConfig {
  double huber_gamma = 9.0;
  int coarsest_level = 4;
  int max_iterations = 15;
  double fail_energy = 150.0;
  double min_in_view_fraction = 0.3;
  int restarts = 3;
};

struct TrackResult {
  SE3 pose;  // world_from_cam of the new frame
  double affine_a = 0, affine_b = 0;
  double energy = 0;
  double flow = 0;        // mean pixel displacement vs. the newest keyframe
  double flow_norot = 0;  // same with the relative rotation removed
  int points_used = 0;
  bool lost = false;
};

/// Tracks a new image against the active points of the window. Restarts from
/// perturbed priors on divergence; `lost` is set after the final restart.
TrackResult trackFrame(const SlidingWindow& window, const PyramidPtr& new_pyramid,
                       const CameraModel& cam, const SE3& motion_prior,
                       const TrackingConfig& config, Rng& rng);

}  // namespace vslam
