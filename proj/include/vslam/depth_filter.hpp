#pragma once

#include "vslam/frame.hpp"

namespace vslam {

struct DepthFilterConfig {
  double min_epipolar_px = 2.0;   // shorter segments carry no depth signal
  double pixel_noise = 1.0;
  double inflate = 1.44;          // variance factor on disagreement
  double promote_sigma_ratio = 0.1;
  double ssd_distinct_ratio = 0.7;   // best SSD must undercut the median
  double min_ssd_range = 32.0;       // flat-valley guard, per pattern
  double min_inv_depth = 1e-4;
  double max_inv_depth = 20.0;
  int max_steps = 120;
};

struct DepthRefineResult {
  bool updated = false;
  double measurement = 0;
  double measurement_sigma = 0;
};

/// Discrete epipolar search for a candidate's inverse depth against one
/// tracked frame, followed by sub-pixel parabola refinement and a Gaussian
/// fusion/inflation update of (inv_depth, inv_depth_var).
DepthRefineResult refineCandidateDepth(InverseDepthPoint& candidate,
                                       const Keyframe& host, const SE3& frame_pose,
                                       const ImagePyramid& frame_pyramid,
                                       const CameraModel& cam, double frame_a,
                                       double frame_b,
                                       const DepthFilterConfig& config = {});

}  // namespace vslam
