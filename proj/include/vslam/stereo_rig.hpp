#pragma once

#include "vslam/geometry.hpp"

namespace vslam {

/// Calibrated stereo pair. `extrinsics_0_to_1` maps cam0 coordinates to cam1
/// coordinates; it is fixed for a whole run.
struct StereoRig {
  CameraModel cam0;
  CameraModel cam1;
  SE3 extrinsics_0_to_1;

  double baseline() const { return extrinsics_0_to_1.translation().norm(); }

  /// Standard rectified rig: cam1 displaced `baseline` meters to the right
  /// of cam0 (t = (-b, 0, 0) in cam1 = R x0 + t convention).
  static StereoRig rectified(const CameraModel& cam, double baseline) {
    StereoRig rig;
    rig.cam0 = cam;
    rig.cam1 = cam;
    rig.extrinsics_0_to_1 = SE3(Mat3::Identity(), Vec3(-baseline, 0, 0));
    return rig;
  }

  /// World pose of cam1 given the world pose of cam0.
  SE3 cam1Pose(const SE3& world_from_cam0) const {
    return world_from_cam0 * extrinsics_0_to_1.inverse();
  }
};

}  // namespace vslam
