#pragma once

#include <vector>

#include "vslam/frame.hpp"
#include "vslam/rng.hpp"

namespace vslam {

struct PointSelectionConfig {
  int grid = 32;                  // image partitioned into grid x grid blocks
  double gradient_margin = 3.0;   // added to the per-block median |grad|
  double min_gradient = 2.0;      // absolute floor; rejects flat blocks
};

/// Region-adaptive candidate selection on the level-0 gradient map: the image
/// is partitioned into a 32x32 grid of blocks; each block contributes its
/// top-gradient pixel when that pixel clears the block's median-plus-margin
/// threshold. Regions that yield nothing are swept again at 2x2-coarser
/// granularity with a relaxed threshold, and a seeded subsample trims any
/// overshoot back to the quota.
std::vector<InverseDepthPoint> selectPoints(const ImagePyramid& pyramid,
                                            const CameraModel& cam, int target_count,
                                            Rng& rng,
                                            const PointSelectionConfig& config = {});

/// Candidate -> full point: caches pattern intensities and gradient weight.
/// Returns false if the pattern does not fit inside the image.
bool finalizePoint(const ImagePyramid& pyramid, const Vec2& pixel, int host_id,
                   InverseDepthPoint& out);

}  // namespace vslam
