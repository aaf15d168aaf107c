#include "vslam/depth_filter.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace vslam {

namespace {

constexpr double kInvalidSsd = 1e18;

}  // namespace

DepthRefineResult refineCandidateDepth(InverseDepthPoint& candidate,
                                       const Keyframe& host, const SE3& frame_pose,
                                       const ImagePyramid& frame_pyramid,
                                       const CameraModel& cam, double frame_a,
                                       double frame_b, const DepthFilterConfig& cfg) {
  DepthRefineResult out;
  SE3 t_fh = frame_pose.inverse() * host.pose;  // host cam -> frame cam

  double sigma = std::sqrt(candidate.inv_depth_var);
  double d_lo = std::max(cfg.min_inv_depth, candidate.inv_depth - 2 * sigma);
  double d_hi = std::min(cfg.max_inv_depth, candidate.inv_depth + 2 * sigma);
  if (d_hi <= d_lo) return out;

  auto projectCenter = [&](double d) -> std::optional<Vec2> {
    Vec3 xf = t_fh * cam.unproject(candidate.pixel, d);
    if (xf.z() < CameraModel::kMinDepth) return std::nullopt;
    Vec2 u = cam.projectRaw(xf);
    if (!frame_pyramid.inBounds(0, u, 3.0)) return std::nullopt;
    return u;
  };

  auto u_lo = projectCenter(d_lo);
  auto u_hi = projectCenter(d_hi);
  if (!u_lo || !u_hi) return out;
  double segment_px = (*u_hi - *u_lo).norm();
  if (segment_px < cfg.min_epipolar_px) return out;  // no baseline, no signal

  int steps = std::clamp(int(std::ceil(segment_px)), 4, cfg.max_steps);
  double exp_a = std::exp(frame_a - host.affine_a);

  auto ssdAt = [&](double d) -> double {
    double ssd = 0;
    for (int k = 0; k < kPatternSize; ++k) {
      Vec2 p = candidate.pixel + Vec2(kPattern[k][0], kPattern[k][1]);
      Vec3 xf = t_fh * cam.unproject(p, d);
      if (xf.z() < CameraModel::kMinDepth) return kInvalidSsd;
      auto s = frame_pyramid.sample(0, cam.projectRaw(xf));
      if (!s) return kInvalidSsd;
      double r = (s->intensity - frame_b) -
                 exp_a * (candidate.host_intensity[k] - host.affine_b);
      ssd += r * r;
    }
    return ssd;
  };

  std::vector<double> ds(steps), ssds(steps);
  int best = -1;
  std::vector<double> valid;
  valid.reserve(steps);
  for (int i = 0; i < steps; ++i) {
    ds[i] = d_lo + (d_hi - d_lo) * i / double(steps - 1);
    ssds[i] = ssdAt(ds[i]);
    if (ssds[i] < kInvalidSsd) {
      valid.push_back(ssds[i]);
      if (best < 0 || ssds[i] < ssds[best]) best = i;
    }
  }
  if (best < 0 || valid.size() < 4) return out;

  size_t mid = valid.size() / 2;
  std::nth_element(valid.begin(), valid.begin() + mid, valid.end());
  double median = valid[mid];
  // Flat or ambiguous valley: do not trust the minimum.
  if (median - ssds[best] < cfg.min_ssd_range) return out;
  if (ssds[best] > cfg.ssd_distinct_ratio * median) return out;

  double d_star = ds[best];
  if (best > 0 && best < steps - 1 && ssds[best - 1] < kInvalidSsd &&
      ssds[best + 1] < kInvalidSsd) {
    double denom = ssds[best - 1] - 2 * ssds[best] + ssds[best + 1];
    if (denom > 1e-12) {
      double offset = 0.5 * (ssds[best - 1] - ssds[best + 1]) / denom;
      d_star += std::clamp(offset, -1.0, 1.0) * (ds[1] - ds[0]);
    }
  }

  // Map one pixel of noise into inverse-depth units via the local slope.
  double step_d = ds[1] - ds[0];
  double local_px = segment_px / double(steps - 1);
  double meas_sigma = cfg.pixel_noise * step_d / std::max(local_px, 1e-9);

  out.measurement = d_star;
  out.measurement_sigma = meas_sigma;

  double prior_var = candidate.inv_depth_var;
  double meas_var = meas_sigma * meas_sigma;
  if (std::abs(d_star - candidate.inv_depth) <=
      2.0 * (std::sqrt(prior_var) + meas_sigma)) {
    double fused_var = prior_var * meas_var / (prior_var + meas_var);
    candidate.inv_depth =
        (candidate.inv_depth * meas_var + d_star * prior_var) / (prior_var + meas_var);
    candidate.inv_depth_var = fused_var;
    out.updated = true;
  } else {
    candidate.inv_depth_var *= cfg.inflate;
  }
  return out;
}

}  // namespace vslam
