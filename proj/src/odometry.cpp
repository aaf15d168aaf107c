#include "vslam/odometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vslam {

bool makeKeyframeDecision(double flow, double flow_norot, double affine_delta,
                          double tracking_energy, double mean_energy,
                          const KeyframePolicy& policy) {
  double score = flow / policy.flow_threshold + flow_norot / policy.flow_norot_threshold +
                 std::abs(affine_delta) / policy.affine_threshold;
  if (score > 1.0) return true;
  if (mean_energy > 0 && tracking_energy > policy.energy_factor * mean_energy)
    return true;
  return false;
}

int chooseMarginalizationVictim(const SlidingWindow& window, const CameraModel& cam,
                                double min_visibility, bool over_capacity) {
  if (window.size() < 3) return -1;
  const Keyframe& newest = *window.newest();

  std::vector<double> visibility(window.size(), 1.0);
  for (int fi = 0; fi + 1 < window.size(); ++fi) {
    const Keyframe& kf = *window.frame(fi);
    SE3 t_nh = newest.pose.inverse() * kf.pose;
    int total = 0, seen = 0;
    for (const auto& pt : kf.points) {
      if (pt.status != PointStatus::Active) continue;
      ++total;
      Vec3 xn = t_nh * cam.unproject(pt.pixel, pt.inv_depth);
      if (xn.z() > CameraModel::kMinDepth && cam.project(xn)) ++seen;
    }
    visibility[fi] = total > 0 ? double(seen) / total : 0.0;
  }

  // Among low-visibility frames, retire the one with the largest distance
  // score (far from the rest of the window but near the newest frame).
  int best = -1;
  double best_score = -1e18;
  for (int fi = 0; fi + 1 < window.size(); ++fi) {
    if (visibility[fi] >= min_visibility) continue;
    const Vec3 ti = window.frame(fi)->pose.translation();
    double sum_inv = 0;
    for (int fj = 0; fj < window.size() - 1; ++fj) {
      if (fj == fi) continue;
      sum_inv += 1.0 / (1e-3 + (ti - window.frame(fj)->pose.translation()).norm());
    }
    double score =
        std::sqrt((ti - newest.pose.translation()).norm()) * sum_inv;
    if (score > best_score) {
      best_score = score;
      best = fi;
    }
  }
  if (best >= 0) return best;
  return over_capacity ? 0 : -1;
}

DirectOdometry::DirectOdometry(const CameraModel& cam, const OdometryConfig& config,
                               uint64_t seed)
    : cam_(cam), cfg_(config), rng_(seed), window_(config.max_keyframes) {}

double DirectOdometry::meanTrackingEnergy() const {
  if (recent_energies_.empty()) return 0;
  return std::accumulate(recent_energies_.begin(), recent_energies_.end(), 0.0) /
         double(recent_energies_.size());
}

KeyframePtr DirectOdometry::createKeyframe(const PyramidPtr& pyramid, const SE3& pose,
                                           double a, double b, double timestamp) {
  auto kf = std::make_shared<Keyframe>();
  kf->id = next_id_++;
  kf->pyramid = pyramid;
  kf->camera = cam_;
  kf->pose = pose;
  kf->affine_a = a;
  kf->affine_b = b;
  kf->timestamp = timestamp;
  kf->setLinearizationPose(pose);

  if (!window_.empty()) {
    arclength_ += (pose.translation() - window_.newest()->pose.translation()).norm();
  }
  kf->arclength = arclength_;

  auto candidates = selectPoints(*pyramid, cam_, cfg_.points_per_keyframe, rng_,
                                 cfg_.selection);
  // Prior inverse depth: median of the active points visible in this frame,
  // which keeps the epipolar search window sane; 1.0 for the very first frame.
  double prior = 1.0;
  if (!window_.empty()) {
    std::vector<double> depths;
    SE3 t_kw = pose.inverse();
    for (const auto& f : window_.frames()) {
      for (const auto& pt : f->points) {
        if (pt.status != PointStatus::Active) continue;
        Vec3 xk = t_kw * (f->pose * cam_.unproject(pt.pixel, pt.inv_depth));
        if (xk.z() > CameraModel::kMinDepth && cam_.project(xk))
          depths.push_back(1.0 / xk.z());
      }
    }
    if (depths.size() > 10) {
      std::nth_element(depths.begin(), depths.begin() + depths.size() / 2,
                       depths.end());
      prior = depths[depths.size() / 2];
    }
  }
  for (auto& c : candidates) {
    c.host_id = kf->id;
    c.inv_depth = prior;
    c.inv_depth_var = prior * prior;  // ~100% relative sigma
    c.status = window_.empty() ? PointStatus::Active : PointStatus::Candidate;
  }
  kf->points = std::move(candidates);
  window_.push(kf);
  return kf;
}

void DirectOdometry::refineCandidates(const SE3& frame_pose,
                                      const ImagePyramid& pyramid, double a,
                                      double b) {
  bool bootstrap = window_.size() < 2;
  for (const auto& kf : window_.frames()) {
    for (auto& pt : kf->points) {
      bool refine = pt.status == PointStatus::Candidate ||
                    (bootstrap && pt.status == PointStatus::Active);
      if (!refine) continue;
      refineCandidateDepth(pt, *kf, frame_pose, pyramid, cam_, a, b, cfg_.depth);
      if (pt.status == PointStatus::Candidate &&
          std::sqrt(pt.inv_depth_var) / pt.inv_depth < cfg_.depth.promote_sigma_ratio) {
        pt.status = PointStatus::Active;
      }
    }
  }
}

FrameSummary DirectOdometry::processFrame(const Image& image, double timestamp) {
  FrameSummary out;
  auto pyramid = std::make_shared<ImagePyramid>(image);

  if (window_.empty()) {
    out.created_keyframe = createKeyframe(pyramid, last_pose_, 0, 0, timestamp);
    out.is_keyframe = true;
    out.tracked = true;
    out.pose = last_pose_;
    has_last_ = false;
    frames_since_keyframe_ = 0;
    return out;
  }

  SE3 prior = has_last_ ? SE3(last_motion_ * last_pose_) : last_pose_;
  TrackResult track = trackFrame(window_, pyramid, cam_, prior, cfg_.tracking, rng_);
  if (track.lost) {
    out.lost = true;
    return out;
  }
  out.tracked = true;
  out.pose = track.pose;
  out.tracking_energy = track.energy;

  refineCandidates(track.pose, *pyramid, track.affine_a, track.affine_b);

  double affine_delta = track.affine_a - window_.newest()->affine_a;
  ++frames_since_keyframe_;
  bool want_kf = makeKeyframeDecision(track.flow, track.flow_norot, affine_delta,
                                      track.energy, meanTrackingEnergy(),
                                      cfg_.keyframe) ||
                 frames_since_keyframe_ >= cfg_.keyframe.max_frame_gap;
  // Bootstrap: force an early second keyframe once there is measurable flow.
  if (window_.size() == 1 && track.flow_norot > 2.0) want_kf = true;

  recent_energies_.push_back(track.energy);
  if (recent_energies_.size() > 20) recent_energies_.pop_front();

  if (want_kf) {
    out.is_keyframe = true;
    frames_since_keyframe_ = 0;
    out.created_keyframe =
        createKeyframe(pyramid, track.pose, track.affine_a, track.affine_b, timestamp);
    out.window_result = optimizeWindow(window_, cam_, cfg_.window);
    mean_pattern_energy_ = out.window_result.mean_pattern_energy;

    bool over = window_.size() > window_.maxKeyframes();
    int victim = chooseMarginalizationVictim(window_, cam_, cfg_.min_visibility, over);
    if (victim >= 0) {
      KeyframePtr retired = window_.removeAt(victim);
      retired->is_marginalized = true;
      for (auto& pt : retired->points) {
        if (pt.status == PointStatus::Active) pt.status = PointStatus::Marginalized;
        else if (pt.status == PointStatus::Candidate) pt.status = PointStatus::Outlier;
      }
      out.marginalized_keyframe = retired;
    }
  }

  SE3 new_last = out.is_keyframe ? window_.newest()->pose : track.pose;
  if (has_last_ || !window_.empty()) {
    last_motion_ = new_last * last_pose_.inverse();
    has_last_ = true;
  }
  last_pose_ = new_last;
  return out;
}

void DirectOdometry::reset() {
  window_ = SlidingWindow(cfg_.max_keyframes);
  recent_energies_.clear();
  has_last_ = false;
  frames_since_keyframe_ = 0;
  mean_pattern_energy_ = 0;
}

}  // namespace vslam
