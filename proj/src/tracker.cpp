#include "vslam/tracker.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace vslam {

namespace {

struct LevelEval {
  double energy = 0;
  int in_view = 0;
  int total = 0;
};

// Accumulates the 8x8 normal equations (6 pose + 2 affine) at the given state.
LevelEval evaluate(const AlignInput& in, int level, const SE3& cam_from_world,
                   double a, double b, Eigen::Matrix<double, 8, 8>* h,
                   Eigen::Matrix<double, 8, 1>* g) {
  LevelEval ev;
  const CameraModel cam = in.cam.atLevel(level);
  if (h) h->setZero();
  if (g) g->setZero();
  ev.total = int(in.entries.size());
  for (size_t i = 0; i < in.entries.size(); ++i) {
    const auto& e = in.entries[i];
    Vec3 xc = cam_from_world * e.x_world;
    if (xc.z() < CameraModel::kMinDepth) continue;
    Vec2 u = cam.projectRaw(xc);
    auto s = in.target->sample(level, u);
    if (!s) continue;
    double exp_a = std::exp(a - e.host_a);
    double ref = in.ref_intensity(int(i), level);
    double r = (s->intensity - b) - exp_a * (ref - e.host_b);
    double wh = huberWeight(r, in.huber_gamma);
    ev.energy += e.weight * huber(r, in.huber_gamma);
    ++ev.in_view;
    if (!h) continue;

    double iz = 1.0 / xc.z();
    double fx_iz = cam.fx * iz, fy_iz = cam.fy * iz;
    // d(pixel)/d(camera point)
    Eigen::Matrix<double, 2, 3> dproj;
    dproj << fx_iz, 0, -fx_iz * xc.x() * iz, 0, fy_iz, -fy_iz * xc.y() * iz;
    // Left-multiplied increment on cam_from_world: dX = [I | -skew(X)] delta
    Eigen::Matrix<double, 2, 6> dpix;
    dpix.leftCols<3>() = dproj;
    dpix.rightCols<3>() = -dproj * skew(xc);

    Eigen::Matrix<double, 1, 8> jac;
    jac.leftCols<6>() = s->gradient.transpose() * dpix;
    jac(6) = -exp_a * (ref - e.host_b);  // d r / d a
    jac(7) = -1.0;                       // d r / d b
    double w = e.weight * wh;
    h->noalias() += w * jac.transpose() * jac;
    g->noalias() += w * r * jac.transpose();
  }
  if (ev.in_view > 0) ev.energy /= ev.in_view;
  return ev;
}

}  // namespace

AlignResult alignPhotometric(const AlignInput& in, const SE3& init_cam_from_world,
                             double a0, double b0) {
  AlignResult res;
  SE3 state = init_cam_from_world;
  double a = a0, b = b0;

  int top = std::min(in.coarsest_level, in.target->levels() - 1);
  bool any_level_ok = false;
  for (int level = top; level >= 0; --level) {
    double lambda = 1e-4;
    Eigen::Matrix<double, 8, 8> h;
    Eigen::Matrix<double, 8, 1> g;
    LevelEval cur = evaluate(in, level, state, a, b, &h, &g);
    if (cur.in_view < 8) continue;
    any_level_ok = true;
    for (int it = 0; it < in.max_iterations; ++it) {
      Eigen::Matrix<double, 8, 8> damped = h;
      damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-9);
      Eigen::Matrix<double, 8, 1> delta = damped.ldlt().solve(-g);
      if (!delta.allFinite()) break;
      SE3 next = SE3::exp(delta.head<6>()) * state;
      double an = a + delta(6), bn = b + delta(7);
      LevelEval trial = evaluate(in, level, next, an, bn, nullptr, nullptr);
      if (trial.in_view >= 8 && trial.energy <= cur.energy) {
        double rel = (cur.energy - trial.energy) / std::max(cur.energy, 1e-12);
        state = next;
        a = an;
        b = bn;
        lambda = std::max(lambda * 0.5, 1e-7);
        cur = evaluate(in, level, state, a, b, &h, &g);
        if (rel < in.rel_decrease_eps) break;
      } else {
        lambda *= 10.0;
        if (lambda > 1e5) break;
      }
    }
  }

  Eigen::Matrix<double, 8, 8> h;
  Eigen::Matrix<double, 8, 1> g;
  LevelEval fin = evaluate(in, 0, state, a, b, &h, &g);
  res.cam_from_world = state;
  res.affine_a = a;
  res.affine_b = b;
  res.energy = fin.in_view ? fin.energy : 1e18;
  res.in_view_fraction = fin.total ? double(fin.in_view) / fin.total : 0.0;
  res.diverged = !any_level_ok || fin.in_view < 8;
  // Marginalize the affine block out of the final normal equations.
  Mat6 hpp = h.topLeftCorner<6, 6>();
  Eigen::Matrix2d haa = h.bottomRightCorner<2, 2>();
  Eigen::Matrix<double, 6, 2> hpa = h.topRightCorner<6, 2>();
  haa.diagonal().array() += 1e-9;
  res.pose_information = hpp - hpa * haa.inverse() * hpa.transpose();
  return res;
}

TrackResult trackFrame(const SlidingWindow& window, const PyramidPtr& new_pyramid,
                       const CameraModel& cam, const SE3& motion_prior,
                       const TrackingConfig& config, Rng& rng) {
  TrackResult out;
  KeyframePtr newest = window.newest();

  AlignInput in;
  in.target = new_pyramid.get();
  in.cam = cam;
  in.huber_gamma = config.huber_gamma;
  in.coarsest_level = config.coarsest_level;
  in.max_iterations = config.max_iterations;

  // Host-anchored pattern points from every active point in the window; the
  // reference intensity comes from the host pyramid at the matching level.
  struct Ref {
    const ImagePyramid* pyramid;
    Vec2 pixel;  // level-0 pattern pixel in the host image
    float level0;
  };
  std::vector<Ref> refs;
  int n_points = 0;
  for (const auto& kf : window.frames()) {
    for (const auto& pt : kf->points) {
      if (pt.status != PointStatus::Active) continue;
      for (int k = 0; k < kPatternSize; ++k) {
        Vec2 p = pt.pixel + Vec2(kPattern[k][0], kPattern[k][1]);
        Vec3 x_host = cam.unproject(p, pt.inv_depth);
        AlignInput::Entry e;
        e.x_world = kf->pose * x_host;
        e.weight = pt.weight;
        e.host_a = kf->affine_a;
        e.host_b = kf->affine_b;
        e.point = n_points;
        in.entries.push_back(e);
        refs.push_back({kf->pyramid.get(), p, pt.host_intensity[k]});
      }
      ++n_points;
    }
  }
  out.points_used = n_points;
  if (n_points < 10) {
    out.lost = true;
    return out;
  }

  in.ref_intensity = [&refs](int i, int level) -> double {
    if (level == 0) return refs[i].level0;
    double scale = 1.0 / double(1 << level);
    Vec2 p((refs[i].pixel.x() + 0.5) * scale - 0.5, (refs[i].pixel.y() + 0.5) * scale - 0.5);
    auto s = refs[i].pyramid->sample(level, p);
    return s ? s->intensity : refs[i].level0;
  };

  SE3 prior_cam_from_world = motion_prior.inverse();
  double step_hint = 0.1;
  if (window.size() >= 2) {
    step_hint = std::max(
        0.05, (window.frame(window.size() - 1)->pose.translation() -
               window.frame(window.size() - 2)->pose.translation())
                  .norm());
  }

  AlignResult best;
  bool ok = false;
  for (int attempt = 0; attempt <= config.restarts; ++attempt) {
    SE3 init = prior_cam_from_world;
    if (attempt > 0) {
      Vec6 jitter;
      for (int i = 0; i < 3; ++i) jitter[i] = rng.gaussian(0, 0.3 * step_hint);
      for (int i = 3; i < 6; ++i) jitter[i] = rng.gaussian(0, 0.02);
      init = SE3::exp(jitter) * prior_cam_from_world;
    }
    AlignResult res = alignPhotometric(in, init, newest->affine_a, newest->affine_b);
    if (!res.diverged && res.energy < config.fail_energy &&
        res.in_view_fraction > config.min_in_view_fraction) {
      best = res;
      ok = true;
      break;
    }
    if (attempt == 0 || res.energy < best.energy) best = res;
  }

  out.pose = best.cam_from_world.inverse();
  out.affine_a = best.affine_a;
  out.affine_b = best.affine_b;
  out.energy = best.energy;
  out.lost = !ok;

  // Flow statistics against the newest keyframe, for the keyframe policy.
  SE3 t_new_from_kf = best.cam_from_world * newest->pose;
  double flow_sum = 0, flow_norot_sum = 0;
  int flow_n = 0;
  for (const auto& pt : newest->points) {
    if (pt.status != PointStatus::Active) continue;
    Vec3 x_kf = cam.unproject(pt.pixel, pt.inv_depth);
    Vec3 x_new = t_new_from_kf * x_kf;
    Vec3 x_trans = x_kf + t_new_from_kf.translation();
    if (x_new.z() < CameraModel::kMinDepth || x_trans.z() < CameraModel::kMinDepth)
      continue;
    flow_sum += (cam.projectRaw(x_new) - pt.pixel).norm();
    flow_norot_sum += (cam.projectRaw(x_trans) - pt.pixel).norm();
    ++flow_n;
  }
  if (flow_n > 0) {
    out.flow = flow_sum / flow_n;
    out.flow_norot = flow_norot_sum / flow_n;
  }
  return out;
}

}  // namespace vslam
