#include "vslam/window_optimizer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace vslam {

namespace {

struct PointRef {
  int frame;  // window index of the host
  int index;  // point index within the host
};

// One (host point, target frame) pair. Residuals that wander out of view
// keep their last energy so the objective stays comparable across steps.
struct Observation {
  int point;
  int target;
  std::array<double, kPatternSize> frozen{};
};

class WindowProblem {
 public:
  WindowProblem(SlidingWindow& window, const CameraModel& cam,
                const WindowOptimizerConfig& config)
      : window_(window), cam_(cam), cfg_(config) {
    pose_dim_ = 8 * (window.size() - 1);
    row_.resize(std::max(pose_dim_, 1));
    for (int fi = 0; fi < window.size(); ++fi) {
      const auto& kf = *window.frame(fi);
      for (int pi = 0; pi < int(kf.points.size()); ++pi) {
        if (kf.points[pi].status != PointStatus::Active) continue;
        points_.push_back({fi, pi});
      }
    }
    if (cam_.fx > 0) buildObservations();
  }

  int pointCount() const { return int(points_.size()); }
  int obsCount() const { return int(obs_.size()); }
  int poseDim() const { return pose_dim_; }

  int dropOutliers() {
    if (obs_.size() < 8) return 0;
    std::vector<double> energies(obs_.size());
    for (size_t i = 0; i < obs_.size(); ++i) energies[i] = evaluate(obs_[i]);
    std::vector<double> sorted = energies;
    size_t mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
    double cutoff = std::max(cfg_.outlier_energy_factor * sorted[mid], 1e-9);
    std::vector<Observation> kept;
    kept.reserve(obs_.size());
    for (size_t i = 0; i < obs_.size(); ++i)
      if (energies[i] <= cutoff) kept.push_back(obs_[i]);
    int dropped = int(obs_.size() - kept.size());
    obs_ = std::move(kept);
    return dropped;
  }

  double totalEnergy() {
    double e = affinePriorEnergy();
    for (auto& o : obs_) e += evaluate(o, nullptr, true);
    return e;
  }

  // Same objective but out-of-view residuals keep their stored cost; used by
  // finite-difference probes so the objective stays continuous.
  double frozenEnergy() {
    double e = affinePriorEnergy();
    for (auto& o : obs_) e += evaluate(o, nullptr, false);
    return e;
  }

  double meanPatternEnergy() {
    if (obs_.empty()) return 0;
    double e = 0;
    for (auto& o : obs_) e += evaluate(o);
    return e / double(obs_.size());
  }

  struct Normal {
    Eigen::MatrixXd a;   // pose-affine block
    Eigen::MatrixXd b;   // pose-affine x depth
    Eigen::VectorXd d;   // depth diagonal
    Eigen::VectorXd gp;  // gradients
    Eigen::VectorXd gd;
  };

  Normal buildNormal() {
    Normal n;
    n.a = Eigen::MatrixXd::Zero(pose_dim_, pose_dim_);
    n.b = Eigen::MatrixXd::Zero(pose_dim_, pointCount());
    n.d = Eigen::VectorXd::Zero(pointCount());
    n.gp = Eigen::VectorXd::Zero(pose_dim_);
    n.gd = Eigen::VectorXd::Zero(pointCount());
    for (auto& o : obs_) evaluate(o, &n);
    for (int fi = 1; fi < window_.size(); ++fi) {
      const auto& kf = *window_.frame(fi);
      int base = 8 * (fi - 1);
      n.a(base + 6, base + 6) += 2 * cfg_.affine_prior_a;
      n.a(base + 7, base + 7) += 2 * cfg_.affine_prior_b;
      n.gp(base + 6) += 2 * cfg_.affine_prior_a * kf.affine_a;
      n.gp(base + 7) += 2 * cfg_.affine_prior_b * kf.affine_b;
    }
    return n;
  }

  bool solveStep(const Normal& n0, double lambda, Eigen::VectorXd& delta) const {
    Eigen::MatrixXd a = n0.a;
    Eigen::VectorXd d = n0.d;
    a.diagonal() += lambda * a.diagonal().cwiseMax(1e-9);
    d += lambda * d.cwiseMax(1e-9);
    for (int i = 0; i < d.size(); ++i) d[i] = std::max(d[i], 1e-12);

    Eigen::VectorXd dinv = d.cwiseInverse();
    Eigen::MatrixXd schur = a - n0.b * dinv.asDiagonal() * n0.b.transpose();
    Eigen::VectorXd rhs = -n0.gp + n0.b * (dinv.asDiagonal() * n0.gd);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(schur);
    Eigen::VectorXd dp = ldlt.solve(rhs);
    if (!dp.allFinite()) return false;
    Eigen::VectorXd dd = dinv.asDiagonal() * (-n0.gd - n0.b.transpose() * dp);
    if (!dd.allFinite()) return false;
    delta.resize(pose_dim_ + pointCount());
    delta << dp, dd;
    return true;
  }

  Eigen::VectorXd gradient() {
    Normal n;
    n.b.resize(0, 0);
    n.gp = Eigen::VectorXd::Zero(pose_dim_);
    n.gd = Eigen::VectorXd::Zero(pointCount());
    for (auto& o : obs_) evaluate(o, &n, false, /*gradient_only=*/true);
    for (int fi = 1; fi < window_.size(); ++fi) {
      const auto& kf = *window_.frame(fi);
      n.gp(8 * (fi - 1) + 6) += 2 * cfg_.affine_prior_a * kf.affine_a;
      n.gp(8 * (fi - 1) + 7) += 2 * cfg_.affine_prior_b * kf.affine_b;
    }
    Eigen::VectorXd g(pose_dim_ + pointCount());
    g << n.gp, n.gd;
    return g;
  }

  void apply(const Eigen::VectorXd& delta) {
    for (int fi = 1; fi < window_.size(); ++fi) {
      auto& kf = *window_.frame(fi);
      int base = 8 * (fi - 1);
      kf.pose = kf.pose * SE3::exp(delta.segment<6>(base));
      kf.pose.normalize();
      kf.affine_a += delta(base + 6);
      kf.affine_b += delta(base + 7);
    }
    for (int pi = 0; pi < pointCount(); ++pi) {
      auto& pt = point(pi);
      double next = pt.inv_depth + delta(pose_dim_ + pi);
      next = std::clamp(next, pt.inv_depth * 0.1, pt.inv_depth * 10.0);
      pt.inv_depth = std::clamp(next, 1e-5, 1e3);
    }
  }

  struct Snapshot {
    std::vector<SE3> poses;
    std::vector<double> affine;
    std::vector<double> depths;
  };

  Snapshot save() const {
    Snapshot s;
    for (const auto& f : window_.frames()) {
      s.poses.push_back(f->pose);
      s.affine.push_back(f->affine_a);
      s.affine.push_back(f->affine_b);
    }
    for (const auto& pr : points_)
      s.depths.push_back(window_.frame(pr.frame)->points[pr.index].inv_depth);
    return s;
  }

  void restore(const Snapshot& s) {
    for (int fi = 0; fi < window_.size(); ++fi) {
      window_.frame(fi)->pose = s.poses[fi];
      window_.frame(fi)->affine_a = s.affine[2 * fi];
      window_.frame(fi)->affine_b = s.affine[2 * fi + 1];
    }
    for (size_t pi = 0; pi < points_.size(); ++pi)
      window_.frame(points_[pi].frame)->points[points_[pi].index].inv_depth =
          s.depths[pi];
  }

 private:
  InverseDepthPoint& point(int pi) {
    return window_.frame(points_[pi].frame)->points[points_[pi].index];
  }

  double affinePriorEnergy() const {
    double e = 0;
    for (int fi = 1; fi < window_.size(); ++fi) {
      const auto& kf = *window_.frame(fi);
      e += cfg_.affine_prior_a * kf.affine_a * kf.affine_a +
           cfg_.affine_prior_b * kf.affine_b * kf.affine_b;
    }
    return e;
  }

  void buildObservations() {
    for (int pi = 0; pi < pointCount(); ++pi) {
      const auto& pr = points_[pi];
      const auto& host = *window_.frame(pr.frame);
      const auto& pt = host.points[pr.index];
      for (int t = 0; t < window_.size(); ++t) {
        if (t == pr.frame) continue;
        const auto& target = *window_.frame(t);
        SE3 t_th = target.pose.inverse() * host.pose;
        Vec3 xt = t_th * cam_.unproject(pt.pixel, pt.inv_depth);
        if (xt.z() < CameraModel::kMinDepth) continue;
        if (!cam_.project(xt)) continue;
        obs_.push_back({pi, t, {}});
      }
    }
  }

  // Energy of one observation's pattern; optionally accumulates gradient and
  // normal equations. `update_frozen` refreshes the out-of-view cache.
  double evaluate(Observation& o, Normal* n = nullptr, bool update_frozen = false,
                  bool gradient_only = false) {
    const auto& pr = points_[o.point];
    auto& host = *window_.frame(pr.frame);
    auto& pt = host.points[pr.index];
    auto& target = *window_.frame(o.target);
    SE3 t_th = target.pose.inverse() * host.pose;
    const Mat3& r_th = t_th.rotation();
    double exp_a = std::exp(target.affine_a - host.affine_a);
    const int hf = pr.frame, tf = o.target;

    double energy = 0;
    for (int k = 0; k < kPatternSize; ++k) {
      Vec2 p = pt.pixel + Vec2(kPattern[k][0], kPattern[k][1]);
      Vec3 xh = cam_.unproject(p, pt.inv_depth);
      Vec3 xt = t_th * xh;
      std::optional<SampleResult> s;
      if (xt.z() > CameraModel::kMinDepth)
        s = target.pyramid->sample(0, cam_.projectRaw(xt));
      if (!s) {
        energy += o.frozen[k];
        continue;
      }
      double r = (s->intensity - target.affine_b) -
                 exp_a * (pt.host_intensity[k] - host.affine_b);
      double cost = pt.weight * huber(r, cfg_.huber_gamma);
      energy += cost;
      if (update_frozen) o.frozen[k] = cost;
      if (!n) continue;

      double wh = pt.weight * huberWeight(r, cfg_.huber_gamma);
      double iz = 1.0 / xt.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << cam_.fx * iz, 0, -cam_.fx * xt.x() * iz * iz, 0, cam_.fy * iz,
          -cam_.fy * xt.y() * iz * iz;
      Eigen::Matrix<double, 1, 3> gproj = s->gradient.transpose() * dproj;

      // Pose-affine Jacobian row (right-increments on world_from_cam).
      row_.setZero();
      if (hf > 0) {
        int base = 8 * (hf - 1);
        Eigen::Matrix<double, 1, 3> g_r = gproj * r_th.matrix();
        row_.segment<3>(base) = g_r.transpose();
        row_.segment<3>(base + 3) = (-g_r * skew(xh)).transpose();
        row_(base + 6) = exp_a * (pt.host_intensity[k] - host.affine_b);
        row_(base + 7) = exp_a;
      }
      if (tf > 0) {
        int base = 8 * (tf - 1);
        row_.segment<3>(base) -= gproj.transpose();
        row_.segment<3>(base + 3) += (gproj * skew(xt)).transpose();
        row_(base + 6) += -exp_a * (pt.host_intensity[k] - host.affine_b);
        row_(base + 7) += -1.0;
      }
      double ddepth = gproj.dot(r_th * (-xh / pt.inv_depth));

      n->gp.noalias() += wh * r * row_;
      n->gd(o.point) += wh * r * ddepth;
      if (!gradient_only) {
        n->a.noalias() += wh * row_ * row_.transpose();
        n->b.col(o.point).noalias() += wh * ddepth * row_;
        n->d(o.point) += wh * ddepth * ddepth;
      }
    }
    return energy;
  }

  SlidingWindow& window_;
  CameraModel cam_;
  WindowOptimizerConfig cfg_;
  std::vector<PointRef> points_;
  std::vector<Observation> obs_;
  int pose_dim_ = 0;
  Eigen::VectorXd row_;
};

}  // namespace

WindowOptimizeResult optimizeWindow(SlidingWindow& window, const CameraModel& cam,
                                    const WindowOptimizerConfig& config) {
  WindowOptimizeResult res;
  if (window.size() < 2) return res;
  WindowProblem problem(window, cam, config);
  res.dropped_observations = problem.dropOutliers();
  double energy = problem.totalEnergy();
  res.initial_energy = energy;
  res.accepted_energies.push_back(energy);

  double lambda = config.initial_lambda;
  for (int it = 0; it < config.max_iterations; ++it) {
    ++res.iterations;
    auto normal = problem.buildNormal();
    Eigen::VectorXd delta;
    bool solved = problem.solveStep(normal, lambda, delta);
    if (!solved) {
      lambda *= 10;
      if (lambda > config.max_lambda) break;
      continue;
    }
    auto snapshot = problem.save();
    problem.apply(delta);
    double trial = problem.totalEnergy();
    if (trial <= energy) {
      double rel = (energy - trial) / std::max(energy, 1e-12);
      energy = trial;
      res.accepted_energies.push_back(energy);
      lambda = std::max(lambda * 0.5, 1e-7);
      if (rel < config.rel_decrease_eps) break;
    } else {
      problem.restore(snapshot);
      lambda *= 10;
      if (lambda > config.max_lambda) break;
    }
  }
  res.final_energy = energy;
  res.mean_pattern_energy = problem.meanPatternEnergy();
  return res;
}

double windowEnergy(SlidingWindow& window, const CameraModel& cam,
                    const WindowOptimizerConfig& config) {
  WindowProblem problem(window, cam, config);
  return problem.totalEnergy();
}

Eigen::VectorXd windowGradient(SlidingWindow& window, const CameraModel& cam,
                               const WindowOptimizerConfig& config) {
  WindowProblem problem(window, cam, config);
  return problem.gradient();
}

void applyWindowDelta(SlidingWindow& window, const Eigen::VectorXd& delta) {
  WindowProblem problem(window, CameraModel{}, WindowOptimizerConfig{});
  problem.apply(delta);
}

int windowVariableCount(const SlidingWindow& window) {
  int n = 8 * (window.size() - 1);
  for (const auto& f : window.frames()) n += f->countActive();
  return n;
}

struct WindowEvaluator::Impl {
  Impl(SlidingWindow& window, const CameraModel& cam,
       const WindowOptimizerConfig& config)
      : problem(window, cam, config) {
    problem.totalEnergy();  // seeds the frozen out-of-view costs
  }
  WindowProblem problem;
};

WindowEvaluator::WindowEvaluator(SlidingWindow& window, const CameraModel& cam,
                                 const WindowOptimizerConfig& config)
    : impl_(std::make_unique<Impl>(window, cam, config)) {}

WindowEvaluator::~WindowEvaluator() = default;

double WindowEvaluator::energyAt(const Eigen::VectorXd& delta) {
  auto snapshot = impl_->problem.save();
  impl_->problem.apply(delta);
  double e = impl_->problem.frozenEnergy();
  impl_->problem.restore(snapshot);
  return e;
}

Eigen::VectorXd WindowEvaluator::gradient() { return impl_->problem.gradient(); }

int WindowEvaluator::variableCount() const {
  return impl_->problem.poseDim() + impl_->problem.pointCount();
}

}  // namespace vslam
