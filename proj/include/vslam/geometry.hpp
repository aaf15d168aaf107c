#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <optional>

namespace vslam {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

Mat3 so3Exp(const Vec3& omega);
Vec3 so3Log(const Mat3& rotation);

// Left Jacobian of SO(3) and its inverse.
Mat3 so3LeftJacobian(const Vec3& omega);
Mat3 so3LeftJacobianInv(const Vec3& omega);

/// Rigid transform. Twist convention is (v, omega): translation first.
class SE3 {
 public:
  SE3() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  SE3(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}
  SE3(const Eigen::Quaterniond& q, const Vec3& translation)
      : rotation_(q.normalized().toRotationMatrix()), translation_(translation) {}

  static SE3 exp(const Vec6& twist);
  Vec6 log() const;

  SE3 inverse() const {
    Mat3 rt = rotation_.transpose();
    return SE3(rt, -(rt * translation_));
  }

  SE3 operator*(const SE3& other) const {
    return SE3(rotation_ * other.rotation_,
               rotation_ * other.translation_ + translation_);
  }

  Vec3 operator*(const Vec3& point) const {
    return rotation_ * point + translation_;
  }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Vec3& translation() { return translation_; }
  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation_); }

  /// Adjoint: maps twists through this transform, Ad(T) = [[R, [t]x R],[0, R]].
  Mat6 adjoint() const;

  /// Re-orthonormalize the rotation block (guards against drift after long
  /// chains of composition).
  void normalize();

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

// Left Jacobian of SE(3) (Barfoot's 6x6 block form) and its inverse.
Mat6 se3LeftJacobian(const Vec6& twist);
Mat6 se3LeftJacobianInv(const Vec6& twist);

/// Similarity transform, used only for trajectory alignment.
class Sim3 {
 public:
  Sim3() : scale_(1.0) {}
  Sim3(double scale, const Mat3& rotation, const Vec3& translation)
      : scale_(scale), se3_(rotation, translation) {}

  Vec3 operator*(const Vec3& point) const {
    return scale_ * (se3_.rotation() * point) + se3_.translation();
  }

  double scale() const { return scale_; }
  const Mat3& rotation() const { return se3_.rotation(); }
  const Vec3& translation() const { return se3_.translation(); }

 private:
  double scale_;
  SE3 se3_;
};

/// Pinhole camera for rectified images.
struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  // Minimum depth accepted by project(); rejects numerically unstable
  // near-plane points.
  static constexpr double kMinDepth = 1e-3;
  // Residual pattern and gradient stencils need neighbors.
  static constexpr double kBorder = 2.0;

  /// Camera for pyramid level `level` (0 = full resolution).
  CameraModel atLevel(int level) const {
    CameraModel c;
    double inv = 1.0 / double(1 << level);
    c.fx = fx * inv;
    c.fy = fy * inv;
    c.cx = (cx + 0.5) * inv - 0.5;
    c.cy = (cy + 0.5) * inv - 0.5;
    c.width = width >> level;
    c.height = height >> level;
    return c;
  }

  /// Raw pinhole projection, no bounds check. Requires positive depth.
  Vec2 projectRaw(const Vec3& point) const {
    return Vec2(fx * point.x() / point.z() + cx, fy * point.y() / point.z() + cy);
  }

  bool inImage(const Vec2& pixel, double border = kBorder) const {
    return pixel.x() >= border && pixel.x() <= width - 1 - border &&
           pixel.y() >= border && pixel.y() <= height - 1 - border;
  }

  /// Projection with depth and image-bound checks; nullopt means out-of-view
  /// (caller drops the residual).
  std::optional<Vec2> project(const Vec3& point, double border = kBorder) const {
    if (!(point.z() > kMinDepth)) return std::nullopt;
    Vec2 pixel = projectRaw(point);
    if (!inImage(pixel, border)) return std::nullopt;
    return pixel;
  }

  /// Back-projection of pixel p at inverse depth d. Throws for d <= 0.
  Vec3 unproject(const Vec2& pixel, double inv_depth) const;

  /// Unit-z ray through pixel p (back-projection at depth 1).
  Vec3 ray(const Vec2& pixel) const {
    return Vec3((pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0);
  }
};

/// Huber cost: quadratic inside |r| <= gamma, linear outside. C1 at the knee.
inline double huber(double residual, double gamma) {
  double a = std::abs(residual);
  if (a <= gamma) return 0.5 * residual * residual;
  return gamma * (a - 0.5 * gamma);
}

/// IRLS weight for the Huber cost: d(huber)/dr = huberWeight(r) * r.
inline double huberWeight(double residual, double gamma) {
  double a = std::abs(residual);
  return a <= gamma ? 1.0 : gamma / a;
}

}  // namespace vslam
