#include "vslam/geometry.hpp"

#include <stdexcept>

namespace vslam {

namespace {
constexpr double kTiny = 1e-10;
}

Mat3 so3Exp(const Vec3& omega) {
  double theta2 = omega.squaredNorm();
  double theta = std::sqrt(theta2);
  Mat3 w = skew(omega);
  double a, b;  // R = I + a*W + b*W^2
  if (theta < kTiny) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * w + b * (w * w);
}

Vec3 so3Log(const Mat3& rotation) {
  double trace = rotation.trace();
  double cos_theta = std::min(1.0, std::max(-1.0, 0.5 * (trace - 1.0)));
  double theta = std::acos(cos_theta);
  Vec3 axis_raw(rotation(2, 1) - rotation(1, 2), rotation(0, 2) - rotation(2, 0),
                rotation(1, 0) - rotation(0, 1));
  if (theta < 1e-8) {
    // First-order: R ~ I + W.
    return 0.5 * axis_raw;
  }
  double sin_theta = std::sin(theta);
  if (sin_theta > 1e-6) {
    return (0.5 * theta / sin_theta) * axis_raw;
  }
  // Near pi: axis from the diagonal of R = I + 2*a*a^T - ... (stable branch).
  Mat3 m = 0.5 * (rotation + Mat3::Identity());
  int k;
  m.diagonal().maxCoeff(&k);
  Vec3 axis = m.col(k) / std::sqrt(std::max(m(k, k), kTiny));
  axis.normalize();
  // Fix the sign using the off-diagonal part where it is still informative.
  if (axis_raw.dot(axis) < 0) axis = -axis;
  return theta * axis;
}

Mat3 so3LeftJacobian(const Vec3& omega) {
  double theta2 = omega.squaredNorm();
  double theta = std::sqrt(theta2);
  Mat3 w = skew(omega);
  double b, c;  // J = I + b*W + c*W^2
  if (theta < kTiny) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() + b * w + c * (w * w);
}

Mat3 so3LeftJacobianInv(const Vec3& omega) {
  double theta2 = omega.squaredNorm();
  double theta = std::sqrt(theta2);
  Mat3 w = skew(omega);
  double c;  // Jinv = I - W/2 + c*W^2
  if (theta < kTiny) {
    c = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    c = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Mat3::Identity() - 0.5 * w + c * (w * w);
}

SE3 SE3::exp(const Vec6& twist) {
  Vec3 v = twist.head<3>();
  Vec3 omega = twist.tail<3>();
  return SE3(so3Exp(omega), so3LeftJacobian(omega) * v);
}

Vec6 SE3::log() const {
  Vec3 omega = so3Log(rotation_);
  Vec6 twist;
  twist.tail<3>() = omega;
  twist.head<3>() = so3LeftJacobianInv(omega) * translation_;
  return twist;
}

Mat6 SE3::adjoint() const {
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = rotation_;
  ad.bottomRightCorner<3, 3>() = rotation_;
  ad.topRightCorner<3, 3>() = skew(translation_) * rotation_;
  return ad;
}

void SE3::normalize() {
  Eigen::Quaterniond q(rotation_);
  q.normalize();
  rotation_ = q.toRotationMatrix();
}

namespace {

// Barfoot's Q(rho, omega) block of the SE(3) left Jacobian.
Mat3 se3JacobianQ(const Vec3& rho, const Vec3& omega) {
  double theta2 = omega.squaredNorm();
  double theta = std::sqrt(theta2);
  Mat3 wp = skew(rho);
  Mat3 w = skew(omega);
  Mat3 ww = w * w;

  double c1, c2, c3;  // series-safe coefficients
  if (theta < 1e-4) {
    c1 = 1.0 / 6.0 - theta2 / 120.0;
    c2 = 1.0 / 24.0 - theta2 / 720.0;
    c3 = 1.0 / 120.0 - theta2 / 2520.0;
  } else {
    double theta4 = theta2 * theta2;
    c1 = (theta - std::sin(theta)) / (theta2 * theta);
    c2 = (1.0 - 0.5 * theta2 - std::cos(theta)) / theta4;
    c3 = 0.5 * (c2 - 3.0 * (theta - std::sin(theta) - theta2 * theta / 6.0) /
                         (theta4 * theta));
  }
  Mat3 q = 0.5 * wp;
  q += c1 * (w * wp + wp * w + w * wp * w);
  q -= c2 * (ww * wp + wp * ww - 3.0 * w * wp * w);
  q -= c3 * (w * wp * ww + ww * wp * w);
  return q;
}

}  // namespace

Mat6 se3LeftJacobian(const Vec6& twist) {
  Vec3 rho = twist.head<3>();
  Vec3 omega = twist.tail<3>();
  Mat3 j = so3LeftJacobian(omega);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = j;
  out.bottomRightCorner<3, 3>() = j;
  out.topRightCorner<3, 3>() = se3JacobianQ(rho, omega);
  return out;
}

Mat6 se3LeftJacobianInv(const Vec6& twist) {
  Vec3 rho = twist.head<3>();
  Vec3 omega = twist.tail<3>();
  Mat3 jinv = so3LeftJacobianInv(omega);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = jinv;
  out.bottomRightCorner<3, 3>() = jinv;
  out.topRightCorner<3, 3>() = -jinv * se3JacobianQ(rho, omega) * jinv;
  return out;
}

Vec3 CameraModel::unproject(const Vec2& pixel, double inv_depth) const {
  if (!(inv_depth > 0.0)) {
    throw std::invalid_argument("unproject: inverse depth must be positive");
  }
  return ray(pixel) / inv_depth;
}

}  // namespace vslam
