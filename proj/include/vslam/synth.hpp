#pragma once

#include <vector>

#include "vslam/geometry.hpp"
#include "vslam/pyramid.hpp"
#include "vslam/rng.hpp"
#include "vslam/stereo_rig.hpp"

namespace vslam {

/// Finite textured quad: origin + a*edge_u + b*edge_v, (a, b) in [0,1]^2.
/// The procedural texture is a band-limited sum of oriented sinusoids in
/// metric surface coordinates, smooth at every pyramid level.
struct TexturedQuad {
  Vec3 origin = Vec3::Zero();
  Vec3 edge_u = Vec3::UnitX();
  Vec3 edge_v = Vec3::UnitY();
  double base = 128.0;
  std::array<double, 4> amplitude{38, 26, 20, 16};
  std::array<double, 4> frequency{0.05, 0.2, 0.8, 2.6};   // cycles / meter
  std::array<double, 4> orientation{0.1, 1.2, 2.3, 0.7};  // radians
  std::array<double, 4> phase{0, 1, 2, 3};

  double intensityAt(double u, double v) const;
  void randomizeTexture(Rng& rng);
};

struct SceneSpec {
  std::vector<TexturedQuad> quads;
  double background = 36.0;

  /// Single wall facing +z at the given depth, centered on the optical axis.
  static SceneSpec frontoPlane(double depth, double half_width, double half_height,
                               Rng& rng);
  /// Straight corridor along +z: two side walls and a ground plane.
  static SceneSpec corridor(double length, double half_width, double wall_height,
                            double cam_height, Rng& rng);
  /// Ground plane plus random textured boxes lining a closed route (for loop
  /// and place-recognition scenarios). Route points are ground-level (x, z).
  static SceneSpec boxTown(const std::vector<Vec2>& route, double road_half_width,
                           double cam_height, Rng& rng, int boxes_per_100m = 22);

  static void addBox(SceneSpec& scene, const Vec3& center, const Vec3& size, Rng& rng);
};

struct RenderedView {
  Image image;
  std::vector<float> depth;  // z in camera frame per pixel; 0 where no surface
};

/// Ray-casts the scene into a pinhole view. Deterministic; optional Gaussian
/// intensity noise is drawn from `noise_rng` when sigma > 0.
RenderedView renderView(const SceneSpec& scene, const CameraModel& cam,
                        const SE3& world_from_cam, double noise_sigma = 0.0,
                        Rng* noise_rng = nullptr);

/// Camera path helpers. Poses are world_from_cam with z forward along the
/// local tangent, x right, y down (driving convention).
std::vector<SE3> straightPath(const Vec3& start, const Vec3& direction, double length,
                              double step);
/// Closed square circuit with rounded corners in the ground plane (y = 0),
/// starting along +z. `side` is the straight length, corners are quarter arcs.
std::vector<SE3> squareCircuitPath(double side, double corner_radius, double step,
                                   double extra = 0.0);
std::vector<Vec2> squareCircuitRoute(double side, double corner_radius);

/// Photometric corruptions for robustness harnesses.
Image withBias(const Image& img, double bias);
Image withGainBias(const Image& img, double gain, double bias);
/// Smooth horizontal lighting gradient plus gamma-like warp; changes scene
/// appearance enough to defeat brightness-constancy assumptions.
Image withLightingCorruption(const Image& img, Rng& rng, double strength = 1.0);

}  // namespace vslam
