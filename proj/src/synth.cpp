#include "vslam/synth.hpp"

#include <algorithm>
#include <cmath>

namespace vslam {

double TexturedQuad::intensityAt(double u, double v) const {
  double value = base;
  for (size_t k = 0; k < amplitude.size(); ++k) {
    double c = std::cos(orientation[k]);
    double s = std::sin(orientation[k]);
    double arg = 2.0 * M_PI * frequency[k] * (u * c + v * s) + phase[k];
    double arg2 = 2.0 * M_PI * frequency[k] * 0.81 * (-u * s + v * c) + 1.7 * phase[k];
    value += amplitude[k] * std::sin(arg) * std::cos(arg2);
  }
  return std::clamp(value, 4.0, 251.0);
}

void TexturedQuad::randomizeTexture(Rng& rng) {
  base = rng.uniform(100, 160);
  for (size_t k = 0; k < amplitude.size(); ++k) {
    orientation[k] = rng.uniform(0, M_PI);
    phase[k] = rng.uniform(0, 2 * M_PI);
    frequency[k] *= rng.uniform(0.7, 1.4);
    amplitude[k] *= rng.uniform(0.75, 1.25);
  }
}

SceneSpec SceneSpec::frontoPlane(double depth, double half_width, double half_height,
                                 Rng& rng) {
  SceneSpec scene;
  TexturedQuad q;
  q.origin = Vec3(-half_width, -half_height, depth);
  q.edge_u = Vec3(2 * half_width, 0, 0);
  q.edge_v = Vec3(0, 2 * half_height, 0);
  q.randomizeTexture(rng);
  scene.quads.push_back(q);
  return scene;
}

SceneSpec SceneSpec::corridor(double length, double half_width, double wall_height,
                              double cam_height, Rng& rng) {
  SceneSpec scene;
  // y is down; the ground sits cam_height below the camera origin.
  TexturedQuad left;
  left.origin = Vec3(-half_width, cam_height, -10.0);
  left.edge_u = Vec3(0, 0, length + 20.0);
  left.edge_v = Vec3(0, -wall_height, 0);
  left.randomizeTexture(rng);
  scene.quads.push_back(left);

  TexturedQuad right = left;
  right.origin = Vec3(half_width, cam_height, -10.0);
  right.randomizeTexture(rng);
  scene.quads.push_back(right);

  TexturedQuad ground;
  ground.origin = Vec3(-half_width, cam_height, -10.0);
  ground.edge_u = Vec3(2 * half_width, 0, 0);
  ground.edge_v = Vec3(0, 0, length + 20.0);
  ground.randomizeTexture(rng);
  // The ground is seen at a grazing angle; finer texture keeps it useful.
  for (auto& f : ground.frequency) f *= 1.6;
  scene.quads.push_back(ground);

  TexturedQuad back;
  back.origin = Vec3(-half_width, cam_height, length + 10.0);
  back.edge_u = Vec3(2 * half_width, 0, 0);
  back.edge_v = Vec3(0, -wall_height, 0);
  back.randomizeTexture(rng);
  scene.quads.push_back(back);
  return scene;
}

void SceneSpec::addBox(SceneSpec& scene, const Vec3& center, const Vec3& size,
                       Rng& rng) {
  Vec3 h = 0.5 * size;
  auto face = [&](const Vec3& origin, const Vec3& eu, const Vec3& ev) {
    TexturedQuad q;
    q.origin = origin;
    q.edge_u = eu;
    q.edge_v = ev;
    q.randomizeTexture(rng);
    scene.quads.push_back(q);
  };
  Vec3 lo = center - h, hi = center + h;
  // Four side faces plus the top (y is down, so the top face is at lo.y()).
  face(Vec3(lo.x(), hi.y(), lo.z()), Vec3(size.x(), 0, 0), Vec3(0, -size.y(), 0));
  face(Vec3(lo.x(), hi.y(), hi.z()), Vec3(size.x(), 0, 0), Vec3(0, -size.y(), 0));
  face(Vec3(lo.x(), hi.y(), lo.z()), Vec3(0, 0, size.z()), Vec3(0, -size.y(), 0));
  face(Vec3(hi.x(), hi.y(), lo.z()), Vec3(0, 0, size.z()), Vec3(0, -size.y(), 0));
  face(Vec3(lo.x(), lo.y(), lo.z()), Vec3(size.x(), 0, 0), Vec3(0, 0, size.z()));
}

SceneSpec SceneSpec::boxTown(const std::vector<Vec2>& route, double road_half_width,
                             double cam_height, Rng& rng, int boxes_per_100m) {
  SceneSpec scene;
  double min_x = 1e9, max_x = -1e9, min_z = 1e9, max_z = -1e9;
  double route_len = 0;
  for (size_t i = 0; i < route.size(); ++i) {
    min_x = std::min(min_x, route[i].x());
    max_x = std::max(max_x, route[i].x());
    min_z = std::min(min_z, route[i].y());
    max_z = std::max(max_z, route[i].y());
    if (i) route_len += (route[i] - route[i - 1]).norm();
  }
  double margin = 60;
  TexturedQuad ground;
  ground.origin = Vec3(min_x - margin, cam_height, min_z - margin);
  ground.edge_u = Vec3(max_x - min_x + 2 * margin, 0, 0);
  ground.edge_v = Vec3(0, 0, max_z - min_z + 2 * margin);
  ground.randomizeTexture(rng);
  for (auto& f : ground.frequency) f *= 1.5;
  scene.quads.push_back(ground);

  int n_boxes = std::max(4, int(route_len * boxes_per_100m / 100.0));
  double spacing = route_len / n_boxes;
  // Walk the route and drop boxes on alternating sides.
  double walked = 0;
  size_t seg = 1;
  double next_drop = spacing * 0.5;
  int side = 1;
  while (seg < route.size()) {
    Vec2 a = route[seg - 1], b = route[seg];
    double len = (b - a).norm();
    if (len < 1e-9) {
      ++seg;
      continue;
    }
    while (next_drop <= walked + len && next_drop <= route_len) {
      double t = (next_drop - walked) / len;
      Vec2 at = a + t * (b - a);
      Vec2 tangent = (b - a) / len;
      Vec2 normal(-tangent.y(), tangent.x());
      double lateral = road_half_width + rng.uniform(4.0, 12.0);
      Vec2 pos2 = at + double(side) * lateral * normal;
      double sx = rng.uniform(5, 14), sy = rng.uniform(5, 13), sz = rng.uniform(5, 14);
      Vec3 center(pos2.x(), cam_height - sy / 2, pos2.y());
      addBox(scene, center, Vec3(sx, sy, sz), rng);
      side = -side;
      next_drop += spacing;
    }
    walked += len;
    ++seg;
  }
  return scene;
}

namespace {

struct QuadGeom {
  Vec3 normal;
  double inv_len_u2, inv_len_v2, len_u, len_v;
};

}  // namespace

RenderedView renderView(const SceneSpec& scene, const CameraModel& cam,
                        const SE3& world_from_cam, double noise_sigma, Rng* noise_rng) {
  RenderedView out;
  out.image = Image(cam.width, cam.height, float(scene.background));
  out.depth.assign(size_t(cam.width) * cam.height, 0.f);

  const Vec3 origin = world_from_cam.translation();
  const Mat3& rot = world_from_cam.rotation();

  // Cull quads that cannot intersect forward rays within a generous range.
  std::vector<const TexturedQuad*> active;
  std::vector<QuadGeom> geom;
  for (const auto& q : scene.quads) {
    Vec3 center = q.origin + 0.5 * q.edge_u + 0.5 * q.edge_v;
    double radius = 0.5 * (q.edge_u.norm() + q.edge_v.norm());
    Vec3 rel = center - origin;
    if (rel.norm() - radius > 400.0) continue;
    if (rel.dot(rot.col(2)) < -radius - 5.0) continue;
    active.push_back(&q);
    QuadGeom g;
    g.normal = q.edge_u.cross(q.edge_v).normalized();
    g.inv_len_u2 = 1.0 / q.edge_u.squaredNorm();
    g.inv_len_v2 = 1.0 / q.edge_v.squaredNorm();
    g.len_u = q.edge_u.norm();
    g.len_v = q.edge_v.norm();
    geom.push_back(g);
  }

  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      Vec3 ray_cam = cam.ray(Vec2(x, y));
      Vec3 dir = rot * ray_cam;
      double best_t = 1e18;
      const TexturedQuad* best_quad = nullptr;
      double best_u = 0, best_v = 0;
      for (size_t i = 0; i < active.size(); ++i) {
        const TexturedQuad& q = *active[i];
        const QuadGeom& g = geom[i];
        double denom = dir.dot(g.normal);
        if (std::abs(denom) < 1e-12) continue;
        double t = (q.origin - origin).dot(g.normal) / denom;
        if (t <= 1e-6 || t >= best_t) continue;
        Vec3 hit = origin + t * dir - q.origin;
        double a = hit.dot(q.edge_u) * g.inv_len_u2;
        if (a < 0 || a > 1) continue;
        double b = hit.dot(q.edge_v) * g.inv_len_v2;
        if (b < 0 || b > 1) continue;
        best_t = t;
        best_quad = &q;
        best_u = a * g.len_u;
        best_v = b * g.len_v;
      }
      if (best_quad) {
        double value = best_quad->intensityAt(best_u, best_v);
        if (noise_sigma > 0 && noise_rng) value += noise_rng->gaussian(0, noise_sigma);
        out.image.at(x, y) = float(std::clamp(value, 0.0, 255.0));
        // Depth is the z coordinate in the camera frame, not the ray length.
        out.depth[size_t(y) * cam.width + x] = float(best_t * ray_cam.z());
      }
    }
  }
  return out;
}

std::vector<SE3> straightPath(const Vec3& start, const Vec3& direction, double length,
                              double step) {
  Vec3 dir = direction.normalized();
  Vec3 down(0, 1, 0);
  Vec3 x_axis = down.cross(dir);
  if (x_axis.norm() < 1e-6) x_axis = Vec3(1, 0, 0);
  x_axis.normalize();
  Vec3 y_axis = dir.cross(x_axis).normalized();
  Mat3 rot;
  rot.col(0) = x_axis;
  rot.col(1) = y_axis;
  rot.col(2) = dir;
  std::vector<SE3> poses;
  for (double s = 0; s <= length + 1e-9; s += step) {
    poses.emplace_back(rot, start + s * dir);
  }
  return poses;
}

namespace {

SE3 groundPose(const Vec2& pos, const Vec2& forward2) {
  Vec3 position(pos.x(), 0, pos.y());
  Vec3 forward(forward2.x(), 0, forward2.y());
  forward.normalize();
  Vec3 down(0, 1, 0);
  Vec3 right = down.cross(forward).normalized();
  Mat3 rot;
  rot.col(0) = right;
  rot.col(1) = down;
  rot.col(2) = forward;
  return SE3(rot, position);
}

}  // namespace

std::vector<Vec2> squareCircuitRoute(double side, double corner_radius) {
  // Sample the analytic path at 2 m spacing.
  auto poses = squareCircuitPath(side, corner_radius, 2.0, 0.0);
  std::vector<Vec2> route;
  route.reserve(poses.size() + 1);
  for (const auto& p : poses) route.emplace_back(p.translation().x(), p.translation().z());
  route.push_back(route.front());
  return route;
}

std::vector<SE3> squareCircuitPath(double side, double corner_radius, double step,
                                   double extra) {
  double r = corner_radius, s = side;
  double quarter = M_PI * r / 2.0;
  double lap = 4 * s + 4 * quarter;
  std::vector<SE3> poses;
  for (double arc = 0; arc <= lap + extra + 1e-9; arc += step) {
    double a = std::fmod(arc, lap);
    Vec2 pos, tangent;
    // The circuit turns right (clockwise in the x-z plane seen from above).
    auto corner = [&](Vec2 center, double ang0, double frac) {
      double ang = ang0 - frac * (M_PI / 2);
      pos = center + r * Vec2(std::cos(ang), std::sin(ang));
      tangent = Vec2(std::sin(ang), -std::cos(ang));
    };
    if (a < s) {
      pos = Vec2(0, a);
      tangent = Vec2(0, 1);
    } else if (a < s + quarter) {
      corner(Vec2(r, s), M_PI, (a - s) / quarter);
    } else if (a < 2 * s + quarter) {
      pos = Vec2(r + (a - s - quarter), s + r);
      tangent = Vec2(1, 0);
    } else if (a < 2 * s + 2 * quarter) {
      corner(Vec2(r + s, s), M_PI / 2, (a - 2 * s - quarter) / quarter);
    } else if (a < 3 * s + 2 * quarter) {
      pos = Vec2(2 * r + s, s - (a - 2 * s - 2 * quarter));
      tangent = Vec2(0, -1);
    } else if (a < 3 * s + 3 * quarter) {
      corner(Vec2(r + s, 0), 0, (a - 3 * s - 2 * quarter) / quarter);
    } else if (a < 4 * s + 3 * quarter) {
      pos = Vec2(r + s - (a - 3 * s - 3 * quarter), -r);
      tangent = Vec2(-1, 0);
    } else {
      corner(Vec2(r, 0), -M_PI / 2, (a - 4 * s - 3 * quarter) / quarter);
    }
    poses.push_back(groundPose(pos, tangent));
  }
  return poses;
}

Image withBias(const Image& img, double bias) {
  Image out = img;
  for (auto& v : out.data) v = float(std::clamp(double(v) + bias, 0.0, 255.0));
  return out;
}

Image withGainBias(const Image& img, double gain, double bias) {
  Image out = img;
  for (auto& v : out.data) v = float(std::clamp(double(v) * gain + bias, 0.0, 255.0));
  return out;
}

Image withLightingCorruption(const Image& img, Rng& rng, double strength) {
  Image out = img;
  double slope = strength * rng.uniform(0.3, 0.7) / std::max(1, img.width);
  double gamma = 1.0 + strength * rng.uniform(0.25, 0.5);
  double offset = strength * rng.uniform(-25, 25);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double v = img.at(x, y) / 255.0;
      v = std::pow(v, gamma) * 255.0;
      v *= 1.0 + slope * (x - img.width / 2);
      out.at(x, y) = float(std::clamp(v + offset, 0.0, 255.0));
    }
  }
  return out;
}

}  // namespace vslam
