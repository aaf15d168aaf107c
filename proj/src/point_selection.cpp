#include "vslam/point_selection.hpp"

#include <algorithm>
#include <cmath>

namespace vslam {

namespace {

// Median of the block's gradient magnitudes (nth_element on a scratch copy).
float blockMedian(const Image& grad, int x0, int y0, int x1, int y1,
                  std::vector<float>& scratch) {
  scratch.clear();
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) scratch.push_back(grad.at(x, y));
  if (scratch.empty()) return 0.f;
  size_t mid = scratch.size() / 2;
  std::nth_element(scratch.begin(), scratch.begin() + mid, scratch.end());
  return scratch[mid];
}

struct BlockPick {
  int x = -1, y = -1;
  float g = 0.f;
};

BlockPick blockBest(const Image& grad, int x0, int y0, int x1, int y1) {
  BlockPick best;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      float g = grad.at(x, y);
      if (g > best.g) best = {x, y, g};
    }
  }
  return best;
}

}  // namespace

std::vector<InverseDepthPoint> selectPoints(const ImagePyramid& pyramid,
                                            const CameraModel& cam, int target_count,
                                            Rng& rng,
                                            const PointSelectionConfig& config) {
  const Image& grad = pyramid.gradientMagnitude(0);
  const int w = grad.width, h = grad.height;
  const int border = int(CameraModel::kBorder) + 1;
  const int usable_w = w - 2 * border, usable_h = h - 2 * border;
  const int nbx = std::clamp(usable_w / 6, 1, config.grid);
  const int nby = std::clamp(usable_h / 6, 1, config.grid);
  auto x_of = [&](int bx) { return border + bx * usable_w / nbx; };
  auto y_of = [&](int by) { return border + by * usable_h / nby; };

  std::vector<float> scratch;
  std::vector<Vec2> picked;
  std::vector<uint8_t> block_won(size_t(nbx) * nby, 0);

  for (int by = 0; by < nby; ++by) {
    for (int bx = 0; bx < nbx; ++bx) {
      int x0 = x_of(bx), x1 = x_of(bx + 1);
      int y0 = y_of(by), y1 = y_of(by + 1);
      float median = blockMedian(grad, x0, y0, x1, y1, scratch);
      float threshold = std::max(median + float(config.gradient_margin),
                                 float(config.min_gradient));
      BlockPick best = blockBest(grad, x0, y0, x1, y1);
      if (best.x >= 0 && best.g > threshold) {
        picked.emplace_back(best.x, best.y);
        block_won[size_t(by) * nbx + bx] = 1;
      }
    }
  }

  // Second sweep at doubled granularity over regions that produced nothing,
  // with the threshold relaxed to the absolute floor.
  if (int(picked.size()) < target_count) {
    for (int by = 0; by < nby; by += 2) {
      for (int bx = 0; bx < nbx; bx += 2) {
        bool any = false;
        for (int dy = 0; dy < 2 && by + dy < nby; ++dy)
          for (int dx = 0; dx < 2 && bx + dx < nbx; ++dx)
            any |= block_won[size_t(by + dy) * nbx + bx + dx] != 0;
        if (any) continue;
        int x0 = x_of(bx), x1 = x_of(std::min(bx + 2, nbx));
        int y0 = y_of(by), y1 = y_of(std::min(by + 2, nby));
        BlockPick best = blockBest(grad, x0, y0, x1, y1);
        if (best.x >= 0 && best.g > config.min_gradient) {
          picked.emplace_back(best.x, best.y);
        }
      }
    }
  }

  // Overshoot: seeded random subsample down to the quota.
  if (int(picked.size()) > target_count) {
    for (int i = int(picked.size()) - 1; i > 0; --i) {
      int j = rng.uniformInt(0, i);
      std::swap(picked[i], picked[j]);
    }
    picked.resize(target_count);
  }

  std::vector<InverseDepthPoint> out;
  out.reserve(picked.size());
  for (const Vec2& p : picked) {
    InverseDepthPoint point;
    if (finalizePoint(pyramid, p, -1, point)) out.push_back(point);
  }
  (void)cam;
  return out;
}

bool finalizePoint(const ImagePyramid& pyramid, const Vec2& pixel, int host_id,
                   InverseDepthPoint& out) {
  const Image& level0 = pyramid.level(0);
  double grad2_sum = 0;
  for (int k = 0; k < kPatternSize; ++k) {
    Vec2 p = pixel + Vec2(kPattern[k][0], kPattern[k][1]);
    if (!(p.x() >= 1 && p.y() >= 1 && p.x() < level0.width - 2 &&
          p.y() < level0.height - 2))
      return false;
    auto s = pyramid.sample(0, p);
    if (!s) return false;
    out.host_intensity[k] = float(s->intensity);
    grad2_sum += s->gradient.squaredNorm();
  }
  out.pixel = pixel;
  out.host_id = host_id;
  out.status = PointStatus::Candidate;
  out.inv_depth = 1.0;
  out.inv_depth_var = 1.0;
  double c2 = kWeightConst * kWeightConst;
  out.weight = c2 / (c2 + grad2_sum / kPatternSize);
  return true;
}

}  // namespace vslam
