#include "vslam/pyramid.hpp"

#include <cmath>

namespace vslam {

ImagePyramid::ImagePyramid(Image level0, int levels) {
  levels_.reserve(levels);
  levels_.push_back(std::move(level0));
  for (int l = 1; l < levels; ++l) {
    const Image& src = levels_[l - 1];
    int w = src.width / 2;
    int h = src.height / 2;
    if (w < 8 || h < 8) break;
    Image dst(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        dst.at(x, y) = 0.25f * (src.at(2 * x, 2 * y) + src.at(2 * x + 1, 2 * y) +
                                src.at(2 * x, 2 * y + 1) + src.at(2 * x + 1, 2 * y + 1));
      }
    }
    levels_.push_back(std::move(dst));
  }
  grad_mag_.resize(levels_.size());
  grad_built_.assign(levels_.size(), 0);
}

const Image& ImagePyramid::gradientMagnitude(int l) const {
  if (!grad_built_[l]) {
    const Image& img = levels_[l];
    Image g(img.width, img.height, 0.f);
    for (int y = 1; y < img.height - 1; ++y) {
      for (int x = 1; x < img.width - 1; ++x) {
        float gx = 0.5f * (img.at(x + 1, y) - img.at(x - 1, y));
        float gy = 0.5f * (img.at(x, y + 1) - img.at(x, y - 1));
        g.at(x, y) = std::sqrt(gx * gx + gy * gy);
      }
    }
    grad_mag_[l] = std::move(g);
    grad_built_[l] = 1;
  }
  return grad_mag_[l];
}

}  // namespace vslam
