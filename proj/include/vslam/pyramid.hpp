#pragma once

#include <cassert>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "vslam/geometry.hpp"

namespace vslam {

/// Single-channel intensity grid, values in [0, 255].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.f) : width(w), height(h), data(size_t(w) * h, fill) {}

  float& at(int x, int y) { return data[size_t(y) * width + x]; }
  float at(int x, int y) const { return data[size_t(y) * width + x]; }
};

struct SampleResult {
  double intensity;
  Vec2 gradient;  // analytic derivative of the bilinear interpolant
};

/// Grayscale pyramid with per-level central-difference gradient magnitudes.
/// Level L+1 dimensions are floor(level L / 2); downsampling is a 2x2 mean.
class ImagePyramid {
 public:
  static constexpr int kLevels = 5;

  explicit ImagePyramid(Image level0, int levels = kLevels);

  int levels() const { return int(levels_.size()); }
  const Image& level(int l) const { return levels_[l]; }
  /// Central-difference |grad| at interior pixels (0 on the 1-px frame).
  const Image& gradientMagnitude(int l) const;

  bool inBounds(int l, const Vec2& p, double border = 1.0) const {
    const Image& img = levels_[l];
    return p.x() >= border && p.x() <= img.width - 1 - border && p.y() >= border &&
           p.y() <= img.height - 1 - border;
  }

  /// Bilinear intensity + gradient; nullopt when the 2x2 support is not
  /// fully inside the level.
  std::optional<SampleResult> sample(int l, const Vec2& p) const {
    const Image& img = levels_[l];
    if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() < img.width - 1 && p.y() < img.height - 1))
      return std::nullopt;
    return sampleUnchecked(img, p);
  }

  static SampleResult sampleUnchecked(const Image& img, const Vec2& p) {
    int x0 = int(p.x());
    int y0 = int(p.y());
    double fx = p.x() - x0;
    double fy = p.y() - y0;
    double i00 = img.at(x0, y0);
    double i10 = img.at(x0 + 1, y0);
    double i01 = img.at(x0, y0 + 1);
    double i11 = img.at(x0 + 1, y0 + 1);
    SampleResult r;
    r.intensity = (1 - fy) * ((1 - fx) * i00 + fx * i10) + fy * ((1 - fx) * i01 + fx * i11);
    r.gradient.x() = (1 - fy) * (i10 - i00) + fy * (i11 - i01);
    r.gradient.y() = (1 - fx) * (i01 - i00) + fx * (i11 - i10);
    return r;
  }

 private:
  std::vector<Image> levels_;
  mutable std::vector<Image> grad_mag_;        // built lazily
  mutable std::vector<uint8_t> grad_built_;
};

using PyramidPtr = std::shared_ptr<const ImagePyramid>;

}  // namespace vslam
