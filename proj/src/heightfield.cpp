#include "locomimic/heightfield.hpp"

#include <algorithm>
#include <cmath>

namespace locomimic {

HeightField::HeightField(Vec2 origin, double resolution, MatX heights)
    : origin_(std::move(origin)), resolution_(resolution), heights_(std::move(heights)) {
  if (!(resolution_ > 0.0)) throw InvalidParameter("height field resolution must be > 0");
  if (heights_.rows() < 2 || heights_.cols() < 2) throw InvalidParameter("height field needs at least 2x2 samples");
  if (!heights_.allFinite()) throw InvalidParameter("height field contains non-finite heights");
}

HeightField HeightField::flat(Vec2 origin, Vec2 extent, double resolution, double height) {
  const int nx = std::max(2, static_cast<int>(std::ceil(extent.x() / resolution)) + 1);
  const int ny = std::max(2, static_cast<int>(std::ceil(extent.y() / resolution)) + 1);
  return HeightField(origin, resolution, MatX::Constant(nx, ny, height));
}

Vec2 HeightField::extent() const {
  return {(heights_.rows() - 1) * resolution_, (heights_.cols() - 1) * resolution_};
}

bool HeightField::contains(double x, double y) const {
  const Vec2 e = extent();
  const double eps = 1e-12 * (1.0 + e.norm());
  return x >= origin_.x() - eps && y >= origin_.y() - eps && x <= origin_.x() + e.x() + eps &&
         y <= origin_.y() + e.y() + eps;
}

double HeightField::height(double x, double y) const {
  if (heights_.size() == 0) throw OutOfBounds("empty height field");
  if (!contains(x, y)) throw OutOfBounds("height query outside the terrain grid");
  const double gx = std::clamp((x - origin_.x()) / resolution_, 0.0, static_cast<double>(heights_.rows() - 1));
  const double gy = std::clamp((y - origin_.y()) / resolution_, 0.0, static_cast<double>(heights_.cols() - 1));
  const int i = std::min(static_cast<int>(gx), static_cast<int>(heights_.rows()) - 2);
  const int j = std::min(static_cast<int>(gy), static_cast<int>(heights_.cols()) - 2);
  const double fx = gx - i, fy = gy - j;
  const double h00 = heights_(i, j), h10 = heights_(i + 1, j), h01 = heights_(i, j + 1), h11 = heights_(i + 1, j + 1);
  // Exact on constant patches.
  if (h00 == h10 && h00 == h01 && h00 == h11) return h00;
  return (1 - fx) * (1 - fy) * h00 + fx * (1 - fy) * h10 + (1 - fx) * fy * h01 + fx * fy * h11;
}

}  // namespace locomimic
