#pragma once

#include "locomimic/types.hpp"

namespace locomimic {

/// Regular grid of terrain heights with bilinear lookup. Cell (i, j) sits at
/// origin + (i, j) * resolution.
class HeightField {
 public:
  HeightField() = default;
  HeightField(Vec2 origin, double resolution, MatX heights);

  static HeightField flat(Vec2 origin, Vec2 extent, double resolution, double height = 0.0);

  double height(double x, double y) const;
  double height(const Vec2& xy) const { return height(xy.x(), xy.y()); }
  bool contains(double x, double y) const;

  const Vec2& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  const MatX& heights() const { return heights_; }
  Vec2 extent() const;

 private:
  Vec2 origin_ = Vec2::Zero();
  double resolution_ = 1.0;
  MatX heights_;
};

}  // namespace locomimic
