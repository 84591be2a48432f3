#pragma once

#include "coseg/types.hpp"

#include <cstdint>
#include <vector>

namespace coseg {

/// Regular 3D grid with anisotropic spacing. `origin` is the world-mm
/// position of the center of voxel (0,0,0); data is stored x-fastest.
template <class T>
class Volume3 {
 public:
  Volume3() = default;

  Volume3(const Vec3i& dims, const Vec3& spacing, const Vec3& origin,
          T fill = T{})
      : dims_(dims), spacing_(spacing), origin_(origin) {
    if (dims_.minCoeff() <= 0)
      throw Error(ErrorKind::argument, "volume dims must be positive");
    if (!(spacing_.minCoeff() > 0.0))
      throw Error(ErrorKind::argument, "volume spacing must be positive");
    data_.assign(static_cast<std::size_t>(dims_.x()) * dims_.y() * dims_.z(),
                 fill);
  }

  int nx() const { return dims_.x(); }
  int ny() const { return dims_.y(); }
  int nz() const { return dims_.z(); }
  const Vec3i& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  Index size() const { return static_cast<Index>(data_.size()); }

  Index linear(int i, int j, int k) const {
    return static_cast<Index>(i) +
           static_cast<Index>(nx()) *
               (static_cast<Index>(j) + static_cast<Index>(ny()) * k);
  }

  T& operator()(int i, int j, int k) { return data_[linear(i, j, k)]; }
  const T& operator()(int i, int j, int k) const {
    return data_[linear(i, j, k)];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < nx() && j < ny() && k < nz();
  }

  /// World position of (possibly fractional) voxel coordinates.
  Vec3 world(double i, double j, double k) const {
    return origin_ + spacing_.cwiseProduct(Vec3(i, j, k));
  }

  /// Continuous voxel coordinates of a world point.
  Vec3 voxel(const Vec3& p) const {
    return (p - origin_).cwiseQuotient(spacing_);
  }

 private:
  Vec3i dims_{0, 0, 0};
  Vec3 spacing_{1, 1, 1};
  Vec3 origin_{0, 0, 0};
  std::vector<T> data_;
};

using LabelVolume = Volume3<std::uint8_t>;
using RealVolume = Volume3<double>;

/// Signed Euclidean distance (mm) to the label boundary, evaluated at voxel
/// centers; negative inside the foreground, positive outside. The boundary
/// is the set of face midpoints between adjacent foreground/background
/// voxels, so a foreground voxel next to background reads -0.5*spacing.
/// Exact: equals a brute-force scan over all boundary face midpoints.
/// Throws for all-foreground / all-background input.
RealVolume distance_transform(const LabelVolume& label);

/// Separable Gaussian filter, kernel truncated at 4*sigma per axis and
/// renormalized where it overlaps the volume border. sigma_mm == 0 is the
/// identity; negative sigma throws.
RealVolume gaussian_smooth(const RealVolume& vol, double sigma_mm);

struct TrilinearSample {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();  // d(value)/d(world mm)
};

/// Trilinear interpolation with the exact analytic gradient of the
/// interpolant. Points outside the grid clamp to the boundary, with zero
/// gradient along the clamped axes.
TrilinearSample sample_trilinear(const RealVolume& vol, const Vec3& p);

/// Morphological closing (dilate then erode) with a cubic structuring
/// element of half-width radius_vox. Neighborhoods are truncated at the
/// volume border, which keeps closing extensive there.
LabelVolume morph_close(const LabelVolume& label, int radius_vox);

/// Elementwise union of two binary labels of identical geometry.
LabelVolume label_union(const LabelVolume& a, const LabelVolume& b);

}  // namespace coseg
