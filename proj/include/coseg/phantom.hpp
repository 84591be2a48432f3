#pragma once

#include "coseg/mesh.hpp"
#include "coseg/types.hpp"
#include "coseg/volume.hpp"

#include <cstdint>

namespace coseg {

/// Folded-sphere cortical phantom. The white surface is the radial graph
///   r(theta, phi) = r0 + fold_amp * sin(fold_freq*theta) * sin(fold_freq*phi)
/// centered on the volume; the pial surface is its outward offset by
/// `thickness` with narrow-sulcus overlaps resolved by the radial outer
/// envelope. cgm_pve simulates partial-volume dropout of thin sulcal CSF by
/// morphologically closing the ribbon.
struct PhantomSpec {
  Vec3i grid_dims{128, 128, 128};
  double spacing_mm = 1.0;
  double r0 = 40.0;
  double fold_amp = 8.0;
  int fold_freq = 6;
  double thickness = 3.0;
  int pve_close_radius = 1;
  int subdivisions = 6;  // icosphere tessellation of the GT meshes
  std::uint64_t seed = 0;

  void validate() const;
};

struct PhantomData {
  TriMesh white_gt;
  TriMesh pial_gt;
  LabelVolume wm;       // inside white
  LabelVolume cgm;      // between white and pial
  LabelVolume cgm_pve;  // morph_close(cgm) minus wm
};

PhantomData generate_phantom(const PhantomSpec& spec);

/// Analytic white radius along a unit direction (exposed for tests).
double phantom_white_radius(const PhantomSpec& spec, const Vec3& dir);

}  // namespace coseg
