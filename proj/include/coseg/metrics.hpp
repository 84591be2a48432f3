#pragma once

#include "coseg/mesh.hpp"
#include "coseg/types.hpp"

#include <cstdint>

namespace coseg {

struct MetricBlock {
  double assd_mm = -1.0;
  double hd90_mm = -1.0;
  double thickness_mean_mm = -1.0;
  double thickness_err_mm = -1.0;
  double sulc_mean_mm = 0.0;
  double sulc_err_mm = -1.0;
  int selfx_faces = -1;
  double selfx_rate = -1.0;
};

/// Area-uniform surface samples (seeded, deterministic).
MatX3 sample_surface_points(const TriMesh& mesh, Index n_samples,
                            std::uint64_t seed);

/// Average symmetric surface distance: half the sum of the two directed
/// mean point-to-surface distances, point-to-triangle exact, n_samples
/// area-uniform samples per direction.
double assd(const TriMesh& a, const TriMesh& b, Index n_samples,
            std::uint64_t seed = 0);

/// 90th percentile (nearest-rank) of the pooled bidirectional
/// point-to-surface distance samples.
double hd90(const TriMesh& a, const TriMesh& b, Index n_samples,
            std::uint64_t seed = 0);

/// Per-vertex |pial - white| for same-connectivity surfaces.
VecX cortical_thickness(const TriMesh& white, const TriMesh& pial);

/// Signed depth against a heavily smoothed copy of the surface: positive
/// where the vertex lies inside the smoothed envelope (sulci), negative on
/// gyral crowns. A proxy definition; smooth_iters/lambda control the
/// reference envelope.
VecX sulcal_depth(const TriMesh& mid, int smooth_iters = 200,
                  double lambda = 0.5);

/// Vertex-wise average of two same-connectivity surfaces.
TriMesh midthickness_surface(const TriMesh& white, const TriMesh& pial);

/// Mean absolute difference between two per-vertex maps.
double mean_l1_error(const VecX& a, const VecX& b);

}  // namespace coseg
