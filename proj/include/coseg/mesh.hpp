#pragma once

#include "coseg/types.hpp"
#include "coseg/volume.hpp"

#include <utility>

namespace coseg {

/// Indexed triangle mesh in world mm. Faces are counter-clockwise seen from
/// outside for positively oriented watertight meshes; edges are derived.
struct TriMesh {
  MatX3 vertices;
  MatX3i faces;

  Index num_vertices() const { return vertices.rows(); }
  Index num_faces() const { return faces.rows(); }
  bool empty() const { return vertices.rows() == 0; }
};

/// Unique undirected edges, each row sorted (a < b), rows in lexicographic
/// order. Throws on out-of-range indices or degenerate faces.
MatX2i unique_edges(const TriMesh& mesh);

/// True iff every edge is shared by exactly two faces with opposite
/// orientation (each directed edge appears exactly once).
bool is_watertight(const TriMesh& mesh);

/// V - E + F.
Index euler_characteristic(const TriMesh& mesh);

double surface_area(const TriMesh& mesh);

/// Signed enclosed volume by the divergence theorem; positive for outward
/// oriented watertight meshes.
double enclosed_volume(const TriMesh& mesh);

/// Unit sphere tessellation by icosahedron subdivision. `subdivisions` loop
/// steps quadruple the face count each time (20 * 4^s faces).
TriMesh make_icosphere(double radius, int subdivisions,
                       const Vec3& center = Vec3::Zero());

/// Extracts the `level` iso-surface of a volume as a watertight, oriented
/// triangle mesh (outward normals point toward values above the level).
/// Face-ambiguous cells are resolved from the face-center average so that
/// adjacent cells always agree. The level set must not touch the volume
/// boundary for the output to close. Throws "empty level set" when the level
/// is outside the value range.
TriMesh marching_cubes(const RealVolume& sdf, double level);

/// Uniform-weight umbrella smoothing, synchronous updates. 0 < lambda <= 1.
TriMesh laplacian_smooth(const TriMesh& mesh, int iterations, double lambda);

/// Taubin lambda/mu smoothing (shrink-resistant). Requires lambda > 0,
/// mu < 0, |mu| > lambda.
TriMesh taubin_smooth(const TriMesh& mesh, int iterations, double lambda = 0.5,
                      double mu = -0.53);

/// Incremental isotropic remeshing: split long edges (> 4/3 target),
/// collapse short ones (< 4/5 target), flip for valence, relax tangentially.
/// Preserves watertightness and Euler characteristic; collapses that would
/// create a non-manifold configuration are skipped.
TriMesh isotropic_remesh(const TriMesh& mesh, double target_edge_mm,
                         int iterations);

/// Area-weighted vertex normals, unit length. Throws if a vertex has no
/// incident face.
MatX3 vertex_normals(const TriMesh& mesh);

/// Exact nearest vertex (index, squared distance); ties break to the
/// smallest index. Identical to a linear scan.
std::pair<int, double> nearest_vertex(const Vec3& query, const TriMesh& mesh);

/// Number of faces involved in at least one intersection with a
/// non-adjacent face (faces sharing a vertex are not tested against each
/// other).
int count_self_intersections(const TriMesh& mesh);

/// Triangle-triangle intersection predicate (shared edges/vertices are the
/// caller's business to exclude). Handles coplanar pairs.
bool tri_tri_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2,
                       const Vec3& b0, const Vec3& b1, const Vec3& b2);

}  // namespace coseg
