#include "coseg/phantom.hpp"

#include "coseg/bvh.hpp"

#include <algorithm>
#include <cmath>

namespace coseg {

void PhantomSpec::validate() const {
  if (grid_dims.minCoeff() < 8)
    throw Error(ErrorKind::argument, "phantom grid too small");
  if (!(spacing_mm > 0.0))
    throw Error(ErrorKind::argument, "phantom spacing must be > 0");
  if (!(r0 - fold_amp > 0.0))
    throw Error(ErrorKind::argument,
                "phantom folds must keep the white radius positive");
  if (fold_amp < 0.0 || fold_freq < 0)
    throw Error(ErrorKind::argument, "invalid fold parameters");
  if (!(thickness > 0.0))
    throw Error(ErrorKind::argument, "phantom thickness must be > 0");
  if (pve_close_radius < 0)
    throw Error(ErrorKind::argument, "pve_close_radius must be >= 0");
  if (subdivisions < 2 || subdivisions > 8)
    throw Error(ErrorKind::argument, "subdivisions out of range");
  const double rmax = r0 + fold_amp + thickness;
  const double half_extent =
      0.5 * (grid_dims.minCoeff() - 1) * spacing_mm;
  if (rmax + 2.0 * spacing_mm > half_extent)
    throw Error(ErrorKind::argument, "phantom does not fit in the grid");
}

double phantom_white_radius(const PhantomSpec& spec, const Vec3& dir) {
  const Vec3 d = dir.normalized();
  const double theta = std::acos(std::clamp(d.z(), -1.0, 1.0));
  const double phi = std::atan2(d.y(), d.x());
  return spec.r0 + spec.fold_amp * std::sin(spec.fold_freq * theta) *
                       std::sin(spec.fold_freq * phi);
}

namespace {

TriMesh radial_graph_mesh(const PhantomSpec& spec) {
  TriMesh sphere = make_icosphere(1.0, spec.subdivisions);
  TriMesh out = sphere;
  for (Index v = 0; v < sphere.num_vertices(); ++v) {
    const Vec3 d = sphere.vertices.row(v);
    out.vertices.row(v) = (phantom_white_radius(spec, d) * d).transpose();
  }
  return out;
}

}  // namespace

PhantomData generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  PhantomData out;
  out.white_gt = radial_graph_mesh(spec);

  // Offset along the tessellated surface normals, then sample the radial
  // outer envelope of the offset surface along the original tessellation
  // directions. Keeping the pial a radial graph over the same tessellation
  // makes it embedded by construction: non-adjacent triangles occupy
  // disjoint radial cones.
  const MatX3 white_normals = vertex_normals(out.white_gt);
  TriMesh offset = out.white_gt;
  offset.vertices += spec.thickness * white_normals;
  const TriBvh offset_bvh(offset.vertices, offset.faces);

  out.pial_gt = out.white_gt;
  for (Index v = 0; v < out.pial_gt.num_vertices(); ++v) {
    const Vec3 dir = Vec3(out.white_gt.vertices.row(v)).normalized();
    double r = offset_bvh.farthest_hit(Vec3::Zero(), dir);
    if (r <= 0.0)  // grazing miss; fall back to the plain radial offset
      r = Vec3(out.white_gt.vertices.row(v)).norm() + spec.thickness;
    out.pial_gt.vertices.row(v) = (r * dir).transpose();
  }

  // Voxelize: volume centered on the phantom.
  const Vec3 spacing = Vec3::Constant(spec.spacing_mm);
  const Vec3 origin = -0.5 * spacing.cwiseProduct(
                                 (spec.grid_dims - Vec3i::Ones()).cast<double>());
  out.wm = LabelVolume(spec.grid_dims, spacing, origin, 0);
  out.cgm = LabelVolume(spec.grid_dims, spacing, origin, 0);

  const TriBvh pial_bvh(out.pial_gt.vertices, out.pial_gt.faces);
  const double rmax_band = spec.r0 + spec.fold_amp + spec.thickness + 1.0;
  for (int k = 0; k < spec.grid_dims.z(); ++k)
    for (int j = 0; j < spec.grid_dims.y(); ++j)
      for (int i = 0; i < spec.grid_dims.x(); ++i) {
        const Vec3 p = out.wm.world(i, j, k);
        const double r = p.norm();
        if (r >= rmax_band) continue;
        bool in_white;
        if (r < 1e-9) {
          in_white = true;
        } else {
          in_white = r < phantom_white_radius(spec, p / r);
        }
        if (in_white) {
          out.wm(i, j, k) = 1;
          continue;
        }
        // Inside pial iff below the radial envelope of the pial surface.
        const double pial_r = pial_bvh.farthest_hit(Vec3::Zero(), p / r);
        if (pial_r > 0.0 && r < pial_r) out.cgm(i, j, k) = 1;
      }

  out.cgm_pve = morph_close(out.cgm, spec.pve_close_radius);
  for (Index n = 0; n < out.cgm_pve.size(); ++n)
    if (out.wm.data()[static_cast<std::size_t>(n)])
      out.cgm_pve.data()[static_cast<std::size_t>(n)] = 0;
  return out;
}

}  // namespace coseg
