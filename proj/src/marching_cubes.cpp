#include "coseg/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>
#include <vector>

namespace coseg {

// Iso-surface extraction that walks the iso-contour of every cell face and
// stitches the directed face segments into closed polygons per cell. Each
// face's segmentation depends only on that face's data, so the two cells
// sharing it always agree and the global mesh closes. This sidesteps the
// cracked-surface cases of the classic 256-entry table; face-ambiguous
// configurations are decided by the face-center average value.

namespace {

struct CellExtractor {
  const RealVolume& vol;
  double level;
  std::unordered_map<std::uint64_t, int>& edge_vertex;
  std::vector<Vec3>& verts;
  std::vector<std::array<int, 3>>& tris;

  int i = 0, j = 0, k = 0;
  double val[8];
  bool inside[8];

  // corner bit layout: bit0 = +x, bit1 = +y, bit2 = +z
  Vec3i corner_coord(int c) const {
    return {i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)};
  }

  std::uint64_t lattice_id(const Vec3i& p) const {
    return (static_cast<std::uint64_t>(p.z()) * vol.ny() + p.y()) * vol.nx() +
           p.x();
  }

  // Interned vertex on the cube edge between corners u, v (one bit apart).
  int edge_point(int u, int v) {
    const int axis_bit = (u ^ v);
    const int axis = axis_bit == 1 ? 0 : (axis_bit == 2 ? 1 : 2);
    const int lower = (u & axis_bit) ? v : u;
    const Vec3i lc = corner_coord(lower);
    const std::uint64_t key = lattice_id(lc) * 3 + axis;
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;

    Vec3i uc = lc;
    uc[axis] += 1;
    const double a = vol(lc.x(), lc.y(), lc.z());
    const double b = vol(uc.x(), uc.y(), uc.z());
    double t = (level - a) / (b - a);
    t = std::clamp(t, 0.0, 1.0);
    const Vec3 pa = vol.world(lc.x(), lc.y(), lc.z());
    const Vec3 pb = vol.world(uc.x(), uc.y(), uc.z());
    verts.push_back(pa + t * (pb - pa));
    const int idx = static_cast<int>(verts.size()) - 1;
    edge_vertex.emplace(key, idx);
    return idx;
  }

  // Face-center inside test, summing corner values in lattice order so both
  // incident cells compute the identical double.
  bool center_inside(const std::array<int, 4>& fc) const {
    std::array<std::pair<std::uint64_t, double>, 4> entries;
    for (int e = 0; e < 4; ++e) {
      const Vec3i p = corner_coord(fc[static_cast<std::size_t>(e)]);
      entries[static_cast<std::size_t>(e)] = {lattice_id(p),
                                              vol(p.x(), p.y(), p.z())};
    }
    std::sort(entries.begin(), entries.end());
    double sum = 0.0;
    for (const auto& [id, v] : entries) sum += v;
    return sum < 4.0 * level;
  }

  void process() {
    int mask = 0;
    for (int c = 0; c < 8; ++c) {
      const Vec3i p = corner_coord(c);
      val[c] = vol(p.x(), p.y(), p.z());
      inside[c] = val[c] < level;
      mask |= inside[c] << c;
    }
    if (mask == 0 || mask == 255) return;

    // Directed surface-boundary segments on the six faces, inside-region on
    // the left as seen from outside the cube.
    int seg_from[12], seg_to[12];
    int nseg = 0;
    for (int n = 0; n < 3; ++n) {
      const int a = (n + 1) % 3, b = (n + 2) % 3;
      for (int s = 0; s < 2; ++s) {
        static constexpr int kOrderHi[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        static constexpr int kOrderLo[4][2] = {{0, 0}, {0, 1}, {1, 1}, {1, 0}};
        std::array<int, 4> fc;
        for (int e = 0; e < 4; ++e) {
          const int ta = s ? kOrderHi[e][0] : kOrderLo[e][0];
          const int tb = s ? kOrderHi[e][1] : kOrderLo[e][1];
          fc[static_cast<std::size_t>(e)] = (s << n) | (ta << a) | (tb << b);
        }
        bool crossing[4];
        int ncross = 0;
        for (int e = 0; e < 4; ++e) {
          crossing[e] = inside[fc[static_cast<std::size_t>(e)]] !=
                        inside[fc[static_cast<std::size_t>((e + 1) % 4)]];
          ncross += crossing[e];
        }
        if (ncross == 0) continue;
        if (ncross == 2) {
          int start = -1, end = -1;
          for (int e = 0; e < 4; ++e) {
            if (!crossing[e]) continue;
            if (inside[fc[static_cast<std::size_t>(e)]])
              start = e;
            else
              end = e;
          }
          seg_from[nseg] = face_edge_point(fc, start);
          seg_to[nseg] = face_edge_point(fc, end);
          ++nseg;
        } else {  // 4 crossings: diagonal pattern
          const bool connect_inside = center_inside(fc);
          for (int e = 0; e < 4; ++e) {
            if (!inside[fc[static_cast<std::size_t>(e)]]) continue;
            const int end = connect_inside ? (e + 1) % 4 : (e + 3) % 4;
            seg_from[nseg] = face_edge_point(fc, e);
            seg_to[nseg] = face_edge_point(fc, end);
            ++nseg;
          }
        }
      }
    }

    // Link segments into closed loops and fan-triangulate. The fan order is
    // reversed so normals point toward values above the level.
    bool used[12] = {};
    for (int s0 = 0; s0 < nseg; ++s0) {
      if (used[s0]) continue;
      int loop[12];
      int len = 0;
      int cur = s0;
      while (true) {
        used[cur] = true;
        loop[len++] = seg_from[cur];
        const int target = seg_to[cur];
        if (target == seg_from[s0]) break;
        int next = -1;
        for (int t = 0; t < nseg; ++t)
          if (!used[t] && seg_from[t] == target) {
            next = t;
            break;
          }
        if (next < 0)
          throw Error(ErrorKind::numerical, "marching cubes: open contour");
        cur = next;
      }
      for (int t = 1; t + 1 < len; ++t)
        tris.push_back({loop[0], loop[t + 1], loop[t]});
    }
  }

  int face_edge_point(const std::array<int, 4>& fc, int e) {
    return edge_point(fc[static_cast<std::size_t>(e)],
                      fc[static_cast<std::size_t>((e + 1) % 4)]);
  }
};

}  // namespace

TriMesh marching_cubes(const RealVolume& sdf, double level) {
  if (sdf.nx() < 2 || sdf.ny() < 2 || sdf.nz() < 2)
    throw Error(ErrorKind::argument, "marching_cubes: volume too small");
  double lo = sdf.data()[0], hi = sdf.data()[0];
  for (const double v : sdf.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(lo < level && hi >= level))
    throw Error(ErrorKind::degenerate_input, "empty level set");

  std::unordered_map<std::uint64_t, int> edge_vertex;
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  CellExtractor cell{sdf, level, edge_vertex, verts, tris};

  for (int k = 0; k + 1 < sdf.nz(); ++k)
    for (int j = 0; j + 1 < sdf.ny(); ++j)
      for (int i = 0; i + 1 < sdf.nx(); ++i) {
        cell.i = i;
        cell.j = j;
        cell.k = k;
        cell.process();
      }

  TriMesh mesh;
  mesh.vertices.resize(static_cast<Index>(verts.size()), 3);
  for (Index v = 0; v < mesh.vertices.rows(); ++v)
    mesh.vertices.row(v) = verts[static_cast<std::size_t>(v)].transpose();
  mesh.faces.resize(static_cast<Index>(tris.size()), 3);
  for (Index f = 0; f < mesh.faces.rows(); ++f)
    for (int e = 0; e < 3; ++e)
      mesh.faces(f, e) =
          tris[static_cast<std::size_t>(f)][static_cast<std::size_t>(e)];
  return mesh;
}

}  // namespace coseg
