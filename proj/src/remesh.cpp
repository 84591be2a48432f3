#include "coseg/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace coseg {

namespace {

// Mutable indexed mesh with vertex->face incidence; faces are tombstoned
// rather than erased so ids stay stable during a pass.
struct EditableMesh {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::vector<int>> vfaces;
  std::vector<char> vdead;

  explicit EditableMesh(const TriMesh& mesh) {
    verts.resize(static_cast<std::size_t>(mesh.num_vertices()));
    for (Index v = 0; v < mesh.num_vertices(); ++v)
      verts[static_cast<std::size_t>(v)] = mesh.vertices.row(v);
    vdead.assign(verts.size(), 0);
    vfaces.resize(verts.size());
    faces.reserve(static_cast<std::size_t>(mesh.num_faces()) * 2);
    for (Index f = 0; f < mesh.num_faces(); ++f)
      add_face(mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2));
  }

  bool face_alive(int f) const {
    return faces[static_cast<std::size_t>(f)][0] >= 0;
  }

  int add_vertex(const Vec3& p) {
    verts.push_back(p);
    vdead.push_back(0);
    vfaces.emplace_back();
    return static_cast<int>(verts.size()) - 1;
  }

  int add_face(int a, int b, int c) {
    faces.push_back({a, b, c});
    const int f = static_cast<int>(faces.size()) - 1;
    vfaces[static_cast<std::size_t>(a)].push_back(f);
    vfaces[static_cast<std::size_t>(b)].push_back(f);
    vfaces[static_cast<std::size_t>(c)].push_back(f);
    return f;
  }

  void remove_face(int f) {
    for (const int v : faces[static_cast<std::size_t>(f)]) {
      auto& list = vfaces[static_cast<std::size_t>(v)];
      list.erase(std::find(list.begin(), list.end(), f));
    }
    faces[static_cast<std::size_t>(f)] = {-1, -1, -1};
  }

  int edge_faces(int a, int b, int out[2]) const {
    int n = 0;
    for (const int f : vfaces[static_cast<std::size_t>(a)]) {
      const auto& tri = faces[static_cast<std::size_t>(f)];
      if (tri[0] == b || tri[1] == b || tri[2] == b) {
        if (n < 2) out[n] = f;
        ++n;
      }
    }
    return n;
  }

  // Face containing the directed edge a->b, or -1.
  int directed_face(int a, int b) const {
    for (const int f : vfaces[static_cast<std::size_t>(a)]) {
      const auto& tri = faces[static_cast<std::size_t>(f)];
      for (int e = 0; e < 3; ++e)
        if (tri[static_cast<std::size_t>(e)] == a &&
            tri[static_cast<std::size_t>((e + 1) % 3)] == b)
          return f;
    }
    return -1;
  }

  int opposite_vertex(int f, int a, int b) const {
    for (const int v : faces[static_cast<std::size_t>(f)])
      if (v != a && v != b) return v;
    return -1;
  }

  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (const int f : vfaces[static_cast<std::size_t>(v)])
      for (const int w : faces[static_cast<std::size_t>(f)])
        if (w != v && std::find(out.begin(), out.end(), w) == out.end())
          out.push_back(w);
    return out;
  }

  int valence(int v) const {
    return static_cast<int>(vfaces[static_cast<std::size_t>(v)].size());
  }

  Vec3 face_normal(int f) const {
    const auto& tri = faces[static_cast<std::size_t>(f)];
    const Vec3& a = verts[static_cast<std::size_t>(tri[0])];
    const Vec3& b = verts[static_cast<std::size_t>(tri[1])];
    const Vec3& c = verts[static_cast<std::size_t>(tri[2])];
    return (b - a).cross(c - a);
  }

  std::vector<std::pair<int, int>> edge_snapshot() const {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(faces.size() * 3 / 2);
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (faces[f][0] < 0) continue;
      for (int e = 0; e < 3; ++e) {
        const int a = faces[f][static_cast<std::size_t>(e)];
        const int b = faces[f][static_cast<std::size_t>((e + 1) % 3)];
        if (a < b) edges.emplace_back(a, b);
      }
    }
    std::sort(edges.begin(), edges.end());
    return edges;
  }

  double length(int a, int b) const {
    return (verts[static_cast<std::size_t>(a)] -
            verts[static_cast<std::size_t>(b)])
        .norm();
  }
};

void split_pass(EditableMesh& m, double max_len) {
  const auto edges = m.edge_snapshot();
  for (const auto& [a, b] : edges) {
    int fs[2];
    if (m.edge_faces(a, b, fs) != 2) continue;
    if (m.length(a, b) <= max_len) continue;
    const Vec3 mid = 0.5 * (m.verts[static_cast<std::size_t>(a)] +
                            m.verts[static_cast<std::size_t>(b)]);
    const int v = m.add_vertex(mid);
    for (const int f : {fs[0], fs[1]}) {
      const auto tri = m.faces[static_cast<std::size_t>(f)];
      int p = -1, q = -1, r = -1;
      for (int e = 0; e < 3; ++e) {
        const int x = tri[static_cast<std::size_t>(e)];
        const int y = tri[static_cast<std::size_t>((e + 1) % 3)];
        if ((x == a && y == b) || (x == b && y == a)) {
          p = x;
          q = y;
          r = tri[static_cast<std::size_t>((e + 2) % 3)];
          break;
        }
      }
      m.remove_face(f);
      m.add_face(p, v, r);
      m.add_face(v, q, r);
    }
  }
}

void collapse_pass(EditableMesh& m, double min_len, double max_len) {
  const auto edges = m.edge_snapshot();
  for (const auto& [a, b] : edges) {
    if (m.vdead[static_cast<std::size_t>(a)] ||
        m.vdead[static_cast<std::size_t>(b)])
      continue;
    int fs[2];
    if (m.edge_faces(a, b, fs) != 2) continue;
    if (m.length(a, b) >= min_len) continue;

    const int c0 = m.opposite_vertex(fs[0], a, b);
    const int c1 = m.opposite_vertex(fs[1], a, b);

    // Link condition: shared neighborhood must be exactly the two wings.
    const auto na = m.neighbors(a);
    const auto nb = m.neighbors(b);
    int shared = 0;
    bool bad = false;
    for (const int v : na)
      if (std::find(nb.begin(), nb.end(), v) != nb.end()) {
        ++shared;
        if (v != c0 && v != c1) bad = true;
      }
    if (bad || shared != 2) continue;

    const Vec3 mid = 0.5 * (m.verts[static_cast<std::size_t>(a)] +
                            m.verts[static_cast<std::size_t>(b)]);

    // Do not create edges that the split pass would immediately cut again.
    bool too_long = false;
    for (const int v : na)
      if (v != b &&
          (m.verts[static_cast<std::size_t>(v)] - mid).norm() > max_len)
        too_long = true;
    for (const int v : nb)
      if (v != a &&
          (m.verts[static_cast<std::size_t>(v)] - mid).norm() > max_len)
        too_long = true;
    if (too_long) continue;

    // Reject collapses that flip surviving faces.
    bool flips = false;
    for (const int side : {a, b}) {
      for (const int f : m.vfaces[static_cast<std::size_t>(side)]) {
        if (f == fs[0] || f == fs[1]) continue;
        const auto tri = m.faces[static_cast<std::size_t>(f)];
        Vec3 p[3], pn[3];
        for (int e = 0; e < 3; ++e) {
          p[e] = m.verts[static_cast<std::size_t>(tri[static_cast<std::size_t>(e)])];
          pn[e] = (tri[static_cast<std::size_t>(e)] == a ||
                   tri[static_cast<std::size_t>(e)] == b)
                      ? mid
                      : p[e];
        }
        const Vec3 n0 = (p[1] - p[0]).cross(p[2] - p[0]);
        const Vec3 n1 = (pn[1] - pn[0]).cross(pn[2] - pn[0]);
        if (n0.dot(n1) <= 0.0) {
          flips = true;
          break;
        }
      }
      if (flips) break;
    }
    if (flips) continue;

    m.verts[static_cast<std::size_t>(a)] = mid;
    m.remove_face(fs[0]);
    m.remove_face(fs[1]);
    const auto incident = m.vfaces[static_cast<std::size_t>(b)];
    for (const int f : incident) {
      auto tri = m.faces[static_cast<std::size_t>(f)];
      m.remove_face(f);
      for (auto& v : tri)
        if (v == b) v = a;
      m.add_face(tri[0], tri[1], tri[2]);
    }
    m.vdead[static_cast<std::size_t>(b)] = 1;
  }
}

void flip_pass(EditableMesh& m) {
  const auto edges = m.edge_snapshot();
  for (const auto& [a, b] : edges) {
    const int f1 = m.directed_face(a, b);
    const int f2 = m.directed_face(b, a);
    if (f1 < 0 || f2 < 0) continue;
    const int c = m.opposite_vertex(f1, a, b);
    const int d = m.opposite_vertex(f2, a, b);
    if (c < 0 || d < 0 || c == d) continue;
    int fs[2];
    if (m.edge_faces(c, d, fs) > 0) continue;  // edge already exists

    auto dev = [](int val) { return (val - 6) * (val - 6); };
    const int before =
        dev(m.valence(a)) + dev(m.valence(b)) + dev(m.valence(c)) + dev(m.valence(d));
    const int after = dev(m.valence(a) - 1) + dev(m.valence(b) - 1) +
                      dev(m.valence(c) + 1) + dev(m.valence(d) + 1);
    if (after >= before) continue;
    if (m.valence(a) <= 3 || m.valence(b) <= 3) continue;

    const Vec3& pa = m.verts[static_cast<std::size_t>(a)];
    const Vec3& pb = m.verts[static_cast<std::size_t>(b)];
    const Vec3& pc = m.verts[static_cast<std::size_t>(c)];
    const Vec3& pd = m.verts[static_cast<std::size_t>(d)];
    const Vec3 old_n = m.face_normal(f1) + m.face_normal(f2);
    const Vec3 n1 = (pb - pd).cross(pc - pd);
    const Vec3 n2 = (pa - pc).cross(pd - pc);
    if (n1.dot(old_n) <= 0.0 || n2.dot(old_n) <= 0.0) continue;

    m.remove_face(f1);
    m.remove_face(f2);
    m.add_face(d, b, c);
    m.add_face(c, a, d);
  }
}

void relax_pass(EditableMesh& m) {
  std::vector<Vec3> normal(m.verts.size(), Vec3::Zero());
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    if (m.faces[f][0] < 0) continue;
    const Vec3 n = m.face_normal(static_cast<int>(f));
    for (const int v : m.faces[f]) normal[static_cast<std::size_t>(v)] += n;
  }
  std::vector<Vec3> target(m.verts.size());
  for (std::size_t v = 0; v < m.verts.size(); ++v) {
    target[v] = m.verts[v];
    if (m.vdead[v] || m.vfaces[v].empty()) continue;
    const auto nbr = m.neighbors(static_cast<int>(v));
    if (nbr.empty()) continue;
    Vec3 g = Vec3::Zero();
    for (const int w : nbr) g += m.verts[static_cast<std::size_t>(w)];
    g /= static_cast<double>(nbr.size());
    Vec3 n = normal[v];
    const double len = n.norm();
    Vec3 d = g - m.verts[v];
    if (len > 0.0) {
      n /= len;
      d -= n.dot(d) * n;  // tangential component only
    }
    target[v] = m.verts[v] + d;
  }
  m.verts = std::move(target);
}

}  // namespace

TriMesh isotropic_remesh(const TriMesh& mesh, double target_edge_mm,
                         int iterations) {
  if (!(target_edge_mm > 0.0))
    throw Error(ErrorKind::argument, "isotropic_remesh: target must be > 0");
  if (iterations < 0)
    throw Error(ErrorKind::argument, "isotropic_remesh: negative iterations");

  EditableMesh m(mesh);
  const double max_len = 4.0 / 3.0 * target_edge_mm;
  const double min_len = 4.0 / 5.0 * target_edge_mm;
  for (int it = 0; it < iterations; ++it) {
    split_pass(m, max_len);
    collapse_pass(m, min_len, max_len);
    flip_pass(m);
    relax_pass(m);
  }

  // Compact tombstones.
  std::vector<int> vmap(m.verts.size(), -1);
  TriMesh out;
  Index nv = 0;
  for (std::size_t v = 0; v < m.verts.size(); ++v)
    if (!m.vdead[v] && !m.vfaces[v].empty()) vmap[v] = static_cast<int>(nv++);
  out.vertices.resize(nv, 3);
  for (std::size_t v = 0; v < m.verts.size(); ++v)
    if (vmap[v] >= 0) out.vertices.row(vmap[v]) = m.verts[v].transpose();
  Index nf = 0;
  for (std::size_t f = 0; f < m.faces.size(); ++f)
    if (m.faces[f][0] >= 0) ++nf;
  out.faces.resize(nf, 3);
  Index fi = 0;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    if (m.faces[f][0] < 0) continue;
    for (int e = 0; e < 3; ++e)
      out.faces(fi, e) = vmap[static_cast<std::size_t>(
          m.faces[f][static_cast<std::size_t>(e)])];
    ++fi;
  }
  return out;
}

}  // namespace coseg
