#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coseg/kdtree.hpp"
#include "coseg/mesh.hpp"
#include "coseg/rng.hpp"
#include "oracles.hpp"

#include <set>

using namespace coseg;

namespace {

RealVolume sphere_sdf(int n, double radius, double spacing = 1.0) {
  RealVolume vol(Vec3i(n, n, n), Vec3::Constant(spacing),
                 Vec3::Constant(-0.5 * spacing * (n - 1)));
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        vol(i, j, k) = vol.world(i, j, k).norm() - radius;
  return vol;
}

TriMesh jittered_sphere(Rng& rng, int subdiv, double jitter) {
  TriMesh mesh = make_icosphere(1.0, subdiv);
  for (Index v = 0; v < mesh.num_vertices(); ++v)
    for (int c = 0; c < 3; ++c)
      mesh.vertices(v, c) += rng.uniform(-jitter, jitter);
  return mesh;
}

}  // namespace

TEST_CASE("icosphere is watertight genus-0 with uniform-ish edges") {
  const TriMesh mesh = make_icosphere(2.0, 3);
  CHECK(mesh.num_vertices() == 642);
  CHECK(mesh.num_faces() == 1280);
  CHECK(is_watertight(mesh));
  CHECK(euler_characteristic(mesh) == 2);
  CHECK(enclosed_volume(mesh) > 0.0);
  CHECK(enclosed_volume(mesh) < 4.0 / 3.0 * M_PI * 8.0);
}

TEST_CASE("marching cubes on a sphere SDF") {
  const RealVolume sdf = sphere_sdf(32, 10.0);
  const TriMesh mesh = marching_cubes(sdf, 0.0);
  REQUIRE(mesh.num_faces() > 0);

  CHECK(is_watertight(mesh));
  CHECK(euler_characteristic(mesh) == 2);

  // vertices near the analytic sphere
  const double half_diag = 0.5 * std::sqrt(3.0);
  for (Index v = 0; v < mesh.num_vertices(); ++v)
    CHECK(std::abs(Vec3(mesh.vertices.row(v)).norm() - 10.0) <= half_diag);

  // outward orientation: vertex normals point along the radial direction
  const MatX3 normals = vertex_normals(mesh);
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const Vec3 r = Vec3(mesh.vertices.row(v)).normalized();
    CHECK(normals.row(v).dot(r) > 0.0);
  }
}

TEST_CASE("marching cubes reproduces a linear half-space exactly") {
  const int n = 8;
  RealVolume vol(Vec3i(n, n, n), Vec3(1, 1, 1), Vec3(0, 0, 0));
  const double c = 4.3;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) vol(i, j, k) = static_cast<double>(i) - c;
  const TriMesh mesh = marching_cubes(vol, 0.0);
  REQUIRE(mesh.num_faces() > 0);
  for (Index v = 0; v < mesh.num_vertices(); ++v)
    CHECK(mesh.vertices(v, 0) == doctest::Approx(c).epsilon(1e-9));
}

TEST_CASE("marching cubes rejects an empty level set") {
  const RealVolume sdf = sphere_sdf(16, 5.0);
  CHECK_THROWS_WITH_AS(marching_cubes(sdf, 1e9), "empty level set", Error);
  CHECK_THROWS_WITH_AS(marching_cubes(sdf, -1e9), "empty level set", Error);
}

TEST_CASE("marching cubes is watertight and oriented on random fields") {
  Rng rng(41);
  int done = 0;
  while (done < 8) {
    const RealVolume vol = oracle::random_smooth_volume(rng, 14);
    double interior_max = -1e9, border_max = -1e9;
    for (int k = 0; k < vol.nz(); ++k)
      for (int j = 0; j < vol.ny(); ++j)
        for (int i = 0; i < vol.nx(); ++i) {
          const bool border = i == 0 || j == 0 || k == 0 || i == vol.nx() - 1 ||
                              j == vol.ny() - 1 || k == vol.nz() - 1;
          (border ? border_max : interior_max) =
              std::max(border ? border_max : interior_max, vol(i, j, k));
        }
    if (interior_max - border_max < 0.1) continue;  // level set would clip
    const double level = border_max + 0.5 * (interior_max - border_max);
    const TriMesh mesh = marching_cubes(vol, level);
    if (mesh.num_faces() == 0) continue;
    ++done;
    CHECK(is_watertight(mesh));
    // consistent orientation is implied by watertightness here (every
    // directed edge appears exactly once); also sanity-check volume sign
    CHECK(std::abs(enclosed_volume(mesh)) > 0.0);
  }
}

TEST_CASE("laplacian smoothing") {
  const TriMesh sphere = make_icosphere(1.0, 3);
  SUBCASE("zero iterations is the identity") {
    const TriMesh out = laplacian_smooth(sphere, 0, 0.5);
    CHECK((out.vertices - sphere.vertices).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("regular tetrahedron with lambda 1 moves vertices to neighbor centroids") {
    TriMesh tet;
    tet.vertices.resize(4, 3);
    tet.vertices << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
    tet.faces.resize(4, 3);
    tet.faces << 0, 1, 2, 0, 3, 1, 0, 2, 3, 1, 3, 2;
    const TriMesh out = laplacian_smooth(tet, 1, 1.0);
    for (Index v = 0; v < 4; ++v) {
      Vec3 centroid = Vec3::Zero();
      for (Index w = 0; w < 4; ++w)
        if (w != v) centroid += tet.vertices.row(w).transpose();
      centroid /= 3.0;
      CHECK((Vec3(out.vertices.row(v)) - centroid).norm() <
            1e-14);
    }
  }
  SUBCASE("sphere volume shrinks monotonically") {
    TriMesh cur = sphere;
    double prev = enclosed_volume(cur);
    for (int it = 0; it < 5; ++it) {
      cur = laplacian_smooth(cur, 1, 0.5);
      const double vol = enclosed_volume(cur);
      CHECK(vol < prev);
      prev = vol;
    }
  }
  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(laplacian_smooth(sphere, 1, 0.0), Error);
    CHECK_THROWS_AS(laplacian_smooth(sphere, 1, 1.5), Error);
  }
}

TEST_CASE("taubin smoothing") {
  SUBCASE("zero iterations is the identity") {
    const TriMesh sphere = make_icosphere(1.0, 2);
    const TriMesh out = taubin_smooth(sphere, 0);
    CHECK((out.vertices - sphere.vertices).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("shrinks far less than pure laplacian smoothing") {
    const TriMesh sphere = make_icosphere(1.0, 3);
    const double v0 = enclosed_volume(sphere);
    const double v_taubin = enclosed_volume(taubin_smooth(sphere, 10, 0.5, -0.53));
    const double v_lap = enclosed_volume(laplacian_smooth(sphere, 10, 0.5));
    CHECK(std::abs(v_taubin - v0) < std::abs(v_lap - v0));
  }
  SUBCASE("reduces grid artifacts of a marching-cubes sphere") {
    // Artifacts come from voxelization: extract the boundary of a binary
    // sphere label via its signed distance at level 0.
    LabelVolume label(Vec3i(32, 32, 32), Vec3(1, 1, 1), Vec3::Constant(-15.5),
                      0);
    for (int k = 0; k < 32; ++k)
      for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i)
          label(i, j, k) = label.world(i, j, k).norm() < 10.0;
    const TriMesh mc = marching_cubes(distance_transform(label), 0.0);
    auto max_dev = [](const TriMesh& m) {
      double dev = 0.0;
      for (Index v = 0; v < m.num_vertices(); ++v)
        dev = std::max(dev, std::abs(Vec3(m.vertices.row(v)).norm() - 10.0));
      return dev;
    };
    const TriMesh smoothed = taubin_smooth(mc, 10, 0.5, -0.53);
    CHECK(max_dev(smoothed) < max_dev(mc));
  }
  SUBCASE("parameter validation") {
    const TriMesh sphere = make_icosphere(1.0, 1);
    CHECK_THROWS_AS(taubin_smooth(sphere, 1, -0.5, -0.53), Error);
    CHECK_THROWS_AS(taubin_smooth(sphere, 1, 0.5, 0.53), Error);
    CHECK_THROWS_AS(taubin_smooth(sphere, 1, 0.6, -0.5), Error);
  }
}

TEST_CASE("isotropic remeshing") {
  SUBCASE("already-uniform mesh keeps its edges in the no-op band") {
    const TriMesh sphere = make_icosphere(10.0, 3);
    const MatX2i edges0 = unique_edges(sphere);
    double mean = 0.0;
    for (Index e = 0; e < edges0.rows(); ++e)
      mean += (sphere.vertices.row(edges0(e, 0)) -
               sphere.vertices.row(edges0(e, 1)))
                  .norm();
    mean /= static_cast<double>(edges0.rows());

    const TriMesh out = isotropic_remesh(sphere, mean, 3);
    CHECK(is_watertight(out));
    const MatX2i edges = unique_edges(out);
    Index in_class = 0;
    for (Index e = 0; e < edges.rows(); ++e) {
      const double len =
          (out.vertices.row(edges(e, 0)) - out.vertices.row(edges(e, 1))).norm();
      in_class += (len > 0.8 * mean && len < 4.0 / 3.0 * mean);
    }
    CHECK(static_cast<double>(in_class) >=
          0.99 * static_cast<double>(edges.rows()));
  }
  SUBCASE("halving the target edge roughly quadruples the vertex count") {
    const TriMesh sphere = make_icosphere(10.0, 3);
    const MatX2i edges0 = unique_edges(sphere);
    double mean = 0.0;
    for (Index e = 0; e < edges0.rows(); ++e)
      mean += (sphere.vertices.row(edges0(e, 0)) -
               sphere.vertices.row(edges0(e, 1)))
                  .norm();
    mean /= static_cast<double>(edges0.rows());
    const TriMesh out = isotropic_remesh(sphere, 0.5 * mean, 4);
    const double ratio = static_cast<double>(out.num_vertices()) /
                         static_cast<double>(sphere.num_vertices());
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.5);
    CHECK(euler_characteristic(out) == 2);
    CHECK(is_watertight(out));
  }
  SUBCASE("almost all output edges land within [0.5, 1.5] of target") {
    const TriMesh mc = marching_cubes(sphere_sdf(32, 10.0), 0.0);
    for (const double target : {1.5, 2.5}) {
      const TriMesh out = isotropic_remesh(mc, target, 5);
      CHECK(is_watertight(out));
      CHECK(euler_characteristic(out) == 2);
      const MatX2i edges = unique_edges(out);
      Index ok = 0;
      for (Index e = 0; e < edges.rows(); ++e) {
        const double len =
            (out.vertices.row(edges(e, 0)) - out.vertices.row(edges(e, 1)))
                .norm();
        ok += (len >= 0.5 * target && len <= 1.5 * target);
      }
      CHECK(static_cast<double>(ok) >= 0.99 * static_cast<double>(edges.rows()));
    }
  }
}

TEST_CASE("vertex normals") {
  SUBCASE("icosphere normals are radial") {
    const TriMesh sphere = make_icosphere(3.0, 4);
    const MatX3 normals = vertex_normals(sphere);
    for (Index v = 0; v < sphere.num_vertices(); ++v) {
      const Vec3 r = Vec3(sphere.vertices.row(v)).normalized();
      const double angle = std::acos(std::clamp(normals.row(v).dot(r), -1.0, 1.0));
      CHECK(angle < 1e-2);
    }
  }
  SUBCASE("planar patch normals equal the plane normal exactly") {
    TriMesh patch;
    patch.vertices.resize(4, 3);
    patch.vertices << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0;
    patch.faces.resize(2, 3);
    patch.faces << 0, 1, 2, 0, 2, 3;
    const MatX3 normals = vertex_normals(patch);
    for (Index v = 0; v < 4; ++v) {
      CHECK(normals(v, 0) == 0.0);
      CHECK(normals(v, 1) == 0.0);
      CHECK(normals(v, 2) == 1.0);
    }
  }
  SUBCASE("flipping all faces negates the normals") {
    Rng rng(43);
    TriMesh mesh = jittered_sphere(rng, 2, 0.05);
    const MatX3 n0 = vertex_normals(mesh);
    TriMesh flipped = mesh;
    flipped.faces.col(1).swap(flipped.faces.col(2));
    const MatX3 n1 = vertex_normals(flipped);
    CHECK((n0 + n1).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("isolated vertex is an error") {
    TriMesh mesh;
    mesh.vertices.resize(4, 3);
    mesh.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0, 5, 5, 5;
    mesh.faces.resize(1, 3);
    mesh.faces << 0, 1, 2;
    CHECK_THROWS_WITH_AS(vertex_normals(mesh), "vertex with no incident face",
                         Error);
  }
}

TEST_CASE("nearest vertex queries") {
  SUBCASE("query at a vertex returns it at distance zero") {
    const TriMesh sphere = make_icosphere(2.0, 2);
    const auto [idx, d2] = nearest_vertex(sphere.vertices.row(37), sphere);
    CHECK(idx == 37);
    CHECK(d2 == 0.0);
  }
  SUBCASE("matches linear scan on random queries") {
    Rng rng(47);
    const TriMesh mesh = jittered_sphere(rng, 3, 0.2);
    VertexKdTree tree(mesh.vertices);
    for (int t = 0; t < 500; ++t) {
      const Vec3 q = rng.in_box(Vec3(-1.5, -1.5, -1.5), Vec3(1.5, 1.5, 1.5));
      const auto [ki, kd] = tree.nearest(q);
      const auto [li, ld] = oracle::linear_scan_nearest(q, mesh.vertices);
      CHECK(ki == li);
      CHECK(kd == ld);
    }
  }
  SUBCASE("ties break to the smallest index") {
    TriMesh mesh;
    mesh.vertices.resize(4, 3);
    mesh.vertices << 2, 0, 0, -2, 0, 0, 0, 2, 0, 0, -2, 0;
    mesh.faces.resize(1, 3);
    mesh.faces << 0, 1, 2;
    const auto [idx, d2] = nearest_vertex(Vec3(0, 0, 0), mesh);
    CHECK(idx == 0);
    CHECK(d2 == 4.0);
  }
}

TEST_CASE("self-intersection counting") {
  SUBCASE("convex mesh has none") {
    CHECK(count_self_intersections(make_icosphere(1.0, 3)) == 0);
  }
  SUBCASE("stella octangula counts all eight faces") {
    TriMesh mesh;
    mesh.vertices.resize(8, 3);
    mesh.vertices << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1,  // tet A
        -1, -1, -1, -1, 1, 1, 1, -1, 1, 1, 1, -1;               // tet B = -A
    mesh.faces.resize(8, 3);
    mesh.faces << 0, 1, 2, 0, 3, 1, 0, 2, 3, 1, 3, 2, 4, 5, 6, 4, 7, 5, 4, 6,
        7, 5, 7, 6;
    CHECK(count_self_intersections(mesh) == 8);
    CHECK(oracle::brute_force_self_intersections(mesh) == 8);
  }
  SUBCASE("matches the exhaustive pairwise oracle on jittered meshes") {
    Rng rng(53);
    for (int trial = 0; trial < 4; ++trial) {
      const TriMesh mesh = jittered_sphere(rng, 2, rng.uniform(0.15, 0.4));
      CHECK(count_self_intersections(mesh) ==
            oracle::brute_force_self_intersections(mesh));
    }
  }
  SUBCASE("invariant under rigid transforms") {
    Rng rng(59);
    const TriMesh mesh = jittered_sphere(rng, 2, 0.3);
    const int base = count_self_intersections(mesh);
    CHECK(base > 0);

    const double angle = 0.83;
    Eigen::Matrix3d R;
    R = Eigen::AngleAxisd(angle, Vec3(1, 2, 3).normalized());
    TriMesh moved = mesh;
    moved.vertices = (mesh.vertices * R.transpose()).rowwise() +
                     Eigen::RowVector3d(4.0, -7.0, 11.0);
    CHECK(count_self_intersections(moved) == base);
  }
}

TEST_CASE("unique_edges validates faces") {
  TriMesh bad;
  bad.vertices.resize(3, 3);
  bad.vertices.setZero();
  bad.faces.resize(1, 3);
  bad.faces << 0, 1, 5;
  CHECK_THROWS_AS(unique_edges(bad), Error);
  bad.faces << 0, 1, 1;
  CHECK_THROWS_AS(unique_edges(bad), Error);
}
