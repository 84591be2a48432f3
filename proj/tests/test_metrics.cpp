#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coseg/metrics.hpp"
#include "coseg/rng.hpp"
#include "oracles.hpp"

using namespace coseg;

namespace {

TriMesh unit_square(double z) {
  TriMesh m;
  m.vertices.resize(4, 3);
  m.vertices << 0, 0, z, 1, 0, z, 1, 1, z, 0, 1, z;
  m.faces.resize(2, 3);
  m.faces << 0, 1, 2, 0, 2, 3;
  return m;
}

TriMesh jittered(Rng& rng, int subdiv, double amp) {
  TriMesh m = make_icosphere(1.0, subdiv);
  for (Index v = 0; v < m.num_vertices(); ++v)
    for (int c = 0; c < 3; ++c) m.vertices(v, c) += rng.uniform(-amp, amp);
  return m;
}

}  // namespace

TEST_CASE("assd") {
  SUBCASE("identical surfaces give zero") {
    const TriMesh m = make_icosphere(2.0, 2);
    CHECK(assd(m, m, 2000, 5) < 1e-12);
  }
  SUBCASE("parallel unit squares read their separation") {
    for (const double d : {0.5, 2.0}) {
      const TriMesh a = unit_square(0.0);
      const TriMesh b = unit_square(d);
      CHECK(assd(a, b, 4000, 9) == doctest::Approx(d).epsilon(0.01));
      CHECK(hd90(a, b, 4000, 9) == doctest::Approx(d).epsilon(0.01));
    }
  }
  SUBCASE("symmetric under argument swap with the same seed") {
    Rng rng(151);
    const TriMesh a = jittered(rng, 2, 0.1);
    const TriMesh b = jittered(rng, 2, 0.1);
    CHECK(assd(a, b, 3000, 21) == assd(b, a, 3000, 21));
    CHECK(hd90(a, b, 3000, 21) == hd90(b, a, 3000, 21));
  }
  SUBCASE("rigid invariance with shared seeds") {
    Rng rng(157);
    const TriMesh a = jittered(rng, 2, 0.1);
    const TriMesh b = jittered(rng, 2, 0.12);
    const double base = assd(a, b, 3000, 33);
    Eigen::Matrix3d R;
    R = Eigen::AngleAxisd(0.7, Vec3(1, 1, 0).normalized());
    TriMesh a2 = a, b2 = b;
    a2.vertices = (a.vertices * R.transpose()).rowwise() +
                  Eigen::RowVector3d(2, -3, 4);
    b2.vertices = (b.vertices * R.transpose()).rowwise() +
                  Eigen::RowVector3d(2, -3, 4);
    CHECK(assd(a2, b2, 3000, 33) == doctest::Approx(base).epsilon(1e-9));
  }
  SUBCASE("sampling stability: 4x samples moves the estimate < 0.5%") {
    Rng rng(163);
    const TriMesh a = jittered(rng, 3, 0.05);
    const TriMesh b = make_icosphere(1.1, 3);
    const double coarse = assd(a, b, 20000, 3);
    const double fine = assd(a, b, 80000, 3);
    CHECK(std::abs(coarse - fine) / fine < 0.005);
  }
}

TEST_CASE("hd90 relates to assd as the distance distribution dictates") {
  Rng rng(167);
  const TriMesh a = jittered(rng, 2, 0.15);
  const TriMesh b = jittered(rng, 2, 0.15);
  const double v_assd = assd(a, b, 5000, 77);
  const double v_hd90 = hd90(a, b, 5000, 77);
  // For these rough surfaces the 90th percentile dominates the mean.
  CHECK(v_hd90 >= v_assd);
  CHECK(hd90(a, a, 1000, 1) < 1e-12);
}

TEST_CASE("cortical thickness") {
  const TriMesh white = make_icosphere(1.0, 3);
  SUBCASE("zero for coincident surfaces") {
    const VecX t = cortical_thickness(white, white);
    CHECK(t.maxCoeff() == 0.0);
  }
  SUBCASE("offset along normals reads the offset") {
    TriMesh pial = white;
    pial.vertices += 2.0 * vertex_normals(white);
    const VecX t = cortical_thickness(white, pial);
    for (Index v = 0; v < t.size(); ++v)
      CHECK(t[v] == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("thickness error is a mean L1 difference") {
    VecX a(4), b(4);
    a << 1.0, 2.0, 3.0, 4.0;
    b << 1.5, 2.0, 2.0, 5.0;
    CHECK(mean_l1_error(a, b) == doctest::Approx((0.5 + 0.0 + 1.0 + 1.0) / 4.0));
    CHECK_THROWS_AS(mean_l1_error(a, VecX::Zero(3)), Error);
  }
  SUBCASE("connectivity mismatch is rejected") {
    const TriMesh other = make_icosphere(1.0, 2);
    CHECK_THROWS_AS(cortical_thickness(white, other), Error);
  }
  SUBCASE("rigid invariance") {
    TriMesh pial = white;
    pial.vertices += 1.5 * vertex_normals(white);
    const VecX base = cortical_thickness(white, pial);
    Eigen::Matrix3d R;
    R = Eigen::AngleAxisd(1.3, Vec3(0, 1, 1).normalized());
    TriMesh w2 = white, p2 = pial;
    w2.vertices = (white.vertices * R.transpose()).rowwise() +
                  Eigen::RowVector3d(1, 2, 3);
    p2.vertices = (pial.vertices * R.transpose()).rowwise() +
                  Eigen::RowVector3d(1, 2, 3);
    const VecX moved = cortical_thickness(w2, p2);
    CHECK((base - moved).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sulcal depth proxy") {
  SUBCASE("sphere depth is bounded by the smoothing shrinkage") {
    const TriMesh sphere = make_icosphere(10.0, 3);
    const VecX depth = sulcal_depth(sphere, 200, 0.5);
    // reference for the tolerance: how much the envelope actually shrank
    const TriMesh smoothed = laplacian_smooth(sphere, 200, 0.5);
    double min_r = 1e9;
    for (Index v = 0; v < smoothed.num_vertices(); ++v)
      min_r = std::min(min_r, Vec3(smoothed.vertices.row(v)).norm());
    const double shrink = 10.0 - min_r;
    CHECK(depth.cwiseAbs().maxCoeff() <= shrink + 0.1);
    // on a sphere every vertex sits outside the shrunken envelope
    CHECK(depth.maxCoeff() <= 0.0);
  }
  SUBCASE("a dented sphere is deepest at the dent") {
    TriMesh mesh = make_icosphere(10.0, 3);
    // radial dent around +z pole
    Index deepest = 0;
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      const Vec3 p = mesh.vertices.row(v);
      const double angle = std::acos(std::clamp(p.z() / p.norm(), -1.0, 1.0));
      const double dent = 4.0 * std::exp(-angle * angle / 0.08);
      mesh.vertices.row(v) -= dent * p.normalized().transpose();
      if (mesh.vertices(v, 2) > mesh.vertices(deepest, 2)) deepest = v;
    }
    const VecX depth = sulcal_depth(mesh, 60, 0.5);
    // the deepest point should be (near) the pole vertex and positive
    Index arg;
    depth.maxCoeff(&arg);
    const Vec3 top = mesh.vertices.row(arg);
    CHECK(depth[arg] > 0.5);
    CHECK(top.normalized().z() > 0.9);
  }
}

TEST_CASE("midthickness surface") {
  const TriMesh white = make_icosphere(1.0, 2);
  TriMesh pial = white;
  pial.vertices *= 3.0;
  const TriMesh mid = midthickness_surface(white, pial);
  for (Index v = 0; v < mid.num_vertices(); ++v)
    CHECK(Vec3(mid.vertices.row(v)).norm() == doctest::Approx(2.0).epsilon(1e-12));
}
