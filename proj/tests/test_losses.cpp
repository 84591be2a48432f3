#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coseg/losses.hpp"
#include "coseg/rng.hpp"
#include "oracles.hpp"

using namespace coseg;

namespace {

TriMesh point_cloud(std::initializer_list<Vec3> pts) {
  TriMesh m;
  m.vertices.resize(static_cast<Index>(pts.size()), 3);
  Index i = 0;
  for (const Vec3& p : pts) m.vertices.row(i++) = p.transpose();
  m.faces.resize(0, 3);
  return m;
}

TriMesh jittered(Rng& rng, int subdiv, double amp) {
  TriMesh m = make_icosphere(1.0, subdiv);
  for (Index v = 0; v < m.num_vertices(); ++v)
    for (int c = 0; c < 3; ++c) m.vertices(v, c) += rng.uniform(-amp, amp);
  return m;
}

// Chamfer with assignments frozen at the evaluation point, for the
// finite-difference probes.
double frozen_chamfer(const MatX3& pred, const MatX3& target,
                      const std::vector<int>& fwd, const std::vector<int>& bwd) {
  double a = 0.0, b = 0.0;
  for (Index i = 0; i < pred.rows(); ++i)
    a += (pred.row(i) - target.row(fwd[static_cast<std::size_t>(i)]))
             .squaredNorm();
  for (Index j = 0; j < target.rows(); ++j)
    b += (target.row(j) - pred.row(bwd[static_cast<std::size_t>(j)]))
             .squaredNorm();
  return a / static_cast<double>(pred.rows()) +
         b / static_cast<double>(target.rows());
}

}  // namespace

TEST_CASE("bidirectional chamfer") {
  SUBCASE("identical vertex sets give zero with zero gradient") {
    Rng rng(83);
    const TriMesh m = jittered(rng, 2, 0.05);
    const LossValue lv = chamfer_bi(m, m);
    CHECK(lv.value == 0.0);
    CHECK(lv.grad.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("hand example: 1 + (1+9)/2 = 6") {
    const TriMesh pred = point_cloud({Vec3(0, 0, 0)});
    const TriMesh target = point_cloud({Vec3(1, 0, 0), Vec3(3, 0, 0)});
    // exhaustive pairwise oracle
    double fwd = 1.0;               // nearest target to (0,0,0)
    double bwd = (1.0 + 9.0) / 2.0; // each target to its nearest pred
    CHECK(chamfer_bi(pred, target).value ==
          doctest::Approx(fwd + bwd).epsilon(1e-15));
    CHECK(chamfer_bi(pred, target).value == doctest::Approx(6.0));
  }
  SUBCASE("translation invariance") {
    Rng rng(89);
    const TriMesh a = jittered(rng, 2, 0.1);
    const TriMesh b = jittered(rng, 2, 0.1);
    const double base = chamfer_bi(a, b).value;
    TriMesh a2 = a, b2 = b;
    const Eigen::RowVector3d c(3.25, -1.5, 0.125);
    a2.vertices.rowwise() += c;
    b2.vertices.rowwise() += c;
    CHECK(chamfer_bi(a2, b2).value == doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("gradient matches finite differences with frozen assignments") {
    Rng rng(97);
    const TriMesh pred = jittered(rng, 1, 0.15);
    const TriMesh target = jittered(rng, 1, 0.15);
    const LossValue lv = chamfer_bi(pred, target);

    VertexKdTree ttree(target.vertices);
    VertexKdTree ptree(pred.vertices);
    std::vector<int> fwd, bwd;
    for (Index i = 0; i < pred.num_vertices(); ++i)
      fwd.push_back(ttree.nearest(pred.vertices.row(i)).first);
    for (Index j = 0; j < target.num_vertices(); ++j)
      bwd.push_back(ptree.nearest(target.vertices.row(j)).first);

    const MatX3 fd = oracle::fd_vertex_gradient(
        [&](const MatX3& v) { return frozen_chamfer(v, target.vertices, fwd, bwd); },
        pred.vertices, 1e-6);
    CHECK((fd - lv.grad).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("boundary loss") {
  SUBCASE("target subset of pred gives zero") {
    Rng rng(101);
    const TriMesh pred = jittered(rng, 2, 0.1);
    TriMesh target;
    target.vertices = pred.vertices.topRows(20);
    target.faces.resize(0, 3);
    CHECK(boundary_loss(pred, target).value == 0.0);
  }
  SUBCASE("hand example: 2 * 1 = 2") {
    const TriMesh pred = point_cloud({Vec3(0, 0, 0), Vec3(5, 0, 0)});
    const TriMesh target = point_cloud({Vec3(1, 0, 0)});
    CHECK(boundary_loss(pred, target).value == doctest::Approx(2.0));
  }
  SUBCASE("single-directional: far pred vertices are free") {
    Rng rng(103);
    const TriMesh pred = jittered(rng, 1, 0.1);
    const TriMesh target = jittered(rng, 1, 0.1);
    const double base = boundary_loss(pred, target).value;
    TriMesh bigger = pred;
    bigger.vertices.conservativeResize(pred.num_vertices() + 1, 3);
    bigger.vertices.row(pred.num_vertices()) =
        Eigen::RowVector3d(100.0, 0.0, 0.0);
    CHECK(boundary_loss(bigger, target).value == base);
  }
  SUBCASE("equals twice the reverse chamfer term (cross-check identity)") {
    Rng rng(107);
    const TriMesh pred = jittered(rng, 1, 0.2);
    const TriMesh target = jittered(rng, 1, 0.2);
    VertexKdTree ptree(pred.vertices);
    double rev = 0.0;
    for (Index j = 0; j < target.num_vertices(); ++j)
      rev += ptree.nearest(target.vertices.row(j)).second;
    rev /= static_cast<double>(target.num_vertices());
    CHECK(boundary_loss(pred, target).value ==
          doctest::Approx(2.0 * rev).epsilon(1e-14));
  }
  SUBCASE("gradient matches frozen finite differences") {
    Rng rng(109);
    const TriMesh pred = jittered(rng, 1, 0.15);
    const TriMesh target = jittered(rng, 1, 0.15);
    const LossValue lv = boundary_loss(pred, target);
    VertexKdTree ptree(pred.vertices);
    std::vector<int> bwd;
    for (Index j = 0; j < target.num_vertices(); ++j)
      bwd.push_back(ptree.nearest(target.vertices.row(j)).first);
    const MatX3 fd = oracle::fd_vertex_gradient(
        [&](const MatX3& v) {
          double acc = 0.0;
          for (Index j = 0; j < target.num_vertices(); ++j)
            acc += (target.vertices.row(j) - v.row(bwd[static_cast<std::size_t>(j)]))
                       .squaredNorm();
          return 2.0 * acc / static_cast<double>(target.num_vertices());
        },
        pred.vertices, 1e-6);
    CHECK((fd - lv.grad).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("inflation loss") {
  const double eps = 1e-12;
  Rng rng(113);
  const TriMesh base = make_icosphere(1.0, 2);
  const MatX3 normals = vertex_normals(base);

  SUBCASE("aligned displacement is nearly zero loss") {
    TriMesh pred = base;
    pred.vertices += 1.0 * normals;
    const double v = inflation_loss(pred, base, normals, eps).value;
    CHECK(v == doctest::Approx(1.0 - 1.0 / (1.0 + eps)).epsilon(1e-6));
    CHECK(v < 1e-10);
  }
  SUBCASE("anti-aligned displacement saturates at two") {
    TriMesh pred = base;
    pred.vertices -= 0.5 * normals;
    CHECK(inflation_loss(pred, base, normals, eps).value ==
          doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("orthogonal displacement scores one") {
    TriMesh pred = base;
    for (Index v = 0; v < base.num_vertices(); ++v) {
      const Vec3 n = normals.row(v);
      Vec3 t = n.cross(Vec3(0.12, 0.95, -0.31));
      if (t.norm() < 1e-6) t = n.cross(Vec3(1, 0, 0));
      pred.vertices.row(v) += 0.3 * t.normalized().transpose();
    }
    CHECK(inflation_loss(pred, base, normals, eps).value ==
          doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("value stays within [0, 2] for random displacements") {
    for (int trial = 0; trial < 10; ++trial) {
      TriMesh pred = base;
      for (Index v = 0; v < pred.num_vertices(); ++v)
        for (int c = 0; c < 3; ++c)
          pred.vertices(v, c) += rng.uniform(-2.0, 2.0);
      const double v = inflation_loss(pred, base, normals, eps).value;
      CHECK(v >= 0.0);
      CHECK(v <= 2.0);
    }
  }
  SUBCASE("gradient matches finite differences away from zero") {
    TriMesh pred = base;
    for (Index v = 0; v < pred.num_vertices(); ++v)
      for (int c = 0; c < 3; ++c) pred.vertices(v, c) += rng.uniform(-0.3, 0.3);
    const LossValue lv = inflation_loss(pred, base, normals, eps);
    const MatX3 fd = oracle::fd_vertex_gradient(
        [&](const MatX3& v) {
          TriMesh p = pred;
          p.vertices = v;
          return inflation_loss(p, base, normals, eps).value;
        },
        pred.vertices, 1e-7);
    for (Index v = 0; v < fd.rows(); ++v)
      for (int c = 0; c < 3; ++c)
        CHECK(oracle::rel_err(fd(v, c), lv.grad(v, c), 1e-4) < 1e-4);
  }
  SUBCASE("zero displacement hits the closed form (exploding gradient)") {
    const LossValue lv = inflation_loss(base, base, normals, eps);
    const MatX3 closed = inflation_grad_at_identity(base, normals, eps);
    for (Index v = 0; v < closed.rows(); ++v) {
      CHECK(oracle::rel_err(lv.grad.row(v).norm(), closed.row(v).norm()) <
            1e-6);
      // anti-parallel to the normal
      CHECK(lv.grad.row(v).dot(normals.row(v)) < 0.0);
    }
    const double n = static_cast<double>(base.num_vertices());
    CHECK(closed.row(0).norm() == doctest::Approx(1.0 / (eps * n)));
  }
}

TEST_CASE("edge loss") {
  SUBCASE("coincident vertices give zero") {
    TriMesh m;
    m.vertices = MatX3::Zero(3, 3);
    m.faces.resize(1, 3);
    m.faces << 0, 1, 2;
    CHECK(edge_loss(m).value == 0.0);
  }
  SUBCASE("unit regular tetrahedron scores one") {
    const double s = 1.0 / std::sqrt(2.0);
    TriMesh tet;
    tet.vertices.resize(4, 3);
    tet.vertices << s, s, s, s, -s, -s, -s, s, -s, -s, -s, s;
    tet.vertices *= 1.0 / std::sqrt(2.0);  // edge length 1... scaled below
    // current edge length: |v0-v1| = |(0, 2s, 2s)|/sqrt2 = 2s/sqrt2*sqrt2 = ...
    TriMesh unit = tet;
    const double len = (tet.vertices.row(0) - tet.vertices.row(1)).norm();
    unit.vertices /= len;
    unit.faces.resize(4, 3);
    unit.faces << 0, 1, 2, 0, 3, 1, 0, 2, 3, 1, 3, 2;
    CHECK(edge_loss(unit).value == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("homogeneous of degree two under scaling") {
    Rng rng(127);
    const TriMesh m = jittered(rng, 2, 0.1);
    const double base = edge_loss(m).value;
    TriMesh scaled = m;
    scaled.vertices *= 3.0;
    CHECK(edge_loss(scaled).value == doctest::Approx(9.0 * base).epsilon(1e-12));
  }
  SUBCASE("gradient matches finite differences") {
    Rng rng(131);
    const TriMesh m = jittered(rng, 1, 0.1);
    const LossValue lv = edge_loss(m);
    const MatX3 fd = oracle::fd_vertex_gradient(
        [&](const MatX3& v) {
          TriMesh p = m;
          p.vertices = v;
          return edge_loss(p).value;
        },
        m.vertices, 1e-6);
    CHECK((fd - lv.grad).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("normal consistency loss") {
  SUBCASE("planar patch scores zero") {
    TriMesh patch;
    patch.vertices.resize(4, 3);
    patch.vertices << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0;
    patch.faces.resize(2, 3);
    patch.faces << 0, 1, 2, 0, 2, 3;
    CHECK(normal_consistency_loss(patch).value == doctest::Approx(0.0));
  }
  SUBCASE("nonnegative, and finer tessellation is flatter") {
    const double coarse = normal_consistency_loss(make_icosphere(1, 1)).value;
    const double fine = normal_consistency_loss(make_icosphere(1, 3)).value;
    CHECK(coarse >= 0.0);
    CHECK(fine >= 0.0);
    CHECK(fine < coarse);
  }
  SUBCASE("gradient matches finite differences") {
    Rng rng(137);
    const TriMesh m = jittered(rng, 1, 0.08);
    const LossValue lv = normal_consistency_loss(m);
    const MatX3 fd = oracle::fd_vertex_gradient(
        [&](const MatX3& v) {
          TriMesh p = m;
          p.vertices = v;
          return normal_consistency_loss(p).value;
        },
        m.vertices, 1e-6);
    for (Index v = 0; v < fd.rows(); ++v)
      for (int c = 0; c < 3; ++c)
        CHECK(oracle::rel_err(fd(v, c), lv.grad(v, c), 1e-3) < 1e-5);
  }
}

TEST_CASE("mse pre-training loss and surface inflation") {
  Rng rng(139);
  const TriMesh base = make_icosphere(1.0, 2);

  SUBCASE("zero at the target, squared offset otherwise") {
    CHECK(mse_pretrain_loss(base, base).value == 0.0);
    TriMesh moved = base;
    const Eigen::RowVector3d d(0.3, -0.4, 1.2);
    moved.vertices.rowwise() += d;
    CHECK(mse_pretrain_loss(moved, base).value ==
          doctest::Approx(d.squaredNorm()).epsilon(1e-12));
    // gradient = 2 (v - t) / n
    const LossValue lv = mse_pretrain_loss(moved, base);
    const double n = static_cast<double>(base.num_vertices());
    for (Index v = 0; v < base.num_vertices(); ++v)
      CHECK((lv.grad.row(v) - 2.0 * d / n).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("inflation identities") {
    CHECK((inflate_surface(base, 0.1, 0).vertices - base.vertices)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((inflate_surface(base, 0.0, 7).vertices - base.vertices)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  SUBCASE("unit sphere inflates to radius two after ten 0.1 steps") {
    const TriMesh inflated = inflate_surface(base, 0.1, 10);
    for (Index v = 0; v < inflated.num_vertices(); ++v)
      CHECK(Vec3(inflated.vertices.row(v)).norm() ==
            doctest::Approx(2.0).epsilon(0.02));
  }
}

TEST_CASE("composite losses") {
  Rng rng(149);
  const TriMesh pred = jittered(rng, 2, 0.05);
  const TriMesh target = jittered(rng, 2, 0.05);
  LossConfig cfg;
  CHECK(cfg.w_edge == 0.5);
  CHECK(cfg.w_nc == 5.0);

  SUBCASE("white loss without smoothness equals chamfer") {
    LossConfig bare = cfg;
    bare.w_edge = 0.0;
    bare.w_nc = 0.0;
    const WhiteLoss wl = loss_white(pred, target, bare);
    CHECK(wl.total == chamfer_bi(pred, target).value);
  }
  SUBCASE("white loss at the target is smoothness only") {
    const WhiteLoss wl = loss_white(target, target, cfg);
    CHECK(wl.chamfer == 0.0);
    CHECK(wl.total ==
          doctest::Approx(cfg.w_edge * wl.edge + cfg.w_nc * wl.nc));
  }
  SUBCASE("pial loss: pretrain floor and boundary reduction") {
    LossConfig pc = cfg;
    pc.pretrain_iters = 3;
    const PialContext ctx = PialContext::make(pred, pc);

    // During pretrain, pred == inflated target gives a zero data term.
    const PialLoss at_floor = loss_pial(ctx.inflated_target, target, ctx, pc, 0);
    CHECK(at_floor.pretrain);
    CHECK(at_floor.mse == 0.0);

    // After pretrain with w_inflation = 0 the data term is pure boundary.
    LossConfig nb = pc;
    nb.w_inflation = 0.0;
    const PialLoss pl = loss_pial(ctx.inflated_target, target, ctx, nb, 10);
    CHECK_FALSE(pl.pretrain);
    TriMesh predm = ctx.inflated_target;
    CHECK(pl.total ==
          doctest::Approx(boundary_loss(predm, target).value +
                          nb.w_edge * edge_loss(predm).value +
                          nb.w_nc * normal_consistency_loss(predm).value));
  }
  SUBCASE("rigid invariance of the chamfer family") {
    Eigen::Matrix3d R;
    R = Eigen::AngleAxisd(1.1, Vec3(0.2, -1.0, 0.6).normalized());
    TriMesh pa = pred, tb = target;
    pa.vertices = (pred.vertices * R.transpose()).rowwise() +
                  Eigen::RowVector3d(5, 6, -7);
    tb.vertices = (target.vertices * R.transpose()).rowwise() +
                  Eigen::RowVector3d(5, 6, -7);
    CHECK(chamfer_bi(pa, tb).value ==
          doctest::Approx(chamfer_bi(pred, target).value).epsilon(1e-10));
    CHECK(boundary_loss(pa, tb).value ==
          doctest::Approx(boundary_loss(pred, target).value).epsilon(1e-10));
  }
}
