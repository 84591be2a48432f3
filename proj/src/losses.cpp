#include "coseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>

namespace coseg {

namespace {

bool same_connectivity(const TriMesh& a, const TriMesh& b) {
  return a.num_vertices() == b.num_vertices() &&
         a.faces.rows() == b.faces.rows() &&
         (a.faces.array() == b.faces.array()).all();
}

}  // namespace

void LossConfig::validate() const {
  if (w_edge < 0 || w_nc < 0 || w_inflation < 0)
    throw Error(ErrorKind::argument, "loss weights must be >= 0");
  if (!(epsilon > 0)) throw Error(ErrorKind::argument, "epsilon must be > 0");
  if (n_inflate_steps < 0)
    throw Error(ErrorKind::argument, "n_inflate_steps must be >= 0");
  if (pretrain_iters < 0)
    throw Error(ErrorKind::argument, "pretrain_iters must be >= 0");
}

namespace {

void require_nonempty(const TriMesh& a, const TriMesh& b) {
  if (a.empty() || b.empty())
    throw Error(ErrorKind::contract, "empty vertex set");
}

}  // namespace

LossValue chamfer_bi(const TriMesh& pred, const TriMesh& target,
                     const VertexKdTree* target_tree) {
  require_nonempty(pred, target);
  std::optional<VertexKdTree> local;
  if (!target_tree) {
    local.emplace(target.vertices);
    target_tree = &*local;
  }
  const double inv_pred = 1.0 / static_cast<double>(pred.num_vertices());
  const double inv_tgt = 1.0 / static_cast<double>(target.num_vertices());

  LossValue out;
  out.grad = MatX3::Zero(pred.num_vertices(), 3);

  double fwd = 0.0;
  for (Index v = 0; v < pred.num_vertices(); ++v) {
    const Vec3 p = pred.vertices.row(v);
    const auto [idx, d2] = target_tree->nearest(p);
    fwd += d2;
    const Vec3 diff = p - Vec3(target.vertices.row(idx));
    out.grad.row(v) += (2.0 * inv_pred) * diff.transpose();
  }

  VertexKdTree pred_tree(pred.vertices);
  double bwd = 0.0;
  for (Index v = 0; v < target.num_vertices(); ++v) {
    const Vec3 q = target.vertices.row(v);
    const auto [idx, d2] = pred_tree.nearest(q);
    bwd += d2;
    const Vec3 diff = Vec3(pred.vertices.row(idx)) - q;
    out.grad.row(idx) += (2.0 * inv_tgt) * diff.transpose();
  }

  out.value = fwd * inv_pred + bwd * inv_tgt;
  return out;
}

LossValue boundary_loss(const TriMesh& pred, const TriMesh& target) {
  require_nonempty(pred, target);
  VertexKdTree pred_tree(pred.vertices);
  const double scale = 2.0 / static_cast<double>(target.num_vertices());

  LossValue out;
  out.grad = MatX3::Zero(pred.num_vertices(), 3);
  double acc = 0.0;
  for (Index v = 0; v < target.num_vertices(); ++v) {
    const Vec3 q = target.vertices.row(v);
    const auto [idx, d2] = pred_tree.nearest(q);
    acc += d2;
    const Vec3 diff = Vec3(pred.vertices.row(idx)) - q;
    out.grad.row(idx) += (2.0 * scale) * diff.transpose();
  }
  out.value = scale * acc;
  return out;
}

LossValue inflation_loss(const TriMesh& pred, const TriMesh& input_surf,
                         const MatX3& normals, double epsilon) {
  if (!same_connectivity(pred, input_surf))
    throw Error(ErrorKind::contract, "inflation_loss: connectivity mismatch");
  if (normals.rows() != pred.num_vertices())
    throw Error(ErrorKind::contract, "inflation_loss: normals mismatch");

  const Index n = pred.num_vertices();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossValue out;
  out.grad = MatX3::Zero(n, 3);
  double mean_cos = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vec3 d = pred.vertices.row(i) - input_surf.vertices.row(i);
    const Vec3 nrm = normals.row(i);
    const double r = d.norm();
    const double s = r + epsilon;
    const double cosv = d.dot(nrm) / s;
    mean_cos += cosv;
    Vec3 dcos;
    if (r == 0.0) {
      // d/r is undefined here; the c * d/r term vanishes with c = 0.
      dcos = nrm / epsilon;
    } else {
      dcos = nrm / s - (d.dot(nrm) / (s * s)) * (d / r);
    }
    out.grad.row(i) = (-inv_n) * dcos.transpose();
  }
  out.value = 1.0 - inv_n * mean_cos;
  return out;
}

MatX3 inflation_grad_at_identity(const TriMesh& input_surf,
                                 const MatX3& normals, double epsilon) {
  if (normals.rows() != input_surf.num_vertices())
    throw Error(ErrorKind::contract, "normals mismatch");
  const double scale =
      -1.0 / (epsilon * static_cast<double>(input_surf.num_vertices()));
  return scale * normals;
}

LossValue edge_loss(const TriMesh& mesh) {
  const MatX2i edges = unique_edges(mesh);
  if (edges.rows() == 0) throw Error(ErrorKind::contract, "mesh has no edges");
  const double inv_e = 1.0 / static_cast<double>(edges.rows());

  LossValue out;
  out.grad = MatX3::Zero(mesh.num_vertices(), 3);
  double acc = 0.0;
  for (Index e = 0; e < edges.rows(); ++e) {
    const int a = edges(e, 0), b = edges(e, 1);
    const Vec3 d = mesh.vertices.row(a) - mesh.vertices.row(b);
    acc += d.squaredNorm();
    out.grad.row(a) += (2.0 * inv_e) * d.transpose();
    out.grad.row(b) -= (2.0 * inv_e) * d.transpose();
  }
  out.value = acc * inv_e;
  return out;
}

LossValue normal_consistency_loss(const TriMesh& mesh) {
  // Interior edges with their two incident faces.
  struct EdgeFaces {
    int f[2] = {-1, -1};
    int count = 0;
  };
  std::unordered_map<std::uint64_t, EdgeFaces> emap;
  emap.reserve(static_cast<std::size_t>(mesh.num_faces()) * 3 / 2);
  auto key = [](int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) |
           static_cast<std::uint32_t>(b);
  };
  for (Index f = 0; f < mesh.num_faces(); ++f)
    for (int e = 0; e < 3; ++e) {
      auto& ef = emap[key(mesh.faces(f, e), mesh.faces(f, (e + 1) % 3))];
      if (ef.count < 2) ef.f[ef.count] = static_cast<int>(f);
      ++ef.count;
    }

  // Face normals and areas.
  const Index nf = mesh.num_faces();
  std::vector<Vec3> raw(static_cast<std::size_t>(nf));
  for (Index f = 0; f < nf; ++f) {
    const Vec3 a = mesh.vertices.row(mesh.faces(f, 0));
    const Vec3 b = mesh.vertices.row(mesh.faces(f, 1));
    const Vec3 c = mesh.vertices.row(mesh.faces(f, 2));
    raw[static_cast<std::size_t>(f)] = (b - a).cross(c - a);
  }

  std::vector<std::uint64_t> keys;
  keys.reserve(emap.size());
  for (const auto& [k, ef] : emap)
    if (ef.count == 2) keys.push_back(k);
  std::sort(keys.begin(), keys.end());  // deterministic reduction order
  if (keys.empty())
    throw Error(ErrorKind::contract, "mesh has no interior edges");

  LossValue out;
  out.grad = MatX3::Zero(mesh.num_vertices(), 3);
  const double inv_e = 1.0 / static_cast<double>(keys.size());
  double acc = 0.0;

  for (const auto k : keys) {
    const auto& ef = emap[k];
    const int fa = ef.f[0], fb = ef.f[1];
    const Vec3 ca = raw[static_cast<std::size_t>(fa)];
    const Vec3 cb = raw[static_cast<std::size_t>(fb)];
    const double la = ca.norm(), lb = cb.norm();
    if (la == 0.0 || lb == 0.0)
      throw Error(ErrorKind::numerical, "degenerate face normal");
    const Vec3 na = ca / la, nb = cb / lb;
    const double cosd = na.dot(nb);
    acc += 1.0 - cosd;

    // d cos / d c_a = (nb - cos * na) / |c_a|; c varies with the three
    // vertices of face a through delta c = e_opp x delta v.
    const Vec3 ma = (nb - cosd * na) / la;
    const Vec3 mb = (na - cosd * nb) / lb;
    const double w = -inv_e;  // d(1 - cos)/dcos = -1
    for (int which = 0; which < 2; ++which) {
      const int f = which == 0 ? fa : fb;
      const Vec3& m = which == 0 ? ma : mb;
      const int v0 = mesh.faces(f, 0), v1 = mesh.faces(f, 1), v2 = mesh.faces(f, 2);
      const Vec3 p0 = mesh.vertices.row(v0);
      const Vec3 p1 = mesh.vertices.row(v1);
      const Vec3 p2 = mesh.vertices.row(v2);
      // grad wrt v of cos = m x e_opp(v)
      out.grad.row(v0) += w * m.cross(p2 - p1).transpose();
      out.grad.row(v1) += w * m.cross(p0 - p2).transpose();
      out.grad.row(v2) += w * m.cross(p1 - p0).transpose();
    }
  }
  out.value = acc * inv_e;
  return out;
}

LossValue mse_pretrain_loss(const TriMesh& pred,
                            const TriMesh& inflated_target) {
  if (!same_connectivity(pred, inflated_target))
    throw Error(ErrorKind::contract, "mse_pretrain_loss: connectivity mismatch");
  const Index n = pred.num_vertices();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossValue out;
  out.grad.resize(n, 3);
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vec3 d = pred.vertices.row(i) - inflated_target.vertices.row(i);
    acc += d.squaredNorm();
    out.grad.row(i) = (2.0 * inv_n) * d.transpose();
  }
  out.value = acc * inv_n;
  return out;
}

TriMesh inflate_surface(const TriMesh& input_surf, double gamma, int n_steps) {
  if (n_steps < 0)
    throw Error(ErrorKind::argument, "inflate_surface: negative steps");
  TriMesh out = input_surf;
  for (int s = 0; s < n_steps; ++s) {
    const MatX3 normals = vertex_normals(out);
    out.vertices += gamma * normals;
  }
  return out;
}

WhiteLoss loss_white(const TriMesh& pred, const TriMesh& target,
                     const LossConfig& cfg, const VertexKdTree* target_tree) {
  cfg.validate();
  const LossValue ch = chamfer_bi(pred, target, target_tree);
  const LossValue ed = edge_loss(pred);
  const LossValue nc = normal_consistency_loss(pred);
  WhiteLoss out;
  out.chamfer = ch.value;
  out.edge = ed.value;
  out.nc = nc.value;
  out.total = ch.value + cfg.w_edge * ed.value + cfg.w_nc * nc.value;
  out.grad = ch.grad + cfg.w_edge * ed.grad + cfg.w_nc * nc.grad;
  return out;
}

PialContext PialContext::make(const TriMesh& input_white,
                              const LossConfig& cfg) {
  PialContext ctx;
  ctx.input_white = input_white;
  ctx.white_normals = vertex_normals(input_white);
  ctx.inflated_target =
      inflate_surface(input_white, cfg.gamma, cfg.n_inflate_steps);
  return ctx;
}

PialLoss loss_pial(const TriMesh& pred, const TriMesh& target_cgm_boundary,
                   const PialContext& ctx, const LossConfig& cfg, int iter) {
  cfg.validate();
  PialLoss out;
  out.pretrain = iter < cfg.pretrain_iters;
  out.grad = MatX3::Zero(pred.num_vertices(), 3);

  if (out.pretrain) {
    const LossValue mse = mse_pretrain_loss(pred, ctx.inflated_target);
    out.mse = mse.value;
    out.total = mse.value;
    out.grad = mse.grad;
    if (!cfg.pretrain_smoothness) return out;
  } else {
    const LossValue bd = boundary_loss(pred, target_cgm_boundary);
    const LossValue infl =
        inflation_loss(pred, ctx.input_white, ctx.white_normals, cfg.epsilon);
    out.boundary = bd.value;
    out.inflation = infl.value;
    out.total = bd.value + cfg.w_inflation * infl.value;
    out.grad = bd.grad + cfg.w_inflation * infl.grad;
  }

  const LossValue ed = edge_loss(pred);
  const LossValue nc = normal_consistency_loss(pred);
  out.edge = ed.value;
  out.nc = nc.value;
  out.total += cfg.w_edge * ed.value + cfg.w_nc * nc.value;
  out.grad += cfg.w_edge * ed.grad + cfg.w_nc * nc.grad;
  return out;
}

}  // namespace coseg
