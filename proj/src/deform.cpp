#include "coseg/deform.hpp"

#include "coseg/parallel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace coseg {

Index DeformModel::num_parameters() const {
  Index n = attn.coeffs.size();
  for (const auto& g : grids) n += static_cast<Index>(g.data.size());
  return n;
}

DeformModel make_deform_model(const GridDomain& domain, int levels,
                              int svfs_per_level,
                              const std::vector<int>& downsample,
                              double step_clamp_mm) {
  if (levels < 1 || svfs_per_level < 1)
    throw Error(ErrorKind::argument, "model needs at least one velocity field");
  if (static_cast<int>(downsample.size()) != levels)
    throw Error(ErrorKind::argument, "one downsample factor per level required");

  DeformModel model;
  model.levels = levels;
  model.svfs_per_level = svfs_per_level;
  model.step_clamp_mm = step_clamp_mm;
  for (int r = 0; r < levels; ++r) {
    const int d = downsample[static_cast<std::size_t>(r)];
    if (d < 1) throw Error(ErrorKind::argument, "downsample factor must be >= 1");
    VelocityGrid g;
    for (int a = 0; a < 3; ++a) {
      const int n = domain.dims[a];
      // Nodes span the same extent as the volume's voxel centers.
      g.dims[a] = std::max(2, 1 + (n - 1 + d - 1) / d);
      g.spacing[a] = domain.spacing[a] * static_cast<double>(n - 1) /
                     static_cast<double>(g.dims[a] - 1);
    }
    g.origin = domain.origin;
    g.data.assign(static_cast<std::size_t>(g.num_nodes()) * 3, 0.0);
    for (int m = 0; m < svfs_per_level; ++m) model.grids.push_back(g);
  }
  model.attn.coeffs = MatX3::Zero(model.num_fields(), 3);
  return model;
}

VecX attention(const AttentionParams& params, double t) {
  const Index n = params.coeffs.rows();
  VecX logits(n);
  for (Index i = 0; i < n; ++i)
    logits[i] = params.coeffs(i, 0) + params.coeffs(i, 1) * t +
                params.coeffs(i, 2) * t * t;
  const double top = logits.maxCoeff();
  VecX p = (logits.array() - top).exp();
  p /= p.sum();
  return p;
}

namespace {

// Everything the forward and backward sweeps need from one trilinear probe.
struct GridSample {
  Index node[8];
  double w[8];
  Vec3 dw[8];  // dweight / dworld
  Vec3 value = Vec3::Zero();
  Eigen::Matrix3d jac = Eigen::Matrix3d::Zero();  // dvalue / dworld
};

GridSample sample_grid(const VelocityGrid& g, const Vec3& p) {
  int base[3];
  double f[3];
  bool clamped[3];
  for (int a = 0; a < 3; ++a) {
    const int n = g.dims[a];
    double u = (p[a] - g.origin[a]) / g.spacing[a];
    clamped[a] = false;
    if (u <= 0.0) {
      clamped[a] = u < 0.0;
      u = 0.0;
    } else if (u >= n - 1) {
      clamped[a] = u > n - 1;
      u = n - 1;
    }
    base[a] = std::min(static_cast<int>(u), n - 2);
    f[a] = u - base[a];
  }

  GridSample s;
  const Index sx = 1, sy = g.dims.x(), sz = static_cast<Index>(g.dims.x()) * g.dims.y();
  int c = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx, ++c) {
        s.node[c] = (base[0] + dx) * sx + (base[1] + dy) * sy + (base[2] + dz) * sz;
        const double wx = dx ? f[0] : 1.0 - f[0];
        const double wy = dy ? f[1] : 1.0 - f[1];
        const double wz = dz ? f[2] : 1.0 - f[2];
        s.w[c] = wx * wy * wz;
        Vec3 dw(dx ? wy * wz : -wy * wz, dy ? wx * wz : -wx * wz,
                dz ? wx * wy : -wx * wy);
        for (int a = 0; a < 3; ++a)
          dw[a] = clamped[a] ? 0.0 : dw[a] / g.spacing[a];
        s.dw[c] = dw;
        const Vec3 node_value(g.data[static_cast<std::size_t>(s.node[c]) * 3],
                              g.data[static_cast<std::size_t>(s.node[c]) * 3 + 1],
                              g.data[static_cast<std::size_t>(s.node[c]) * 3 + 2]);
        s.value += s.w[c] * node_value;
        s.jac += node_value * dw.transpose();
      }
  return s;
}

Vec3 grid_value_only(const VelocityGrid& g, const Vec3& p) {
  return sample_grid(g, p).value;
}

}  // namespace

Vec3 velocity(const DeformModel& model, const Vec3& x, double t) {
  const VecX p = attention(model.attn, t);
  Vec3 u = Vec3::Zero();
  for (int i = 0; i < model.num_fields(); ++i)
    u += p[i] * grid_value_only(model.grids[static_cast<std::size_t>(i)], x);
  return u;
}

FlowTrajectory integrate_trajectory(const DeformModel& model,
                                    const IntegratorConfig& cfg,
                                    const MatX3& x0, int threads) {
  const double h = cfg.step();
  const int nf = model.num_fields();
  FlowTrajectory traj;
  traj.positions.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  traj.positions.push_back(x0);
  const double clamp = model.step_clamp_mm;

  for (int k = 0; k < cfg.steps; ++k) {
    const double t = h * k;
    const VecX p = attention(model.attn, t);
    const MatX3& cur = traj.positions.back();
    MatX3 next(cur.rows(), 3);
    bool finite = true;
    parallel_for(cur.rows(), threads, [&](Index begin, Index end) {
      for (Index v = begin; v < end; ++v) {
        const Vec3 x = cur.row(v);
        Vec3 u = Vec3::Zero();
        for (int i = 0; i < nf; ++i)
          u += p[i] * grid_value_only(model.grids[static_cast<std::size_t>(i)], x);
        Vec3 s = h * u;
        if (clamp > 0.0) {
          const double len = s.norm();
          if (len > clamp) s *= clamp / len;
        }
        const Vec3 xn = x + s;
        if (!xn.allFinite()) finite = false;
        next.row(v) = xn.transpose();
      }
    });
    if (!finite) throw Error(ErrorKind::numerical, "divergent flow");
    traj.positions.push_back(std::move(next));
  }
  return traj;
}

TriMesh integrate(const DeformModel& model, const IntegratorConfig& cfg,
                  const TriMesh& mesh0, int threads) {
  TriMesh out = mesh0;
  if (mesh0.num_vertices() == 0) return out;
  FlowTrajectory traj = integrate_trajectory(model, cfg, mesh0.vertices, threads);
  out.vertices = std::move(traj.positions.back());
  return out;
}

ModelGrads ModelGrads::zeros_like(const DeformModel& model) {
  ModelGrads g;
  g.grids.reserve(model.grids.size());
  for (const auto& grid : model.grids)
    g.grids.emplace_back(grid.data.size(), 0.0);
  g.attn = MatX3::Zero(model.attn.coeffs.rows(), 3);
  return g;
}

double ModelGrads::squared_norm() const {
  double s = attn.squaredNorm();
  for (const auto& g : grids)
    for (const double v : g) s += v * v;
  return s;
}

ModelGrads flow_backward(const DeformModel& model, const IntegratorConfig& cfg,
                         const FlowTrajectory& traj, const MatX3& loss_grad) {
  const int K = cfg.steps;
  if (static_cast<int>(traj.positions.size()) != K + 1)
    throw Error(ErrorKind::contract, "trajectory length does not match steps");
  if (loss_grad.rows() != traj.positions.front().rows())
    throw Error(ErrorKind::contract, "loss gradient vertex count mismatch");

  const double h = cfg.step();
  const int nf = model.num_fields();
  ModelGrads grads = ModelGrads::zeros_like(model);
  MatX3 gbar = loss_grad;
  std::vector<GridSample> samples(static_cast<std::size_t>(nf));

  for (int k = K - 1; k >= 0; --k) {
    const double t = h * k;
    const VecX p = attention(model.attn, t);
    const MatX3& x = traj.positions[static_cast<std::size_t>(k)];
    MatX3 gprev(x.rows(), 3);
    VecX gp_total = VecX::Zero(nf);  // dL/dp_i accumulated over vertices

    for (Index v = 0; v < x.rows(); ++v) {
      const Vec3 xv = x.row(v);
      Vec3 u = Vec3::Zero();
      for (int i = 0; i < nf; ++i) {
        samples[static_cast<std::size_t>(i)] =
            sample_grid(model.grids[static_cast<std::size_t>(i)], xv);
        u += p[i] * samples[static_cast<std::size_t>(i)].value;
      }
      const Vec3 gb = gbar.row(v);

      // Backward through the optional per-step displacement clamp.
      Vec3 s = h * u;
      Vec3 gs = gb;
      if (model.step_clamp_mm > 0.0) {
        const double len = s.norm();
        if (len > model.step_clamp_mm) {
          const Vec3 sh = s / len;
          gs = (model.step_clamp_mm / len) * (gb - sh * sh.dot(gb));
        }
      }

      Eigen::Matrix3d jac = Eigen::Matrix3d::Zero();  // d(h*u)/dx
      for (int i = 0; i < nf; ++i) {
        const GridSample& gsamp = samples[static_cast<std::size_t>(i)];
        const double coef = h * p[i];
        auto& gdata = grads.grids[static_cast<std::size_t>(i)];
        for (int c = 0; c < 8; ++c) {
          const std::size_t off = static_cast<std::size_t>(gsamp.node[c]) * 3;
          const double wc = coef * gsamp.w[c];
          gdata[off] += wc * gs.x();
          gdata[off + 1] += wc * gs.y();
          gdata[off + 2] += wc * gs.z();
        }
        gp_total[i] += h * gs.dot(gsamp.value);
        jac += (h * p[i]) * gsamp.jac;
      }
      gprev.row(v) = (gb + jac.transpose() * gs).transpose();
    }

    // Softmax chain rule: dL/dlogit_j = p_j * (gp_j - sum_i p_i gp_i).
    const double mix = p.dot(gp_total);
    for (int j = 0; j < nf; ++j) {
      const double gl = p[j] * (gp_total[j] - mix);
      grads.attn(j, 0) += gl;
      grads.attn(j, 1) += gl * t;
      grads.attn(j, 2) += gl * t * t;
    }
    gbar = std::move(gprev);
  }
  return grads;
}

ModelGrads integrate_with_gradients(const DeformModel& model,
                                    const IntegratorConfig& cfg,
                                    const TriMesh& mesh0,
                                    const MatX3& loss_grad) {
  if (loss_grad.rows() != mesh0.num_vertices())
    throw Error(ErrorKind::contract, "loss gradient vertex count mismatch");
  const FlowTrajectory traj = integrate_trajectory(model, cfg, mesh0.vertices);
  return flow_backward(model, cfg, traj, loss_grad);
}

// ---- checkpoint -------------------------------------------------------

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void save_model(const DeformModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot open for write: " + path);
  os.write("COSG", 4);
  put_u32(os, 1);  // version
  put_u32(os, static_cast<std::uint32_t>(model.levels));
  put_u32(os, static_cast<std::uint32_t>(model.svfs_per_level));
  put_f64(os, model.step_clamp_mm);
  for (int r = 0; r < model.levels; ++r) {
    const auto& g = model.grids[static_cast<std::size_t>(r * model.svfs_per_level)];
    for (int a = 0; a < 3; ++a) put_u32(os, static_cast<std::uint32_t>(g.dims[a]));
    for (int a = 0; a < 3; ++a) put_f64(os, g.spacing[a]);
    for (int a = 0; a < 3; ++a) put_f64(os, g.origin[a]);
  }
  for (const auto& g : model.grids)
    for (const double v : g.data) put_f64(os, v);
  for (Index i = 0; i < model.attn.coeffs.rows(); ++i)
    for (int c = 0; c < 3; ++c) put_f64(os, model.attn.coeffs(i, c));
  if (!os) throw Error(ErrorKind::io, "write failed: " + path);
}

DeformModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "COSG", 4) != 0)
    throw Error(ErrorKind::io, "bad model magic");
  const std::uint32_t version = get_u32(is);
  if (version != 1) throw Error(ErrorKind::io, "unsupported model version");

  DeformModel model;
  model.levels = static_cast<int>(get_u32(is));
  model.svfs_per_level = static_cast<int>(get_u32(is));
  model.step_clamp_mm = get_f64(is);
  if (model.levels < 1 || model.svfs_per_level < 1 || model.levels > 64 ||
      model.svfs_per_level > 64)
    throw Error(ErrorKind::io, "implausible model header");

  std::vector<VelocityGrid> protos;
  for (int r = 0; r < model.levels; ++r) {
    VelocityGrid g;
    for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(get_u32(is));
    for (int a = 0; a < 3; ++a) g.spacing[a] = get_f64(is);
    for (int a = 0; a < 3; ++a) g.origin[a] = get_f64(is);
    if (g.dims.minCoeff() < 2) throw Error(ErrorKind::io, "bad grid dims");
    protos.push_back(std::move(g));
  }
  for (int r = 0; r < model.levels; ++r)
    for (int m = 0; m < model.svfs_per_level; ++m) {
      VelocityGrid g = protos[static_cast<std::size_t>(r)];
      g.data.resize(static_cast<std::size_t>(g.num_nodes()) * 3);
      for (auto& v : g.data) v = get_f64(is);
      model.grids.push_back(std::move(g));
    }
  model.attn.coeffs.resize(model.num_fields(), 3);
  for (Index i = 0; i < model.attn.coeffs.rows(); ++i)
    for (int c = 0; c < 3; ++c) model.attn.coeffs(i, c) = get_f64(is);
  if (!is) throw Error(ErrorKind::io, "truncated model file");
  return model;
}

}  // namespace coseg
