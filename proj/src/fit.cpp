#include "coseg/fit.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>

namespace coseg {

void FitConfig::validate() const {
  if (iters < 1) throw Error(ErrorKind::argument, "iters must be >= 1");
  if (!(lr > 0.0)) throw Error(ErrorKind::argument, "lr must be > 0");
  if (threads < 1) throw Error(ErrorKind::argument, "threads must be >= 1");
  losses.validate();
}

GridDomain domain_of(const LabelVolume& vol) {
  return {vol.dims(), vol.spacing(), vol.origin()};
}

TriMesh build_initial_surface(const LabelVolume& seg, double sigma_mm,
                              double level, int target_vertices) {
  if (target_vertices < 100)
    throw Error(ErrorKind::argument, "target_vertices too small");
  const RealVolume sdf = distance_transform(seg);
  const RealVolume smooth = gaussian_smooth(sdf, sigma_mm);

  double lo = smooth.data()[0];
  for (const double v : smooth.data()) lo = std::min(lo, v);
  if (lo >= level)
    throw Error(ErrorKind::degenerate_input,
                "template too thin for chosen level");

  TriMesh mesh = marching_cubes(smooth, level);

  const double tol = 0.05;
  for (int round = 0; round < 30; ++round) {
    const auto count = static_cast<double>(mesh.num_vertices());
    if (std::abs(count - target_vertices) <= tol * target_vertices) break;
    // Edge length that an equilateral tiling of the current area would need
    // to land on the requested vertex count.
    const double area = surface_area(mesh);
    const double target_faces = 2.0 * target_vertices - 4.0;
    const double edge =
        std::sqrt(4.0 * area / (std::sqrt(3.0) * target_faces));
    mesh = laplacian_smooth(mesh, 2, 0.5);
    mesh = isotropic_remesh(mesh, edge, 3);
  }
  const auto count = static_cast<double>(mesh.num_vertices());
  if (std::abs(count - target_vertices) > tol * target_vertices)
    throw Error(ErrorKind::numerical,
                "remeshing did not reach the target vertex count");
  if (euler_characteristic(mesh) != 2)
    throw Error(ErrorKind::degenerate_input,
                "initial surface is not genus-0");
  return mesh;
}

TriMesh extract_target_boundary(const LabelVolume& seg, int taubin_iters) {
  const RealVolume sdf = distance_transform(seg);
  TriMesh mesh = marching_cubes(sdf, 0.0);
  return taubin_smooth(mesh, taubin_iters);
}

namespace {

// Adam over the flattened model parameters (grid values then attention).
class Adam {
 public:
  Adam(const DeformModel& model, double lr)
      : lr_(lr),
        m_(ModelGrads::zeros_like(model)),
        v_(ModelGrads::zeros_like(model)) {}

  void step(DeformModel& model, const ModelGrads& g) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t gi = 0; gi < model.grids.size(); ++gi) {
      auto& data = model.grids[gi].data;
      const auto& grad = g.grids[gi];
      auto& m = m_.grids[gi];
      auto& v = v_.grids[gi];
      for (std::size_t p = 0; p < data.size(); ++p) {
        m[p] = beta1_ * m[p] + (1.0 - beta1_) * grad[p];
        v[p] = beta2_ * v[p] + (1.0 - beta2_) * grad[p] * grad[p];
        data[p] -= lr_ * (m[p] / bc1) / (std::sqrt(v[p] / bc2) + eps_);
      }
    }
    for (Index i = 0; i < model.attn.coeffs.rows(); ++i)
      for (int c = 0; c < 3; ++c) {
        double& m = m_.attn(i, c);
        double& v = v_.attn(i, c);
        const double grad = g.attn(i, c);
        m = beta1_ * m + (1.0 - beta1_) * grad;
        v = beta2_ * v + (1.0 - beta2_) * grad * grad;
        model.attn.coeffs(i, c) -= lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_);
      }
  }

 private:
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  ModelGrads m_, v_;
  int t_ = 0;
};

struct LossEval {
  double total = 0.0;
  double data = 0.0;
  double edge = 0.0;
  double nc = 0.0;
  double inflation = 0.0;
  bool pretrain = false;
  MatX3 grad;
};

FitResult run_fit(const TriMesh& mesh0, const GridDomain& domain,
                  const FitConfig& cfg,
                  const std::function<LossEval(const TriMesh&, int)>& evaluate,
                  const TriMesh& target_for_metrics) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();

  FitResult result;
  const double clamp_mm =
      cfg.model.step_clamp_vox > 0.0
          ? cfg.model.step_clamp_vox * domain.spacing.minCoeff()
          : 0.0;
  result.model = make_deform_model(domain, cfg.model.levels,
                                   cfg.model.svfs_per_level,
                                   cfg.model.downsample, clamp_mm);
  Adam opt(result.model, cfg.lr);
  result.mesh = mesh0;

  for (int iter = 0; iter < cfg.iters; ++iter) {
    FlowTrajectory traj;
    try {
      traj = integrate_trajectory(result.model, cfg.integrator, mesh0.vertices,
                                  cfg.threads);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::numerical) throw;
      result.report.diverged = true;
      break;
    }
    TriMesh pred = mesh0;
    pred.vertices = traj.positions.back();

    LossEval eval = evaluate(pred, iter);
    if (!std::isfinite(eval.total)) {
      result.report.diverged = true;
      break;
    }

    ModelGrads grads =
        flow_backward(result.model, cfg.integrator, traj, eval.grad);

    IterRecord rec;
    rec.iter = iter;
    rec.total = eval.total;
    rec.data = eval.data;
    rec.edge = eval.edge;
    rec.nc = eval.nc;
    rec.inflation = eval.inflation;
    rec.pretrain = eval.pretrain;
    rec.grad_norm = std::sqrt(grads.squared_norm());
    if (!eval.pretrain && cfg.grad_clip > 0.0 && rec.grad_norm > cfg.grad_clip) {
      const double scale = cfg.grad_clip / rec.grad_norm;
      for (auto& g : grads.grids)
        for (auto& v : g) v *= scale;
      grads.attn *= scale;
      rec.clipped = true;
    }
    result.report.trace.push_back(rec);

    opt.step(result.model, grads);
  }

  if (!result.report.diverged) {
    result.mesh =
        integrate(result.model, cfg.integrator, mesh0, cfg.threads);
    result.report.selfx_faces = count_self_intersections(result.mesh);
    result.report.selfx_rate =
        static_cast<double>(result.report.selfx_faces) /
        static_cast<double>(result.mesh.num_faces());
    if (cfg.report_samples > 0) {
      result.report.assd_to_target_mm =
          assd(result.mesh, target_for_metrics, cfg.report_samples, cfg.seed);
      result.report.hd90_to_target_mm =
          hd90(result.mesh, target_for_metrics, cfg.report_samples, cfg.seed);
    }
  }
  result.report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return result;
}

}  // namespace

FitResult fit_white(const TriMesh& init, const TriMesh& wm_target,
                    const GridDomain& domain, const FitConfig& cfg) {
  if (!is_watertight(init))
    throw Error(ErrorKind::contract, "initial surface must be watertight");
  const VertexKdTree target_tree(wm_target.vertices);
  auto evaluate = [&](const TriMesh& pred, int) {
    const WhiteLoss wl = loss_white(pred, wm_target, cfg.losses, &target_tree);
    LossEval e;
    e.total = wl.total;
    e.data = wl.chamfer;
    e.edge = wl.edge;
    e.nc = wl.nc;
    e.grad = wl.grad;
    return e;
  };
  return run_fit(init, domain, cfg, evaluate, wm_target);
}

FitResult fit_pial(const TriMesh& white_pred, const TriMesh& cgm_target,
                   const GridDomain& domain, const FitConfig& cfg) {
  if (!is_watertight(white_pred))
    throw Error(ErrorKind::contract, "white surface must be watertight");
  const PialContext ctx = PialContext::make(white_pred, cfg.losses);
  const VertexKdTree target_tree(cgm_target.vertices);

  auto evaluate = [&](const TriMesh& pred, int iter) {
    LossEval e;
    if (cfg.pial_mode == PialLossMode::weak ||
        iter < cfg.losses.pretrain_iters) {
      const PialLoss pl = loss_pial(pred, cgm_target, ctx, cfg.losses, iter);
      e.total = pl.total;
      e.data = pl.pretrain ? pl.mse : pl.boundary;
      e.edge = pl.edge;
      e.nc = pl.nc;
      e.inflation = pl.inflation;
      e.pretrain = pl.pretrain;
      e.grad = pl.grad;
    } else {
      const LossValue ch = chamfer_bi(pred, cgm_target, &target_tree);
      const LossValue ed = edge_loss(pred);
      const LossValue nc = normal_consistency_loss(pred);
      e.total = ch.value + cfg.losses.w_edge * ed.value + cfg.losses.w_nc * nc.value;
      e.data = ch.value;
      e.edge = ed.value;
      e.nc = nc.value;
      e.grad = ch.grad + cfg.losses.w_edge * ed.grad + cfg.losses.w_nc * nc.grad;
    }
    return e;
  };
  return run_fit(white_pred, domain, cfg, evaluate, cgm_target);
}

// ---- report serialization --------------------------------------------

namespace {

using json = nlohmann::json;

json record_json(const IterRecord& r) {
  json j;
  j["iter"] = r.iter;
  j["total"] = r.total;
  j["data"] = r.data;
  j["edge"] = r.edge;
  j["nc"] = r.nc;
  j["inflation"] = r.inflation;
  j["pretrain"] = r.pretrain;
  j["grad_norm"] = r.grad_norm;
  j["clipped"] = r.clipped;
  return j;
}

}  // namespace

void write_report_trace(const FitReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot open for write: " + path);
  for (const auto& rec : report.trace) os << record_json(rec).dump() << "\n";
  if (!os) throw Error(ErrorKind::io, "write failed: " + path);
}

void write_report_summary(const FitReport& report, const std::string& path) {
  json j;
  j["iterations"] = report.trace.size();
  j["diverged"] = report.diverged;
  if (!report.trace.empty()) {
    j["initial_total"] = report.trace.front().total;
    j["final_total"] = report.trace.back().total;
    j["final"] = record_json(report.trace.back());
  }
  j["assd_to_target_mm"] = report.assd_to_target_mm;
  j["hd90_to_target_mm"] = report.hd90_to_target_mm;
  j["selfx_faces"] = report.selfx_faces;
  j["selfx_rate"] = report.selfx_rate;
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot open for write: " + path);
  os << j.dump(2) << "\n";
  if (!os) throw Error(ErrorKind::io, "write failed: " + path);
}

void write_report_timings(const FitReport& report, const std::string& path) {
  json j;
  j["seconds"] = report.seconds;
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot open for write: " + path);
  os << j.dump(2) << "\n";
}

}  // namespace coseg
