#pragma once

#include "coseg/mesh.hpp"
#include "coseg/types.hpp"

#include <string>
#include <vector>

namespace coseg {

/// World-space extent shared by all velocity grids of a model, normally
/// taken from the segmentation volume.
struct GridDomain {
  Vec3i dims;
  Vec3 spacing;
  Vec3 origin;
};

/// Stationary 3-vector field on a regular grid (mm per unit time), sampled
/// trilinearly with boundary clamping. Node data is xyz-interleaved,
/// x-fastest.
struct VelocityGrid {
  Vec3i dims;
  Vec3 spacing;
  Vec3 origin;
  std::vector<double> data;

  Index num_nodes() const {
    return static_cast<Index>(dims.x()) * dims.y() * dims.z();
  }
};

/// Per-field logit as a quadratic polynomial of t, softmaxed across fields:
/// logit_i(t) = coeffs(i,0) + coeffs(i,1)*t + coeffs(i,2)*t^2.
struct AttentionParams {
  MatX3 coeffs;
};

/// Multi-resolution velocity-field model: `levels` grid resolutions with
/// `svfs_per_level` stationary fields each, blended over time by the
/// attention weights into one time-varying field.
struct DeformModel {
  int levels = 0;
  int svfs_per_level = 0;
  std::vector<VelocityGrid> grids;  // level-major, levels * svfs_per_level
  AttentionParams attn;
  double step_clamp_mm = 0.0;  // max displacement per Euler step; <=0 = off

  int num_fields() const { return levels * svfs_per_level; }
  Index num_parameters() const;
};

/// Zero-initialized model (identity deformation) whose grids cover the
/// domain at the given per-level downsampling factors.
DeformModel make_deform_model(const GridDomain& domain, int levels,
                              int svfs_per_level,
                              const std::vector<int>& downsample,
                              double step_clamp_mm = 0.0);

/// Simplex weights p(t): nonnegative, summing to one.
VecX attention(const AttentionParams& params, double t);

/// u(x,t) = sum_i p_i(t) * u_i(x), u_i the trilinear sample of grid i.
Vec3 velocity(const DeformModel& model, const Vec3& x, double t);

struct IntegratorConfig {
  double total_time = 1.0;
  int steps = 50;

  IntegratorConfig() = default;
  IntegratorConfig(double T, int K) : total_time(T), steps(K) {
    if (K < 1) throw Error(ErrorKind::argument, "integrator: steps must be >= 1");
    if (!(T > 0.0))
      throw Error(ErrorKind::argument, "integrator: total time must be > 0");
  }
  double step() const { return total_time / steps; }
};

/// Forward Euler trajectory: positions[k] holds all points after k steps
/// (positions[0] is the input), so positions.size() == steps + 1.
struct FlowTrajectory {
  std::vector<MatX3> positions;
};

FlowTrajectory integrate_trajectory(const DeformModel& model,
                                    const IntegratorConfig& cfg,
                                    const MatX3& x0, int threads = 1);

/// Flows every vertex through the model; connectivity is untouched.
/// Throws "divergent flow" if a position stops being finite.
TriMesh integrate(const DeformModel& model, const IntegratorConfig& cfg,
                  const TriMesh& mesh0, int threads = 1);

/// Gradient buffers shaped like the model parameters.
struct ModelGrads {
  std::vector<std::vector<double>> grids;
  MatX3 attn;

  static ModelGrads zeros_like(const DeformModel& model);
  double squared_norm() const;
};

/// Reverse-mode sweep over a stored trajectory: exact gradients of
/// sum_v loss_grad[v] . x_K[v] with respect to every grid value and
/// attention coefficient.
ModelGrads flow_backward(const DeformModel& model, const IntegratorConfig& cfg,
                         const FlowTrajectory& traj, const MatX3& loss_grad);

/// Forward + backward in one call.
ModelGrads integrate_with_gradients(const DeformModel& model,
                                    const IntegratorConfig& cfg,
                                    const TriMesh& mesh0,
                                    const MatX3& loss_grad);

/// Binary checkpoint ("COSG" magic, little-endian).
void save_model(const DeformModel& model, const std::string& path);
DeformModel load_model(const std::string& path);

}  // namespace coseg
