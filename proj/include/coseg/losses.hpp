#pragma once

#include "coseg/kdtree.hpp"
#include "coseg/mesh.hpp"
#include "coseg/types.hpp"

namespace coseg {

struct LossValue {
  double value = 0.0;
  MatX3 grad;  // d value / d pred vertices
};

struct LossConfig {
  double w_edge = 0.5;
  double w_nc = 5.0;
  double w_inflation = 2.0;
  double epsilon = 1e-12;
  double gamma = 0.1;
  int n_inflate_steps = 10;
  int pretrain_iters = 20;
  bool pretrain_smoothness = true;  // keep edge/nc terms during pre-training

  void validate() const;
};

/// Bidirectional vertex Chamfer: mean squared distance from pred vertices to
/// their nearest target vertex plus the reverse term. The gradient treats
/// nearest-neighbor assignments as fixed. Pass a prebuilt tree over the
/// target vertices to amortize repeated evaluations.
LossValue chamfer_bi(const TriMesh& pred, const TriMesh& target,
                     const VertexKdTree* target_tree = nullptr);

/// Single-directional term, 2 * mean over target vertices of the squared
/// distance to the nearest pred vertex. Pred vertices far from the target
/// never contribute.
LossValue boundary_loss(const TriMesh& pred, const TriMesh& target);

/// 1 - mean cosine between vertex displacement (pred - input) and the input
/// surface normals, with the displacement norm regularized by epsilon. At
/// exactly zero displacement the gradient takes the closed form
/// -n_i / (epsilon * |V|).
LossValue inflation_loss(const TriMesh& pred, const TriMesh& input_surf,
                         const MatX3& normals, double epsilon);

/// The closed-form inflation gradient at pred == input_surf.
MatX3 inflation_grad_at_identity(const TriMesh& input_surf,
                                 const MatX3& normals, double epsilon);

/// Mean squared edge length.
LossValue edge_loss(const TriMesh& mesh);

/// Mean (1 - cos dihedral) over interior edges; boundary edges are skipped.
LossValue normal_consistency_loss(const TriMesh& mesh);

/// Mean squared vertex displacement to a same-connectivity target.
LossValue mse_pretrain_loss(const TriMesh& pred, const TriMesh& inflated_target);

/// n_steps of: recompute vertex normals, move every vertex by gamma along
/// its normal.
TriMesh inflate_surface(const TriMesh& input_surf, double gamma, int n_steps);

struct WhiteLoss {
  double total = 0.0;
  double chamfer = 0.0;
  double edge = 0.0;
  double nc = 0.0;
  MatX3 grad;
};

/// chamfer + w_edge * edge + w_nc * nc.
WhiteLoss loss_white(const TriMesh& pred, const TriMesh& target,
                     const LossConfig& cfg,
                     const VertexKdTree* target_tree = nullptr);

/// Precomputed inputs for the pial stage that stay fixed across iterations.
struct PialContext {
  TriMesh input_white;
  MatX3 white_normals;
  TriMesh inflated_target;  // inflate_surface(input_white, gamma, n_steps)

  static PialContext make(const TriMesh& input_white, const LossConfig& cfg);
};

struct PialLoss {
  double total = 0.0;
  double boundary = 0.0;
  double inflation = 0.0;
  double mse = 0.0;
  double edge = 0.0;
  double nc = 0.0;
  bool pretrain = false;
  MatX3 grad;
};

/// boundary + w_inflation * inflation (+ smoothness); during the first
/// pretrain_iters iterations the data term is replaced by the MSE against
/// the inflated white surface.
PialLoss loss_pial(const TriMesh& pred, const TriMesh& target_cgm_boundary,
                   const PialContext& ctx, const LossConfig& cfg, int iter);

}  // namespace coseg
