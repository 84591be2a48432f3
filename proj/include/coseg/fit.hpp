#pragma once

#include "coseg/deform.hpp"
#include "coseg/losses.hpp"
#include "coseg/metrics.hpp"
#include "coseg/volume.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace coseg {

enum class FitStage { white, pial };

/// Data term for the pial stage: the weakly supervised loss (boundary +
/// inflation) or plain bidirectional Chamfer (the ablation baseline).
enum class PialLossMode { weak, chamfer };

struct ModelConfig {
  int levels = 3;
  int svfs_per_level = 2;
  std::vector<int> downsample = {1, 2, 4};
  double step_clamp_vox = 1.0;  // per-step displacement cap, voxel units
};

struct FitConfig {
  FitStage stage = FitStage::white;
  int iters = 200;
  double lr = 1e-4;
  IntegratorConfig integrator{1.0, 50};
  LossConfig losses;
  ModelConfig model;
  PialLossMode pial_mode = PialLossMode::weak;
  double grad_clip = 1e3;  // global-norm clip, active outside pre-training
  std::uint64_t seed = 0;
  int threads = 1;
  Index report_samples = 20000;  // surface samples for the report metrics

  void validate() const;
};

struct IterRecord {
  int iter = 0;
  double total = 0.0;
  double data = 0.0;  // chamfer / boundary+inflation / mse, by phase
  double edge = 0.0;
  double nc = 0.0;
  double inflation = 0.0;
  bool pretrain = false;
  double grad_norm = 0.0;
  bool clipped = false;
};

struct FitReport {
  std::vector<IterRecord> trace;
  bool diverged = false;
  double assd_to_target_mm = -1.0;
  double hd90_to_target_mm = -1.0;
  int selfx_faces = -1;
  double selfx_rate = -1.0;
  double seconds = 0.0;  // wall clock; serialized separately from the
                         // deterministic outputs
};

struct FitResult {
  DeformModel model;
  TriMesh mesh;
  FitReport report;
};

GridDomain domain_of(const LabelVolume& vol);

/// Template segmentation -> smoothed SDF -> iso-surface at `level` ->
/// alternating smoothing/remeshing until the vertex count is within 5% of
/// target. Output is genus-0.
TriMesh build_initial_surface(const LabelVolume& seg, double sigma_mm,
                              double level, int target_vertices);

/// Segmentation boundary mesh: iso-surface of the signed distance at level 0
/// with Taubin smoothing against grid artifacts.
TriMesh extract_target_boundary(const LabelVolume& seg, int taubin_iters = 5);

/// Adam-optimizes the deformation of `init` toward the WM boundary under
/// the white-surface loss.
FitResult fit_white(const TriMesh& init, const TriMesh& wm_target,
                    const GridDomain& domain, const FitConfig& cfg);

/// Pial stage from the predicted white surface: MSE pre-training toward the
/// inflated white surface, then the weakly supervised (or Chamfer) loss.
/// Output connectivity equals the white input's.
FitResult fit_pial(const TriMesh& white_pred, const TriMesh& cgm_target,
                   const GridDomain& domain, const FitConfig& cfg);

/// Line-delimited per-iteration log (one JSON object per line).
void write_report_trace(const FitReport& report, const std::string& path);
/// Summary record (JSON). Deterministic: excludes wall-clock timings.
void write_report_summary(const FitReport& report, const std::string& path);
/// Wall-clock sidecar (not covered by the determinism guarantee).
void write_report_timings(const FitReport& report, const std::string& path);

}  // namespace coseg
