#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctaflow/autodiff.hpp"
#include "ctaflow/container.hpp"
#include "ctaflow/losses.hpp"

namespace ctaflow {

enum class LossKind { kChamfer, kMse };
std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct FitStage {
  std::string name;
  int epochs = 30;
  double learning_rate = 1e-4;
  LossWeights weights{};
  LossKind loss = LossKind::kChamfer;
  /// Points sampled per surface for the Chamfer term; 0 compares vertices.
  std::size_t samples = 0;
};

struct FitSchedule {
  std::vector<FitStage> stages;

  /// Throws SpecError for an empty schedule, non-positive epochs or learning rates.
  void validate() const;

  /// Vertex-Chamfer pre-training with strong regularization, then sampled-point
  /// fine-tuning with weak regularization and a 5x smaller learning rate.
  static FitSchedule two_stage(int pretrain_epochs = 30, int finetune_epochs = 30, std::size_t finetune_samples = 4096);
  /// A single correspondence (MSE) stage for surfaces that share connectivity with their input.
  static FitSchedule correspondence(int epochs = 60, double learning_rate = 1e-4);
};

struct ModelConfig {
  int levels = 3;
  int channels = 4;
  GridDims finest{32, 32, 32};
  std::vector<int> hidden{64, 64};
  FlowMode mode = FlowMode::kCTVF;
  ConditionRange range{};
};

/// Zero velocity grids (identity flow) and a freshly initialized attention network.
FlowModel make_model(const ModelConfig& config, std::uint64_t seed);

struct FitItem {
  double a = 0.0;
  TriangleMesh target;
  /// Surface to deform; the template is used when absent.
  std::optional<TriangleMesh> source;
};

struct FitOptions {
  FlowConfig flow{};
  std::uint64_t seed = 0;
  int workers = 1;
  double clip_norm = 10.0;
  std::size_t batch_size = 1;
  /// Learning-rate multiplier for the velocity-grid values; the attention
  /// network always uses the stage learning rate.
  double grid_lr_scale = 1.0;
};

struct FitState {
  FlowModel model;
  AdamState adam;
  int stage = 0;           ///< stage being executed
  int epoch_in_stage = 0;  ///< epochs already completed in that stage
  int epochs_done = 0;     ///< epochs completed across all stages
};

struct LogRow {
  int stage = 0;
  std::string stage_name;
  int epoch = 0;  ///< 1-based global epoch
  std::uint64_t step = 0;
  double total = 0.0;
  double chamfer = 0.0;
  double laplacian = 0.0;
  double normal = 0.0;
  double mse = 0.0;
  double grad_norm = 0.0;
  double lambda_lap = 0.0;
  double lambda_nc = 0.0;
  double learning_rate = 0.0;
};

struct FitResult {
  FitState state;
  std::vector<LogRow> log;
  bool diverged = false;
  std::string message;
};

using EpochCallback = std::function<void(const FitState&, const LogRow&)>;

/// Runs the schedule's stages in order, one Adam step per batch of items, and
/// logs the per-epoch mean loss terms. Deterministic for a fixed seed. When a
/// loss or gradient turns non-finite the fit stops and returns the state at
/// the start of the failing epoch with `diverged` set. A resumed fit picks up
/// after `resume->epochs_done` epochs of this schedule.
FitResult fit(const std::vector<FitItem>& data, const TriangleMesh& template_mesh, const FitSchedule& schedule,
              const ModelConfig& model_config, const FitOptions& options, std::optional<FitState> resume = {},
              const EpochCallback& on_epoch = {});

/// Loss of one deformed surface and its gradient with respect to the deformed vertices.
struct ItemLoss {
  LossBreakdown terms;
  double mse = 0.0;
  double total = 0.0;
  std::vector<Vec3> grad;
};

ItemLoss item_loss(const TriangleMesh& pred, const TriangleMesh& target, const FitStage& stage,
                   std::uint64_t sample_seed);

/// Mean over items of the sampled Chamfer distance between deformed template and target.
double mean_sampled_chamfer(const FlowModel& model, const std::vector<FitItem>& data, const TriangleMesh& template_mesh,
                            const FlowConfig& flow, std::size_t samples, std::uint64_t seed);

// Checkpoint: the CTVF container at `path` (float32), its JSON sidecar, and
// `<path>.opt` holding the exact float64 parameters, Adam moments and the
// schedule position.
void save_checkpoint(const std::filesystem::path& path, const FitState& state,
                     const nlohmann::json& extra = nlohmann::json::object());
FitState load_checkpoint(const std::filesystem::path& path);
std::filesystem::path optimizer_path(const std::filesystem::path& path);

void write_log_csv(const std::filesystem::path& path, const std::vector<LogRow>& rows, bool append = false);

}  // namespace ctaflow
