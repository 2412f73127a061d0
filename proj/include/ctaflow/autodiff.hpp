#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctaflow/flow.hpp"

namespace ctaflow {

/// Everything the reverse pass needs from one unrolled Euler integration:
/// the K+1 point states and the K attention forward traces.
struct FlowTape {
  double a = 0.0;
  double t0 = 0.0;
  double h = 0.0;
  std::vector<std::vector<Vec3>> states;
  std::vector<AttentionNet::Trace> attention;

  int steps() const noexcept { return static_cast<int>(attention.size()); }
  bool recorded() const noexcept { return !attention.empty() && states.size() == attention.size() + 1; }
  const std::vector<Vec3>& final_state() const { return states.back(); }
};

/// Same arithmetic as integrate_points, recording the tape.
std::vector<Vec3> integrate_recorded(std::span<const Vec3> points, const FlowModel& model, double a,
                                     const FlowConfig& config, FlowTape& tape);

struct BackwardOptions {
  /// When set, receives dL/dx_k for k = 0..K (index K is the seed gradient).
  std::vector<std::vector<Vec3>>* adjoints = nullptr;
};

/// Reverse-mode pass through the recorded integration. `grad_final` is
/// dL/dx_K; parameter gradients are accumulated into `grad`, which must be
/// shaped like `model` (see FlowModel::zeros_like). Returns dL/dx_0.
/// Throws StateError without a recorded tape and NumericError naming the
/// parameter block when a gradient is not finite.
std::vector<Vec3> backward(const FlowTape& tape, const FlowModel& model, std::span<const Vec3> grad_final,
                           FlowModel& grad, const BackwardOptions& options = {});

struct ParameterBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Flat view of every learnable scalar of a FlowModel: all grid values
/// (grid by grid, node by node, xyz) followed by every attention layer
/// (weights then biases).
struct ParameterSet {
  std::vector<double> values;
  std::vector<double> gradient;
  std::vector<ParameterBlock> blocks;

  static ParameterSet from_model(const FlowModel& model);
  static std::vector<ParameterBlock> layout(const FlowModel& model);
  static std::vector<double> pack(const FlowModel& model);
  /// Throws SizeError when `flat` does not match the model's shape.
  static void unpack(std::span<const double> flat, FlowModel& model);

  void store_into(FlowModel& model) const { unpack(values, model); }
  void load_gradient(const FlowModel& grad);
  void zero_gradient();
  /// Block containing the flat index.
  const ParameterBlock& block_of(std::size_t index) const;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update. Moments are created on the first call;
/// throws StateError when the shapes disagree.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& config);

/// Rescales `grads` so the global L2 norm is at most `max_norm`; returns the norm before clipping.
double clip_global_norm(std::span<double> grads, double max_norm);

}  // namespace ctaflow
