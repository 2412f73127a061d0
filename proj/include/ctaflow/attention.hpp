#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctaflow {

/// Which conditioning inputs reach the attention network.
/// TVF zeroes the condition, CVF zeroes time, SVF zeroes both.
enum class FlowMode : std::uint32_t { kCTVF = 0, kTVF = 1, kCVF = 2, kSVF = 3 };

std::string_view to_string(FlowMode mode);
/// Case-insensitive; throws InputError for unknown names.
FlowMode parse_flow_mode(std::string_view name);

/// Linear map of a raw condition (weeks-equivalent) from [min, max] onto [-1, 1].
struct ConditionRange {
  double min = 27.0;
  double max = 45.0;

  double normalize(double a) const { return 2.0 * (a - min) / (max - min) - 1.0; }
  friend bool operator==(const ConditionRange&, const ConditionRange&) = default;
};

struct Conditioning {
  double t = 0.0;  ///< integration time in [0, T]
  double a = 0.0;  ///< raw condition value
  /// Further raw inputs for networks built with more than two inputs; missing entries read as 0.
  std::vector<double> extra;
};

struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weight;  // outputs x inputs, row-major
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct AttentionConfig {
  int levels = 3;
  int channels = 4;
  int inputs = 2;
  std::vector<int> hidden{64, 64};
  FlowMode mode = FlowMode::kCTVF;
  ConditionRange range{};
};

/// Fully connected map (t, a) -> R*M logits with tanh hidden layers, followed
/// by a softmax over all R*M entries.
class AttentionNet {
 public:
  /// Intermediate values of one forward pass, kept for the backward pass.
  struct Trace {
    std::vector<std::vector<double>> inputs;  // input of each layer
    std::vector<double> probabilities;
  };

  AttentionNet() = default;
  /// All weights zero: a uniform attention map.
  explicit AttentionNet(const AttentionConfig& config);
  /// Xavier-uniform hidden layers and a near-zero output layer, so the initial map is near uniform.
  static AttentionNet initialized(const AttentionConfig& config, std::uint64_t seed);

  int levels() const noexcept { return levels_; }
  int channels() const noexcept { return channels_; }
  int inputs() const noexcept { return layers_.empty() ? 0 : layers_.front().inputs; }
  std::size_t map_size() const noexcept { return static_cast<std::size_t>(levels_) * channels_; }

  FlowMode mode() const noexcept { return mode_; }
  void set_mode(FlowMode mode) noexcept { mode_ = mode; }
  const ConditionRange& range() const noexcept { return range_; }
  void set_range(const ConditionRange& range) { range_ = range; }

  std::span<DenseLayer> layers() noexcept { return layers_; }
  std::span<const DenseLayer> layers() const noexcept { return layers_; }
  std::vector<int> hidden_widths() const;

  std::size_t scalar_count() const noexcept;
  AttentionNet zeros_like() const;

  /// Network input after mode masking and condition normalization.
  std::vector<double> network_input(const Conditioning& c) const;

  /// Softmax attention, row-major (level, channel). Fills `trace` when given.
  std::vector<double> forward(const Conditioning& c, Trace* trace = nullptr) const;

  /// Accumulates d(loss)/d(parameters) into `grad` (same shape as this net)
  /// given d(loss)/d(probabilities) for a recorded forward pass.
  void backward(const Trace& trace, std::span<const double> dprob, AttentionNet& grad) const;

  /// Throws NumericError naming the first layer holding a non-finite value.
  void check_finite() const;

  friend bool operator==(const AttentionNet&, const AttentionNet&) = default;

 private:
  int levels_ = 0;
  int channels_ = 0;
  FlowMode mode_ = FlowMode::kCTVF;
  ConditionRange range_{};
  std::vector<DenseLayer> layers_;
};

/// R x M attention map p(t, a), row-major (level, channel); entries sum to 1.
std::vector<double> attention_map(const AttentionNet& net, const Conditioning& c);

/// Per-level importance p^r = sum over channels of p^{r,m}.
std::vector<double> aggregate_by_level(std::span<const double> p, int levels, int channels);

}  // namespace ctaflow
