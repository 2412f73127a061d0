#include "ctaflow/attention.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "ctaflow/errors.hpp"
#include "ctaflow/random.hpp"

namespace ctaflow {

std::string_view to_string(FlowMode mode) {
  switch (mode) {
    case FlowMode::kCTVF: return "ctvf";
    case FlowMode::kTVF: return "tvf";
    case FlowMode::kCVF: return "cvf";
    case FlowMode::kSVF: return "svf";
  }
  return "unknown";
}

FlowMode parse_flow_mode(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "ctvf") return FlowMode::kCTVF;
  if (lower == "tvf") return FlowMode::kTVF;
  if (lower == "cvf") return FlowMode::kCVF;
  if (lower == "svf") return FlowMode::kSVF;
  throw InputError("unknown flow mode '" + std::string(name) + "' (expected ctvf, tvf, cvf or svf)");
}

AttentionNet::AttentionNet(const AttentionConfig& config)
    : levels_(config.levels), channels_(config.channels), mode_(config.mode), range_(config.range) {
  if (config.levels < 1 || config.channels < 1) throw SizeError("attention map needs R >= 1 and M >= 1");
  if (config.inputs < 2) throw SizeError("attention network needs at least the (t, a) inputs");
  if (!(config.range.max > config.range.min)) throw InputError("condition range must satisfy min < max");
  int width = config.inputs;
  std::vector<int> widths = config.hidden;
  widths.push_back(config.levels * config.channels);
  for (int out : widths) {
    if (out < 1) throw SizeError("attention layer widths must be positive");
    DenseLayer layer;
    layer.inputs = width;
    layer.outputs = out;
    layer.weight.assign(static_cast<std::size_t>(out) * width, 0.0);
    layer.bias.assign(static_cast<std::size_t>(out), 0.0);
    layers_.push_back(std::move(layer));
    width = out;
  }
}

AttentionNet AttentionNet::initialized(const AttentionConfig& config, std::uint64_t seed) {
  AttentionNet net(config);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    DenseLayer& layer = net.layers_[l];
    double bound = std::sqrt(6.0 / (layer.inputs + layer.outputs));
    if (l + 1 == net.layers_.size()) bound *= 1e-2;
    for (double& w : layer.weight) w = uniform(rng, -bound, bound);
  }
  return net;
}

std::vector<int> AttentionNet::hidden_widths() const {
  std::vector<int> out;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) out.push_back(layers_[l].outputs);
  return out;
}

std::size_t AttentionNet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const DenseLayer& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

AttentionNet AttentionNet::zeros_like() const {
  AttentionNet out = *this;
  for (DenseLayer& l : out.layers_) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  return out;
}

std::vector<double> AttentionNet::network_input(const Conditioning& c) const {
  std::vector<double> x(static_cast<std::size_t>(inputs()), 0.0);
  const bool use_time = mode_ == FlowMode::kCTVF || mode_ == FlowMode::kTVF;
  const bool use_condition = mode_ == FlowMode::kCTVF || mode_ == FlowMode::kCVF;
  x[0] = use_time ? c.t : 0.0;
  x[1] = use_condition ? range_.normalize(c.a) : 0.0;
  for (std::size_t i = 2; i < x.size(); ++i) {
    const std::size_t e = i - 2;
    x[i] = (use_condition && e < c.extra.size()) ? c.extra[e] : 0.0;
  }
  return x;
}

void AttentionNet::check_finite() const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    auto bad = [](double v) { return !std::isfinite(v); };
    if (std::any_of(layer.weight.begin(), layer.weight.end(), bad) ||
        std::any_of(layer.bias.begin(), layer.bias.end(), bad)) {
      throw NumericError("attention layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

std::vector<double> AttentionNet::forward(const Conditioning& c, Trace* trace) const {
  if (layers_.empty()) throw StateError("attention network has no layers");
  if (!std::isfinite(c.t) || !std::isfinite(c.a)) throw InputError("attention conditioning must be finite");
  check_finite();

  std::vector<double> x = network_input(c);
  if (trace) trace->inputs.clear();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (trace) trace->inputs.push_back(x);
    std::vector<double> y(layer.bias);
    for (int o = 0; o < layer.outputs; ++o) {
      const double* row = layer.weight.data() + static_cast<std::size_t>(o) * layer.inputs;
      double acc = 0.0;
      for (int i = 0; i < layer.inputs; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] += acc;
    }
    if (l + 1 < layers_.size()) {
      for (double& v : y) v = std::tanh(v);
    }
    x = std::move(y);
  }

  const double peak = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (double& v : x) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : x) v /= total;
  if (trace) trace->probabilities = x;
  return x;
}

void AttentionNet::backward(const Trace& trace, std::span<const double> dprob, AttentionNet& grad) const {
  if (trace.inputs.size() != layers_.size() || trace.probabilities.size() != map_size()) {
    throw StateError("attention backward called without a matching forward trace");
  }
  if (dprob.size() != map_size()) throw SizeError("attention gradient has the wrong size");

  const auto& p = trace.probabilities;
  double inner = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) inner += p[j] * dprob[j];
  std::vector<double> dy(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) dy[j] = p[j] * (dprob[j] - inner);

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const DenseLayer& layer = layers_[l];
    DenseLayer& g = grad.layers_[l];
    const std::vector<double>& x = trace.inputs[l];
    std::vector<double> dx(static_cast<std::size_t>(layer.inputs), 0.0);
    for (int o = 0; o < layer.outputs; ++o) {
      const double d = dy[static_cast<std::size_t>(o)];
      g.bias[static_cast<std::size_t>(o)] += d;
      const std::size_t row = static_cast<std::size_t>(o) * layer.inputs;
      for (int i = 0; i < layer.inputs; ++i) {
        g.weight[row + i] += d * x[static_cast<std::size_t>(i)];
        dx[static_cast<std::size_t>(i)] += d * layer.weight[row + i];
      }
    }
    if (l == 0) break;
    // x is the tanh output of the previous layer.
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 1.0 - x[i] * x[i];
    dy = std::move(dx);
  }
}

std::vector<double> attention_map(const AttentionNet& net, const Conditioning& c) { return net.forward(c); }

std::vector<double> aggregate_by_level(std::span<const double> p, int levels, int channels) {
  if (p.size() != static_cast<std::size_t>(levels) * static_cast<std::size_t>(channels)) {
    throw SizeError("attention map size does not match R x M");
  }
  std::vector<double> out(static_cast<std::size_t>(levels), 0.0);
  for (int r = 0; r < levels; ++r) {
    for (int m = 0; m < channels; ++m) out[static_cast<std::size_t>(r)] += p[static_cast<std::size_t>(r) * channels + m];
  }
  return out;
}

}  // namespace ctaflow
