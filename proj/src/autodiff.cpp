#include "ctaflow/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctaflow/detail/flow_kernels.hpp"
#include "ctaflow/errors.hpp"

namespace ctaflow {

std::vector<Vec3> integrate_recorded(std::span<const Vec3> points, const FlowModel& model, double a,
                                     const FlowConfig& config, FlowTape& tape) {
  config.validate();
  model.validate();
  const detail::PyramidView view(model.pyramid);
  tape = {};
  tape.a = a;
  tape.t0 = 0.0;
  tape.h = config.step_size();
  tape.states.reserve(static_cast<std::size_t>(config.steps) + 1);
  tape.attention.reserve(static_cast<std::size_t>(config.steps));
  tape.states.emplace_back(points.begin(), points.end());

  for (int k = 0; k < config.steps; ++k) {
    const double t = tape.t0 + k * tape.h;
    AttentionNet::Trace trace;
    const std::vector<double> p = model.net.forward({t, a, {}}, &trace);
    std::vector<Vec3> next = tape.states.back();
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] += detail::blended_velocity(view, p.data(), next[i]) * tape.h;
      if (!is_finite(next[i])) {
        throw IntegrationError("vertex " + std::to_string(i) + " became non-finite at step " + std::to_string(k), k, i);
      }
    }
    tape.attention.push_back(std::move(trace));
    tape.states.push_back(std::move(next));
  }
  return tape.states.back();
}

std::vector<Vec3> backward(const FlowTape& tape, const FlowModel& model, std::span<const Vec3> grad_final,
                           FlowModel& grad, const BackwardOptions& options) {
  if (!tape.recorded()) throw StateError("backward called without a recorded forward tape");
  model.validate();
  if (grad_final.size() != tape.final_state().size()) throw SizeError("final-state gradient has the wrong size");
  if (grad.pyramid.levels() != model.pyramid.levels() || grad.pyramid.channels() != model.pyramid.channels() ||
      grad.net.scalar_count() != model.net.scalar_count()) {
    throw SizeError("gradient buffer is not shaped like the model");
  }

  const detail::PyramidView view(model.pyramid);
  const int levels = model.pyramid.levels();
  const int channels = model.pyramid.channels();
  std::vector<Vec3*> grad_grids;
  for (VelocityGrid& g : grad.pyramid.grids()) grad_grids.push_back(g.values().data());

  std::vector<Vec3> g(grad_final.begin(), grad_final.end());
  if (options.adjoints) {
    options.adjoints->assign(static_cast<std::size_t>(tape.steps()) + 1, {});
    options.adjoints->back() = g;
  }
  const double h = tape.h;
  std::vector<double> dprob(model.net.map_size());

  for (int k = tape.steps() - 1; k >= 0; --k) {
    const std::vector<Vec3>& x = tape.states[static_cast<std::size_t>(k)];
    const std::vector<double>& p = tape.attention[static_cast<std::size_t>(k)].probabilities;
    std::fill(dprob.begin(), dprob.end(), 0.0);

    for (std::size_t i = 0; i < x.size(); ++i) {
      const Vec3 gi = g[i];
      Vec3 jtg;
      for (int r = 0; r < levels; ++r) {
        const TrilinearStencil s = trilinear_stencil(view.dims[static_cast<std::size_t>(r)], x[i]);
        for (int c = 0; c < 8; ++c) {
          const std::uint32_t node = s.index[c];
          const Vec3 weighted = gi * (h * s.weight[c]);
          double proj = 0.0;
          for (int m = 0; m < channels; ++m) {
            const std::size_t j = model.pyramid.flat(r, m);
            const double vg = dot(view.data[j][node], gi);
            dprob[j] += h * s.weight[c] * vg;
            proj += p[j] * vg;
            grad_grids[j][node] += weighted * p[j];
          }
          jtg += s.dweight[c] * proj;
        }
      }
      g[i] = gi + jtg * h;
    }

    model.net.backward(tape.attention[static_cast<std::size_t>(k)], dprob, grad.net);
    if (options.adjoints) (*options.adjoints)[static_cast<std::size_t>(k)] = g;
  }

  for (int r = 0; r < levels; ++r) {
    for (int m = 0; m < channels; ++m) {
      for (const Vec3& v : grad.pyramid.grid(r, m).values()) {
        if (!is_finite(v)) {
          throw NumericError("non-finite gradient in velocity grid (level " + std::to_string(r) + ", channel " +
                             std::to_string(m) + ")");
        }
      }
    }
  }
  try {
    grad.net.check_finite();
  } catch (const NumericError& e) {
    throw NumericError(std::string("non-finite gradient: ") + e.what());
  }
  return g;
}

std::vector<ParameterBlock> ParameterSet::layout(const FlowModel& model) {
  std::vector<ParameterBlock> blocks;
  std::size_t offset = 0;
  for (int r = 0; r < model.pyramid.levels(); ++r) {
    for (int m = 0; m < model.pyramid.channels(); ++m) {
      const std::size_t n = 3 * model.pyramid.grid(r, m).node_count();
      blocks.push_back({"grid[" + std::to_string(r) + "," + std::to_string(m) + "]", offset, n});
      offset += n;
    }
  }
  const auto layers = model.net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    blocks.push_back({"attention.layer" + std::to_string(l) + ".weight", offset, layers[l].weight.size()});
    offset += layers[l].weight.size();
    blocks.push_back({"attention.layer" + std::to_string(l) + ".bias", offset, layers[l].bias.size()});
    offset += layers[l].bias.size();
  }
  return blocks;
}

std::vector<double> ParameterSet::pack(const FlowModel& model) {
  std::vector<double> flat;
  flat.reserve(model.scalar_count());
  for (const VelocityGrid& g : model.pyramid.grids()) {
    for (const Vec3& v : g.values()) {
      flat.push_back(v.x);
      flat.push_back(v.y);
      flat.push_back(v.z);
    }
  }
  for (const DenseLayer& l : model.net.layers()) {
    flat.insert(flat.end(), l.weight.begin(), l.weight.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void ParameterSet::unpack(std::span<const double> flat, FlowModel& model) {
  if (flat.size() != model.scalar_count()) {
    throw SizeError("parameter vector has " + std::to_string(flat.size()) + " entries, model needs " +
                    std::to_string(model.scalar_count()));
  }
  std::size_t k = 0;
  for (VelocityGrid& g : model.pyramid.grids()) {
    for (Vec3& v : g.values()) {
      v = {flat[k], flat[k + 1], flat[k + 2]};
      k += 3;
    }
  }
  for (DenseLayer& l : model.net.layers()) {
    for (double& w : l.weight) w = flat[k++];
    for (double& b : l.bias) b = flat[k++];
  }
}

ParameterSet ParameterSet::from_model(const FlowModel& model) {
  ParameterSet set;
  set.values = pack(model);
  set.gradient.assign(set.values.size(), 0.0);
  set.blocks = layout(model);
  return set;
}

void ParameterSet::load_gradient(const FlowModel& grad) {
  std::vector<double> flat = pack(grad);
  if (flat.size() != values.size()) throw SizeError("gradient does not match the parameter set");
  gradient = std::move(flat);
}

void ParameterSet::zero_gradient() { std::fill(gradient.begin(), gradient.end(), 0.0); }

const ParameterBlock& ParameterSet::block_of(std::size_t index) const {
  for (const ParameterBlock& b : blocks) {
    if (index >= b.offset && index < b.offset + b.size) return b;
  }
  throw SizeError("parameter index " + std::to_string(index) + " is out of range");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& config) {
  if (grads.size() != params.size()) throw StateError("adam: gradient and parameter sizes differ");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw StateError("adam: optimizer state does not match the parameters");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

double clip_global_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double total = std::sqrt(sq);
  if (max_norm > 0.0 && total > max_norm) {
    const double s = max_norm / total;
    for (double& g : grads) g *= s;
  }
  return total;
}

}  // namespace ctaflow
