#include "ctaflow/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "ctaflow/errors.hpp"
#include "ctaflow/random.hpp"

namespace ctaflow {

std::string_view to_string(LossKind kind) { return kind == LossKind::kMse ? "mse" : "chamfer"; }

LossKind parse_loss_kind(std::string_view name) {
  if (name == "chamfer") return LossKind::kChamfer;
  if (name == "mse") return LossKind::kMse;
  throw InputError("unknown loss kind '" + std::string(name) + "' (expected chamfer or mse)");
}

void FitSchedule::validate() const {
  if (stages.empty()) throw SpecError("fit schedule needs at least one stage");
  for (const FitStage& s : stages) {
    if (s.epochs < 1) throw SpecError("stage '" + s.name + "' needs a positive epoch count");
    if (!(s.learning_rate > 0.0) || !std::isfinite(s.learning_rate)) {
      throw SpecError("stage '" + s.name + "' needs a positive learning rate");
    }
    try {
      s.weights.validate();
    } catch (const InputError& e) {
      throw SpecError("stage '" + s.name + "': " + e.what());
    }
  }
}

FitSchedule FitSchedule::two_stage(int pretrain_epochs, int finetune_epochs, std::size_t finetune_samples) {
  FitSchedule s;
  s.stages.push_back({"pretrain", pretrain_epochs, 1e-4, {0.5, 5e-4}, LossKind::kChamfer, 0});
  s.stages.push_back({"finetune", finetune_epochs, 2e-5, {0.1, 1e-4}, LossKind::kChamfer, finetune_samples});
  return s;
}

FitSchedule FitSchedule::correspondence(int epochs, double learning_rate) {
  FitSchedule s;
  s.stages.push_back({"correspondence", epochs, learning_rate, {0.0, 0.0}, LossKind::kMse, 0});
  return s;
}

FlowModel make_model(const ModelConfig& config, std::uint64_t seed) {
  FlowModel model;
  model.pyramid = VelocityPyramid(config.levels, config.channels, config.finest);
  AttentionConfig att;
  att.levels = config.levels;
  att.channels = config.channels;
  att.hidden = config.hidden;
  att.mode = config.mode;
  att.range = config.range;
  model.net = AttentionNet::initialized(att, mix_seed(seed, 0xa77e));
  return model;
}

ItemLoss item_loss(const TriangleMesh& pred, const TriangleMesh& target, const FitStage& stage,
                   std::uint64_t sample_seed) {
  ItemLoss out;
  out.grad.assign(pred.vertices.size(), Vec3{});
  if (stage.loss == LossKind::kMse) {
    out.mse = mse_loss(pred, target, out.grad);
    out.total = out.mse;
    return out;
  }

  if (stage.samples == 0) {
    out.terms.chamfer = chamfer(pred.vertices, target.vertices, out.grad);
  } else {
    const PointCloud pred_cloud = sample_surface(pred, stage.samples, mix_seed(sample_seed, 0));
    const PointCloud target_cloud = sample_surface(target, stage.samples, mix_seed(sample_seed, 1));
    std::vector<Vec3> point_grad(pred_cloud.size());
    out.terms.chamfer = chamfer(pred_cloud.points, target_cloud.points, point_grad);
    for (std::size_t i = 0; i < pred_cloud.size(); ++i) {
      const Face& f = pred.faces[pred_cloud.source_faces[i]];
      const auto& w = pred_cloud.barycentric[i];
      for (int c = 0; c < 3; ++c) out.grad[f[c]] += point_grad[i] * w[c];
    }
  }
  if (stage.weights.lambda_lap > 0.0) {
    out.terms.laplacian = laplacian_loss(pred, out.grad, stage.weights.lambda_lap);
  }
  if (stage.weights.lambda_nc > 0.0) {
    const NormalConsistency nc = normal_consistency_loss(pred, out.grad, stage.weights.lambda_nc);
    out.terms.normal = nc.value;
    out.terms.skipped_edges = nc.skipped;
  }
  out.terms.total = out.terms.chamfer + stage.weights.lambda_lap * out.terms.laplacian +
                    stage.weights.lambda_nc * out.terms.normal;
  out.total = out.terms.total;
  return out;
}

namespace {

struct ItemGradient {
  FlowModel grad;
  ItemLoss loss;
};

ItemGradient item_gradient(const FlowModel& model, const FitItem& item, const TriangleMesh& template_mesh,
                           const FitStage& stage, const FlowConfig& flow, std::uint64_t sample_seed) {
  const TriangleMesh& source = item.source ? *item.source : template_mesh;
  FlowTape tape;
  std::vector<Vec3> moved = integrate_recorded(source.vertices, model, item.a, flow, tape);
  const TriangleMesh pred = source.with_vertices(std::move(moved));
  ItemGradient out{model.zeros_like(), item_loss(pred, item.target, stage, sample_seed)};
  if (!std::isfinite(out.loss.total)) throw NumericError("loss is not finite");
  backward(tape, model, out.loss.grad, out.grad);
  return out;
}

}  // namespace

FitResult fit(const std::vector<FitItem>& data, const TriangleMesh& template_mesh, const FitSchedule& schedule,
              const ModelConfig& model_config, const FitOptions& options, std::optional<FitState> resume,
              const EpochCallback& on_epoch) {
  schedule.validate();
  options.flow.validate();
  if (data.empty()) throw SpecError("fit needs at least one dataset item");
  for (const FitItem& item : data) {
    const TriangleMesh& source = item.source ? *item.source : template_mesh;
    for (const FitStage& stage : schedule.stages) {
      if (stage.loss == LossKind::kMse && source.vertices.size() != item.target.vertices.size()) {
        throw CorrespondenceError("MSE stages need targets that share the source connectivity");
      }
    }
  }

  FitResult result;
  FitState& state = result.state;
  state = resume ? std::move(*resume) : FitState{make_model(model_config, options.seed), {}, 0, 0, 0};
  state.model.validate();
  if (resume) {
    // The schedule position follows the global epoch counter, so a resumed
    // fit may also extend or shorten the stages it was started with.
    int stage = 0;
    int remaining = state.epochs_done;
    while (stage < static_cast<int>(schedule.stages.size()) &&
           remaining >= schedule.stages[static_cast<std::size_t>(stage)].epochs) {
      remaining -= schedule.stages[static_cast<std::size_t>(stage)].epochs;
      ++stage;
    }
    if (stage != state.stage) state.adam = {};
    state.stage = stage;
    state.epoch_in_stage = stage < static_cast<int>(schedule.stages.size()) ? remaining : 0;
  }
  ParameterSet params = ParameterSet::from_model(state.model);
  const std::size_t batch = std::max<std::size_t>(options.batch_size, 1);
  const int workers = std::max(options.workers, 1);
  const double grid_scale = options.grid_lr_scale;
  const std::size_t grid_count = state.model.pyramid.scalar_count();
  if (!(grid_scale > 0.0) || !std::isfinite(grid_scale)) throw SpecError("grid learning-rate scale must be positive");

  while (state.stage < static_cast<int>(schedule.stages.size())) {
    const FitStage& stage = schedule.stages[static_cast<std::size_t>(state.stage)];
    const AdamConfig adam{stage.learning_rate, 0.9, 0.999, 1e-8};

    while (state.epoch_in_stage < stage.epochs) {
      const FitState last_good = state;
      const std::uint64_t epoch_seed = mix_seed(options.seed, 1000 + static_cast<std::uint64_t>(state.epochs_done));
      std::vector<std::size_t> order(data.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 shuffle_rng(epoch_seed);
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng() % i)]);
      }

      LogRow row;
      row.stage = state.stage;
      row.stage_name = stage.name;
      row.epoch = state.epochs_done + 1;
      row.lambda_lap = stage.weights.lambda_lap;
      row.lambda_nc = stage.weights.lambda_nc;
      row.learning_rate = stage.learning_rate;
      std::size_t batches = 0;

      try {
        for (std::size_t begin = 0; begin < order.size(); begin += batch) {
          const std::size_t end = std::min(order.size(), begin + batch);
          std::vector<ItemGradient> parts(end - begin);
          std::vector<std::string> errors(parts.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (workers > 1 && end - begin > 1)
          for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(parts.size()); ++b) {
            const std::size_t idx = order[begin + static_cast<std::size_t>(b)];
            try {
              parts[static_cast<std::size_t>(b)] = item_gradient(state.model, data[idx], template_mesh, stage,
                                                                 options.flow, mix_seed(epoch_seed, idx));
            } catch (const std::exception& e) {
              errors[static_cast<std::size_t>(b)] = e.what();
            }
          }
          for (const std::string& e : errors) {
            if (!e.empty()) throw NumericError(e);
          }

          params.zero_gradient();
          const double inv = 1.0 / static_cast<double>(parts.size());
          for (const ItemGradient& part : parts) {
            const std::vector<double> flat = ParameterSet::pack(part.grad);
            for (std::size_t i = 0; i < flat.size(); ++i) params.gradient[i] += flat[i] * inv;
            row.total += part.loss.total;
            row.chamfer += part.loss.terms.chamfer;
            row.laplacian += part.loss.terms.laplacian;
            row.normal += part.loss.terms.normal;
            row.mse += part.loss.mse;
          }
          row.grad_norm += clip_global_norm(params.gradient, options.clip_norm);
          const std::vector<double> before = grid_scale == 1.0 ? std::vector<double>{} : params.values;
          adam_step(params.values, params.gradient, state.adam, adam);
          for (std::size_t i = 0; i < before.size() && i < grid_count; ++i) {
            params.values[i] = before[i] + grid_scale * (params.values[i] - before[i]);
          }
          params.store_into(state.model);
          ++batches;
        }
      } catch (const Error& e) {
        result.diverged = true;
        result.message = "epoch " + std::to_string(state.epochs_done + 1) + ": " + e.what();
        state = last_good;
        return result;
      }

      const double n = static_cast<double>(data.size());
      row.total /= n;
      row.chamfer /= n;
      row.laplacian /= n;
      row.normal /= n;
      row.mse /= n;
      row.grad_norm /= static_cast<double>(batches);
      row.step = state.adam.step;
      ++state.epoch_in_stage;
      ++state.epochs_done;
      result.log.push_back(row);
      if (on_epoch) on_epoch(state, row);
    }
    ++state.stage;
    state.epoch_in_stage = 0;
    state.adam = {};
  }
  return result;
}

double mean_sampled_chamfer(const FlowModel& model, const std::vector<FitItem>& data, const TriangleMesh& template_mesh,
                            const FlowConfig& flow, std::size_t samples, std::uint64_t seed) {
  if (data.empty()) throw InputError("no items to evaluate");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const TriangleMesh& source = data[i].source ? *data[i].source : template_mesh;
    const TriangleMesh pred = integrate(source, model, data[i].a, flow).mesh;
    const PointCloud p = sample_surface(pred, samples, mix_seed(seed, 2 * i));
    const PointCloud q = sample_surface(data[i].target, samples, mix_seed(seed, 2 * i + 1));
    total += chamfer(p, q);
  }
  return total / static_cast<double>(data.size());
}

namespace {

constexpr std::uint32_t kOptimizerVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}
void put_f64s(std::vector<std::uint8_t>& out, const std::vector<double>& values) {
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct ByteReader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  std::uint64_t read(int width) {
    if (pos + static_cast<std::size_t>(width) > bytes.size()) throw FormatError("optimizer state: truncated");
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(bytes[pos + b]) << (8 * b);
    pos += static_cast<std::size_t>(width);
    return v;
  }
  std::vector<double> f64s(std::size_t n) {
    std::vector<double> out(n);
    for (double& v : out) v = std::bit_cast<double>(read(8));
    return out;
  }
};

}  // namespace

std::filesystem::path optimizer_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".opt");
}

void save_checkpoint(const std::filesystem::path& path, const FitState& state, const nlohmann::json& extra) {
  nlohmann::json meta = extra;
  meta["stage"] = state.stage;
  meta["epoch_in_stage"] = state.epoch_in_stage;
  meta["epochs_done"] = state.epochs_done;
  meta["optimizer_step"] = state.adam.step;
  save_model(path, state.model, meta);

  const std::vector<double> params = ParameterSet::pack(state.model);
  std::vector<std::uint8_t> bytes{'C', 'T', 'V', 'O'};
  put_u32(bytes, kOptimizerVersion);
  put_u64(bytes, state.adam.step);
  put_u32(bytes, static_cast<std::uint32_t>(state.stage));
  put_u32(bytes, static_cast<std::uint32_t>(state.epoch_in_stage));
  put_u32(bytes, static_cast<std::uint32_t>(state.epochs_done));
  put_u64(bytes, params.size());
  const bool moments = state.adam.m.size() == params.size() && state.adam.v.size() == params.size();
  bytes.push_back(moments ? 1 : 0);
  put_f64s(bytes, params);
  if (moments) {
    put_f64s(bytes, state.adam.m);
    put_f64s(bytes, state.adam.v);
  }
  std::ofstream out(optimizer_path(path), std::ios::binary);
  if (!out) throw InputError("cannot write " + optimizer_path(path).string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FitState load_checkpoint(const std::filesystem::path& path) {
  FitState state;
  state.model = read_container(path);
  std::ifstream in(optimizer_path(path), std::ios::binary);
  if (!in) return state;  // a bare container restarts the schedule from its weights
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ByteReader rd{bytes};
  if (bytes.size() < 4 || bytes[0] != 'C' || bytes[1] != 'T' || bytes[2] != 'V' || bytes[3] != 'O') {
    throw FormatError("optimizer state: bad magic");
  }
  rd.pos = 4;
  if (rd.read(4) != kOptimizerVersion) throw FormatError("optimizer state: unsupported version");
  state.adam.step = rd.read(8);
  state.stage = static_cast<int>(rd.read(4));
  state.epoch_in_stage = static_cast<int>(rd.read(4));
  state.epochs_done = static_cast<int>(rd.read(4));
  const std::uint64_t count = rd.read(8);
  if (count != state.model.scalar_count()) throw FormatError("optimizer state does not match the container");
  const bool moments = rd.read(1) != 0;
  ParameterSet::unpack(rd.f64s(count), state.model);
  if (moments) {
    state.adam.m = rd.f64s(count);
    state.adam.v = rd.f64s(count);
  }
  if (rd.pos != bytes.size()) throw FormatError("optimizer state: trailing bytes");
  return state;
}

void write_log_csv(const std::filesystem::path& path, const std::vector<LogRow>& rows, bool append) {
  const bool header = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(10);
  if (header) {
    out << "stage,stage_name,epoch,step,total,chamfer,laplacian,normal,mse,grad_norm,lambda_lap,lambda_nc,learning_rate\n";
  }
  for (const LogRow& r : rows) {
    out << r.stage << ',' << r.stage_name << ',' << r.epoch << ',' << r.step << ',' << r.total << ',' << r.chamfer
        << ',' << r.laplacian << ',' << r.normal << ',' << r.mse << ',' << r.grad_norm << ',' << r.lambda_lap << ','
        << r.lambda_nc << ',' << r.learning_rate << '\n';
  }
}

}  // namespace ctaflow
