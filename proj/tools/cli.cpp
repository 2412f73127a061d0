#include "cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <algorithm>
#include <optional>
#include <cmath>
#include <sstream>
#include <ostream>

#include "ctaflow/attention.hpp"
#include "ctaflow/container.hpp"
#include "ctaflow/errors.hpp"
#include "ctaflow/flow.hpp"
#include "ctaflow/mesh_io.hpp"
#include "ctaflow/metrics.hpp"
#include "ctaflow/synthetic.hpp"
#include "ctaflow/train.hpp"

namespace ctaflow::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int default_workers() { return std::max(1, omp_get_num_procs()); }

void require(bool ok, const std::string& message) {
  if (!ok) throw InputError(message);
}

void require_file(const fs::path& path, const std::string& what) {
  require(!path.empty(), what + " path is required");
  require(fs::is_regular_file(path), what + " not found: " + path.string());
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      require(used == item.size(), "");
    } catch (const std::exception&) {
      throw InputError("not a number list: '" + text + "'");
    }
  }
  require(!values.empty(), "empty number list");
  return values;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string out = "data";
  std::size_t count = 8;
  double a_min = 27.0;
  double a_max = 45.0;
  std::uint64_t seed = 0;
  int subdivisions = 4;
  double radius = 0.5;
  int smooth_iterations = 10;
  double smooth_factor = 0.5;
  double outer_thickness = 0.0;
  std::string format = "obj";
};

int cmd_generate(const GenerateArgs& g, std::ostream& out) {
  require(g.count >= 1, "count must be at least 1");
  require(g.a_min <= g.a_max, "invalid condition range: a-min > a-max");
  require(g.subdivisions >= 0 && g.subdivisions <= kMaxIcosphereSubdivisions, "subdivisions must be in [0, 7]");
  require(g.radius > 0.0, "radius must be positive");
  require(g.smooth_iterations >= 0, "smooth-iterations must be non-negative");
  require(g.smooth_factor > 0.0 && g.smooth_factor <= 1.0, "smooth-factor must be in (0, 1]");
  require(g.outer_thickness >= 0.0, "outer-thickness must be non-negative");
  require(g.format == "obj" || g.format == "ply", "format must be obj or ply");

  ShapeFamily family;
  family.range = {g.a_min, g.a_max};
  if (g.a_min == g.a_max) family.range = {g.a_min - 1.0, g.a_max + 1.0};
  const TriangleMesh tmpl = make_template(g.subdivisions, g.radius, g.smooth_iterations, g.smooth_factor);
  const std::vector<DatasetItem> items = make_dataset(g.count, g.a_min, g.a_max, g.seed, tmpl, family);

  const fs::path dir(g.out);
  fs::create_directories(dir);
  const std::string ext = "." + g.format;
  write_mesh(dir / ("template" + ext), tmpl);

  json manifest = {{"format", "ctaflow-dataset"},
                   {"version", 1},
                   {"template", "template" + ext},
                   {"condition_range", {g.a_min, g.a_max}},
                   {"seed", g.seed},
                   {"template_params",
                    {{"subdivisions", g.subdivisions},
                     {"radius", g.radius},
                     {"smooth_iterations", g.smooth_iterations},
                     {"smooth_factor", g.smooth_factor}}},
                   {"items", json::array()}};
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::ostringstream name;
    name << "target_" << std::setw(2) << std::setfill('0') << i;
    json entry = {{"a", items[i].a}, {"seed", items[i].seed}, {"target", name.str() + ext}};
    write_mesh(dir / (name.str() + ext), items[i].mesh);
    if (g.outer_thickness > 0.0) {
      write_mesh(dir / (name.str() + "_outer" + ext), make_outer_target(items[i].mesh, g.outer_thickness));
      entry["outer"] = name.str() + "_outer" + ext;
    }
    manifest["items"].push_back(entry);
  }
  write_json(dir / "manifest.json", manifest);
  out << "wrote " << items.size() << " targets and manifest to " << dir.string() << '\n';
  return kExitOk;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  std::string out = "model.ctvf";
  std::string resume;
  std::string log;
  std::string mode = "ctvf";
  std::string loss = "chamfer";
  int levels = 3;
  int channels = 4;
  int grid = 32;
  std::string hidden = "64,64";
  int steps = 50;
  int pretrain_epochs = 30;
  int finetune_epochs = 30;
  double pretrain_lr = 1e-4;
  double finetune_lr = 2e-5;
  double pretrain_lambda_lap = 0.5;
  double pretrain_lambda_nc = 5e-4;
  double finetune_lambda_lap = 0.1;
  double finetune_lambda_nc = 1e-4;
  std::size_t finetune_samples = 4096;
  int mse_epochs = 60;
  double mse_lr = 1e-4;
  std::size_t batch_size = 1;
  double clip_norm = 10.0;
  int checkpoint_every = 0;
  std::uint64_t seed = 0;
  int workers = 0;
};

struct Dataset {
  TriangleMesh template_mesh;
  ConditionRange range;
  std::vector<FitItem> items;
};

Dataset load_dataset(const fs::path& manifest_path, bool outer_pairs) {
  require_file(manifest_path, "manifest");
  const json m = read_json(manifest_path);
  const fs::path dir = manifest_path.parent_path();
  Dataset d;
  try {
    d.template_mesh = read_mesh(dir / m.at("template").get<std::string>());
    const auto range = m.at("condition_range").get<std::vector<double>>();
    require(range.size() == 2 && range[0] <= range[1], "manifest: bad condition_range");
    d.range = {range[0], range[1]};
    if (d.range.min == d.range.max) d.range = {d.range.min - 1.0, d.range.max + 1.0};
    for (const json& e : m.at("items")) {
      FitItem item;
      item.a = e.at("a").get<double>();
      const fs::path target = dir / e.at("target").get<std::string>();
      require_file(target, "target mesh");
      if (outer_pairs) {
        require(e.contains("outer"), "manifest item has no outer surface for the mse loss");
        item.source = read_mesh(target);
        item.target = read_mesh(dir / e.at("outer").get<std::string>());
      } else {
        item.target = read_mesh(target);
      }
      d.items.push_back(std::move(item));
    }
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  require(!d.items.empty(), "manifest lists no targets");
  return d;
}

int cmd_fit(const FitArgs& f, std::ostream& out, std::ostream& err) {
  // Validate everything before reading or writing files.
  const FlowMode mode = parse_flow_mode(f.mode);
  const LossKind loss = parse_loss_kind(f.loss);
  std::vector<int> hidden;
  for (double w : parse_list(f.hidden)) {
    require(w >= 1 && w == std::floor(w), "hidden widths must be positive integers");
    hidden.push_back(static_cast<int>(w));
  }
  require(f.levels >= 1 && f.channels >= 1, "levels and channels must be positive");
  require(f.grid >= 2, "grid must be at least 2");
  require(f.steps >= 1, "steps must be positive");
  require(f.batch_size >= 1, "batch-size must be positive");
  require(f.clip_norm > 0.0, "clip-norm must be positive");
  require(f.checkpoint_every >= 0, "checkpoint-every must be non-negative");
  require(f.workers >= 0, "workers must be non-negative");
  require(!f.out.empty(), "out path is required");
  pyramid_level_dims(f.levels, {f.grid, f.grid, f.grid});

  FitSchedule schedule;
  if (loss == LossKind::kMse) {
    schedule = FitSchedule::correspondence(f.mse_epochs, f.mse_lr);
  } else {
    schedule = FitSchedule::two_stage(f.pretrain_epochs, f.finetune_epochs, f.finetune_samples);
    schedule.stages[0].learning_rate = f.pretrain_lr;
    schedule.stages[0].weights = {f.pretrain_lambda_lap, f.pretrain_lambda_nc};
    schedule.stages[1].learning_rate = f.finetune_lr;
    schedule.stages[1].weights = {f.finetune_lambda_lap, f.finetune_lambda_nc};
  }
  schedule.validate();

  const Dataset data = load_dataset(f.data, loss == LossKind::kMse);
  ModelConfig model_config;
  model_config.levels = f.levels;
  model_config.channels = f.channels;
  model_config.finest = {f.grid, f.grid, f.grid};
  model_config.hidden = hidden;
  model_config.mode = mode;
  model_config.range = data.range;

  FitOptions options;
  options.flow.steps = f.steps;
  options.seed = f.seed;
  options.workers = f.workers == 0 ? default_workers() : f.workers;
  options.clip_norm = f.clip_norm;
  options.batch_size = f.batch_size;

  std::optional<FitState> resume;
  if (!f.resume.empty()) {
    require_file(f.resume, "checkpoint");
    resume = load_checkpoint(f.resume);
    if (resume->model.net.mode() != mode) {
      err << "note: resuming keeps the checkpoint's mode " << to_string(resume->model.net.mode()) << '\n';
    }
  }

  const fs::path out_path(f.out);
  ensure_parent(out_path);
  const json extra = {{"steps", f.steps}, {"seed", f.seed}, {"loss", f.loss}, {"manifest", f.data}};
  if (!f.log.empty()) {
    ensure_parent(f.log);
    write_log_csv(f.log, {}, resume.has_value());
  }
  auto on_epoch = [&](const FitState& state, const LogRow& row) {
    out << "epoch " << row.epoch << " [" << row.stage_name << "] loss " << row.total << " chamfer " << row.chamfer
        << " mse " << row.mse << '\n';
    if (!f.log.empty()) write_log_csv(f.log, {row}, true);
    if (f.checkpoint_every > 0 && row.epoch % f.checkpoint_every == 0) save_checkpoint(out_path, state, extra);
  };
  const auto start = std::chrono::steady_clock::now();
  const FitResult result = fit(data.items, data.template_mesh, schedule, model_config, options, resume, on_epoch);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_checkpoint(out_path, result.state, extra);
  if (result.diverged) {
    err << "fit diverged (" << result.message << "); last good state saved to " << out_path.string() << '\n';
    return kExitNumeric;
  }
  out << "trained " << result.state.epochs_done << " epochs in " << seconds << " s; checkpoint " << out_path.string()
      << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ deform

struct DeformArgs {
  std::string model;
  std::string mesh;
  std::string out;
  double a = 35.0;
  int steps = 50;
  std::string attention_csv;
  std::string report;
  int workers = 1;
};

int cmd_deform(const DeformArgs& d, std::ostream& out) {
  require(d.steps >= 1, "steps must be positive");
  require(d.workers >= 1, "workers must be positive");
  require(std::isfinite(d.a), "a must be finite");
  require(!d.out.empty(), "out path is required");
  require_file(d.model, "model");
  require_file(d.mesh, "mesh");
  const FlowModel model = read_container(d.model);
  model.validate();
  const TriangleMesh mesh = read_mesh(d.mesh);

  FlowConfig config;
  config.steps = d.steps;
  IntegrateOptions options;
  options.workers = d.workers;
  options.record_trajectory = !d.attention_csv.empty();
  const auto start = std::chrono::steady_clock::now();
  const IntegrationResult result = integrate(mesh, model, d.a, config, options);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ensure_parent(d.out);
  write_mesh(d.out, result.mesh);
  if (!d.attention_csv.empty()) {
    ensure_parent(d.attention_csv);
    std::ofstream csv(d.attention_csv);
    if (!csv) throw InputError("cannot write " + d.attention_csv);
    csv << std::setprecision(10) << "k,t,r,m,p\n";
    const TrajectoryLog& log = *result.trajectory;
    for (std::size_t k = 0; k < log.attention.size(); ++k) {
      for (int r = 0; r < model.net.levels(); ++r) {
        for (int m = 0; m < model.net.channels(); ++m) {
          csv << k << ',' << log.times[k] << ',' << r + 1 << ',' << m + 1 << ','
              << log.attention[k][static_cast<std::size_t>(r * model.net.channels() + m)] << '\n';
        }
      }
    }
  }
  const json report = {{"model", d.model},
                       {"mesh", d.mesh},
                       {"output", d.out},
                       {"a", d.a},
                       {"steps", d.steps},
                       {"horizon", config.horizon},
                       {"step_size", config.step_size()},
                       {"mode", std::string(to_string(model.net.mode()))},
                       {"vertices", result.mesh.vertex_count()},
                       {"faces", result.mesh.face_count()},
                       {"out_of_domain", result.out_of_domain},
                       {"euler_characteristic", euler_characteristic(result.mesh)},
                       {"wall_time", seconds}};
  write_json(d.report.empty() ? fs::path(d.out + ".json") : fs::path(d.report), report);
  if (result.out_of_domain > 0) {
    out << "warning: " << result.out_of_domain << " input vertices lie outside [-1,1]^3\n";
  }
  out << "deformed " << result.mesh.vertex_count() << " vertices with K=" << d.steps << " in " << seconds << " s\n";
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred;
  std::string target;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  std::string backend = "bvh";
  std::string out;
  std::string sif_csv;
  bool sif_faces = false;
  int workers = 0;
};

int cmd_eval(const EvalArgs& e, std::ostream& out) {
  MetricsOptions options;
  options.backend = parse_sif_backend(e.backend);
  require(e.samples >= 1, "samples must be positive");
  require(e.workers >= 0, "workers must be non-negative");
  require_file(e.pred, "predicted mesh");
  require_file(e.target, "target mesh");
  options.samples = e.samples;
  options.seed = e.seed;
  options.workers = e.workers == 0 ? default_workers() : e.workers;

  const MetricsReport report = evaluate(read_mesh(e.pred), read_mesh(e.target), options);
  json doc = {{"pred", e.pred},
              {"target", e.target},
              {"samples", e.samples},
              {"seed", e.seed},
              {"backend", std::string(to_string(options.backend))},
              {"assd", report.assd},
              {"hd90", report.hd90},
              {"sif_percent", report.sif_percent},
              {"sif_count", report.sif_faces.size()},
              {"euler_characteristic", report.euler_characteristic},
              {"wall_time", report.wall_time}};
  if (e.sif_faces) doc["sif_faces"] = report.sif_faces;
  if (!e.sif_csv.empty()) {
    ensure_parent(e.sif_csv);
    std::ofstream csv(e.sif_csv);
    if (!csv) throw InputError("cannot write " + e.sif_csv);
    csv << "face\n";
    for (std::uint32_t f : report.sif_faces) csv << f << '\n';
  }
  if (e.out.empty()) {
    out << doc.dump(2) << '\n';
  } else {
    ensure_parent(e.out);
    write_json(e.out, doc);
    out << "assd " << report.assd << " hd90 " << report.hd90 << " sif " << report.sif_percent << "%\n";
  }
  return kExitOk;
}

// --------------------------------------------------------------- attention

struct AttentionArgs {
  std::string model;
  std::string out;
  std::string a = "28,35,42";
  int t_points = 51;
};

int cmd_attention(const AttentionArgs& args, std::ostream& out) {
  require(args.t_points >= 2, "t-points must be at least 2");
  const std::vector<double> conditions = parse_list(args.a);
  for (double a : conditions) require(std::isfinite(a), "conditions must be finite");
  require_file(args.model, "model");
  const FlowModel model = read_container(args.model);
  const int levels = model.net.levels();
  const int channels = model.net.channels();

  std::ofstream file;
  if (!args.out.empty()) {
    ensure_parent(args.out);
    file.open(args.out);
    if (!file) throw InputError("cannot write " + args.out);
  }
  std::ostream& csv = args.out.empty() ? out : file;
  csv << std::setprecision(10) << "a,t,r,m,p,p_r\n";
  for (double a : conditions) {
    for (int i = 0; i < args.t_points; ++i) {
      const double t = static_cast<double>(i) / (args.t_points - 1);
      const std::vector<double> p = attention_map(model.net, {t, a, {}});
      const std::vector<double> level = aggregate_by_level(p, levels, channels);
      for (int r = 0; r < levels; ++r) {
        for (int m = 0; m < channels; ++m) {
          csv << a << ',' << t << ',' << r + 1 << ',' << m + 1 << ',' << p[static_cast<std::size_t>(r * channels + m)]
              << ',' << level[static_cast<std::size_t>(r)] << '\n';
        }
      }
    }
  }
  return kExitOk;
}

void add_config(CLI::App* sub, std::string& path) {
  sub->add_option("--config", path, "flat key = value file; command-line flags override it");
}

// Fills every option not given on the command line from a flat `key = value`
// file. Keys are option names without the leading dashes; unknown keys and
// sections are errors.
void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  require_file(path, "config file");
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::Error& e) {
    throw InputError(path + ": " + e.what());
  }
  for (const CLI::ConfigItem& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty()) throw InputError(path + ": sections are not supported ('" + item.fullname() + "')");
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = sub->get_option_no_throw("--" + name);
    if (opt == nullptr || name == "config") throw InputError(path + ": unknown key '" + item.name + "'");
    if (opt->count() > 0) continue;
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw InputError(path + ": bad value for '" + item.name + "': " + e.what());
    }
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional temporal attention flows for template mesh deformation", "ctaflow"};
  app.require_subcommand(1);

  GenerateArgs g;
  CLI::App* generate = app.add_subcommand("generate", "synthetic targets, template and manifest");
  std::string generate_config;
  add_config(generate, generate_config);
  generate->add_option("--out", g.out, "output directory")->capture_default_str();
  generate->add_option("--count", g.count, "number of targets")->capture_default_str();
  generate->add_option("--a-min", g.a_min, "smallest condition")->capture_default_str();
  generate->add_option("--a-max", g.a_max, "largest condition")->capture_default_str();
  generate->add_option("--seed", g.seed)->capture_default_str();
  generate->add_option("--subdivisions", g.subdivisions, "template icosphere depth")->capture_default_str();
  generate->add_option("--radius", g.radius, "template radius")->capture_default_str();
  generate->add_option("--smooth-iterations", g.smooth_iterations)->capture_default_str();
  generate->add_option("--smooth-factor", g.smooth_factor)->capture_default_str();
  generate->add_option("--outer-thickness", g.outer_thickness, "also write dilated outer surfaces")
      ->capture_default_str();
  generate->add_option("--format", g.format, "obj or ply")->capture_default_str();

  FitArgs f;
  CLI::App* fit_cmd = app.add_subcommand("fit", "train velocity grids and attention on a dataset");
  std::string fit_config;
  add_config(fit_cmd, fit_config);
  fit_cmd->add_option("--data", f.data, "dataset manifest.json");
  fit_cmd->add_option("--out", f.out, "checkpoint path")->capture_default_str();
  fit_cmd->add_option("--resume", f.resume, "checkpoint to continue from");
  fit_cmd->add_option("--log", f.log, "training log CSV");
  fit_cmd->add_option("--mode", f.mode, "ctvf, tvf, cvf or svf")->capture_default_str();
  fit_cmd->add_option("--loss", f.loss, "chamfer (two stages) or mse (inner to outer)")->capture_default_str();
  fit_cmd->add_option("--levels", f.levels)->capture_default_str();
  fit_cmd->add_option("--channels", f.channels)->capture_default_str();
  fit_cmd->add_option("--grid", f.grid, "finest lattice nodes per axis")->capture_default_str();
  fit_cmd->add_option("--hidden", f.hidden, "attention hidden widths")->capture_default_str();
  fit_cmd->add_option("--steps", f.steps, "Euler steps K")->capture_default_str();
  fit_cmd->add_option("--pretrain-epochs", f.pretrain_epochs)->capture_default_str();
  fit_cmd->add_option("--finetune-epochs", f.finetune_epochs)->capture_default_str();
  fit_cmd->add_option("--pretrain-lr", f.pretrain_lr)->capture_default_str();
  fit_cmd->add_option("--finetune-lr", f.finetune_lr)->capture_default_str();
  fit_cmd->add_option("--pretrain-lambda-lap", f.pretrain_lambda_lap)->capture_default_str();
  fit_cmd->add_option("--pretrain-lambda-nc", f.pretrain_lambda_nc)->capture_default_str();
  fit_cmd->add_option("--finetune-lambda-lap", f.finetune_lambda_lap)->capture_default_str();
  fit_cmd->add_option("--finetune-lambda-nc", f.finetune_lambda_nc)->capture_default_str();
  fit_cmd->add_option("--finetune-samples", f.finetune_samples)->capture_default_str();
  fit_cmd->add_option("--mse-epochs", f.mse_epochs)->capture_default_str();
  fit_cmd->add_option("--mse-lr", f.mse_lr)->capture_default_str();
  fit_cmd->add_option("--batch-size", f.batch_size)->capture_default_str();
  fit_cmd->add_option("--clip-norm", f.clip_norm)->capture_default_str();
  fit_cmd->add_option("--checkpoint-every", f.checkpoint_every, "epochs between checkpoints, 0 = end only")
      ->capture_default_str();
  fit_cmd->add_option("--seed", f.seed)->capture_default_str();
  fit_cmd->add_option("--workers", f.workers, "0 = all cores")->capture_default_str();

  DeformArgs d;
  CLI::App* deform = app.add_subcommand("deform", "integrate a mesh through a trained flow");
  std::string deform_config;
  add_config(deform, deform_config);
  deform->add_option("--model", d.model, "CTVF container");
  deform->add_option("--mesh", d.mesh, "input mesh");
  deform->add_option("--out", d.out, "output mesh");
  deform->add_option("--a", d.a, "condition")->capture_default_str();
  deform->add_option("--steps", d.steps, "Euler steps K")->capture_default_str();
  deform->add_option("--attention-csv", d.attention_csv, "per-step attention (k,t,r,m,p)");
  deform->add_option("--report", d.report, "JSON report path (default <out>.json)");
  deform->add_option("--workers", d.workers)->capture_default_str();

  EvalArgs e;
  CLI::App* eval = app.add_subcommand("eval", "ASSD, HD90, SIF and Euler characteristic");
  std::string eval_config;
  add_config(eval, eval_config);
  eval->add_option("--pred", e.pred, "predicted mesh");
  eval->add_option("--target", e.target, "target mesh");
  eval->add_option("--samples", e.samples)->capture_default_str();
  eval->add_option("--seed", e.seed)->capture_default_str();
  eval->add_option("--backend", e.backend, "bvh or brute")->capture_default_str();
  eval->add_option("--out", e.out, "JSON report path (stdout when empty)");
  eval->add_option("--sif-csv", e.sif_csv, "CSV of self-intersecting faces");
  eval->add_flag("--sif-faces", e.sif_faces, "include the face list in the report");
  eval->add_option("--workers", e.workers, "0 = all cores")->capture_default_str();

  AttentionArgs at;
  CLI::App* attention = app.add_subcommand("attention", "dump p^{r,m}(t,a) and p^r(t,a) as CSV");
  std::string attention_config;
  add_config(attention, attention_config);
  attention->add_option("--model", at.model, "CTVF container");
  attention->add_option("--out", at.out, "CSV path (stdout when empty)");
  attention->add_option("--a", at.a, "comma-separated conditions")->capture_default_str();
  attention->add_option("--t-points", at.t_points, "samples over [0,1]")->capture_default_str();

  std::vector<char*> argv;
  std::vector<std::string> storage = args.empty() ? std::vector<std::string>{"ctaflow"} : args;
  for (std::string& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& s) {
    return app.exit(s, out, err);
  } catch (const CLI::ParseError& pe) {
    app.exit(pe, out, err);
    return kExitConfig;
  }

  try {
    if (generate->parsed()) {
      apply_config(generate, generate_config);
      return cmd_generate(g, out);
    }
    if (fit_cmd->parsed()) {
      apply_config(fit_cmd, fit_config);
      return cmd_fit(f, out, err);
    }
    if (deform->parsed()) {
      apply_config(deform, deform_config);
      return cmd_deform(d, out);
    }
    if (eval->parsed()) {
      apply_config(eval, eval_config);
      return cmd_eval(e, out);
    }
    if (attention->parsed()) {
      apply_config(attention, attention_config);
      return cmd_attention(at, out);
    }
  } catch (const NumericError& ne) {
    err << "numeric failure: " << ne.what() << '\n';
    return kExitNumeric;
  } catch (const Error& ce) {
    err << "error: " << ce.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& fe) {
    err << "error: " << fe.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace ctaflow::cli
