#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "../tools/cli.hpp"
#include "ctaflow/container.hpp"
#include "ctaflow/mesh_io.hpp"
#include "ctaflow/train.hpp"
#include "support.hpp"

using namespace ctaflow;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "ctaflow");
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::vector<std::string> small_fit(const fs::path& data, const fs::path& out) {
  return {"fit",      "--data",          (data / "manifest.json").string(),
          "--out",    out.string(),      "--levels",
          "2",        "--channels",      "2",
          "--grid",   "8",               "--hidden",
          "8,8",      "--steps",         "5",
          "--pretrain-epochs", "2",      "--finetune-epochs",
          "1",        "--finetune-samples", "256",
          "--workers", "1"};
}

fs::path small_dataset(const std::string& name) {
  const fs::path dir = test_support::scratch_dir(name);
  REQUIRE(run({"generate", "--out", dir.string(), "--count", "2", "--subdivisions", "2"}).code == cli::kExitOk);
  return dir;
}

}  // namespace

TEST_CASE("generate writes targets and a manifest") {
  const fs::path dir = test_support::scratch_dir("cli_generate");
  const Run r = run({"generate", "--out", dir.string(), "--subdivisions", "2", "--seed", "4"});
  REQUIRE(r.code == cli::kExitOk);
  const nlohmann::json m = read_json(dir / "manifest.json");
  REQUIRE(m["items"].size() == 8);
  CHECK(m["items"][0]["a"] == 27.0);
  CHECK(m["items"][7]["a"] == 45.0);
  CHECK(fs::exists(dir / "template.obj"));
  for (const auto& item : m["items"]) CHECK(fs::exists(dir / item["target"].get<std::string>()));
  CHECK(read_mesh(dir / "target_03.obj").vertex_count() == 162);

  const fs::path again = test_support::scratch_dir("cli_generate2");
  REQUIRE(run({"generate", "--out", again.string(), "--subdivisions", "2", "--seed", "4"}).code == cli::kExitOk);
  CHECK(slurp(dir / "target_05.obj") == slurp(again / "target_05.obj"));
  CHECK(slurp(dir / "manifest.json") == slurp(again / "manifest.json"));
}

TEST_CASE("generate rejects bad arguments") {
  const fs::path dir = test_support::scratch_dir("cli_generate_bad");
  CHECK(run({"generate", "--out", dir.string(), "--a-min", "45", "--a-max", "27"}).code == cli::kExitConfig);
  CHECK(run({"generate", "--count", "0", "--out", dir.string()}).code == cli::kExitConfig);
  CHECK(run({"generate", "--format", "stl", "--out", dir.string()}).code == cli::kExitConfig);
  CHECK(run({"generate", "--bogus"}).code == cli::kExitConfig);
}

TEST_CASE("generate ply and outer surfaces") {
  const fs::path dir = test_support::scratch_dir("cli_generate_ply");
  REQUIRE(run({"generate", "--out", dir.string(), "--count", "2", "--subdivisions", "1", "--format", "ply",
               "--outer-thickness", "0.05"})
              .code == cli::kExitOk);
  const nlohmann::json m = read_json(dir / "manifest.json");
  CHECK(m["template"] == "template.ply");
  CHECK(fs::exists(dir / m["items"][1]["outer"].get<std::string>()));
}

TEST_CASE("fit, resume, deform, eval and attention") {
  const fs::path data = small_dataset("cli_pipeline");
  const fs::path work = test_support::scratch_dir("cli_pipeline_out");
  const fs::path model = work / "model.ctvf";

  std::vector<std::string> args = small_fit(data, model);
  args.insert(args.end(), {"--log", (work / "log.csv").string()});
  const auto start = std::chrono::steady_clock::now();
  REQUIRE(run(args).code == cli::kExitOk);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 60.0);
  CHECK(fs::exists(model));
  CHECK(fs::exists(sidecar_path(model)));
  CHECK(load_checkpoint(model).epochs_done == 3);

  SUBCASE("resume continues the epoch counter") {
    std::vector<std::string> more = small_fit(data, work / "more.ctvf");
    *(std::find(more.begin(), more.end(), "--finetune-epochs") + 1) = "3";
    more.insert(more.end(), {"--resume", model.string(), "--log", (work / "log.csv").string()});
    REQUIRE(run(more).code == cli::kExitOk);
    CHECK(load_checkpoint(work / "more.ctvf").epochs_done == 5);
    std::ifstream in(work / "log.csv");
    int rows = -1;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 5);
  }

  SUBCASE("deform and eval") {
    const fs::path out = work / "deformed.obj";
    const Run d = run({"deform", "--model", model.string(), "--mesh", (data / "template.obj").string(), "--out",
                       out.string(), "--a", "30", "--steps", "7", "--attention-csv", (work / "att.csv").string()});
    REQUIRE(d.code == cli::kExitOk);
    const nlohmann::json rep = read_json(work / "deformed.obj.json");
    CHECK(rep["steps"] == 7);
    CHECK(rep["step_size"].get<double>() == doctest::Approx(1.0 / 7));
    CHECK(rep["wall_time"].get<double>() >= 0.0);
    CHECK(rep["euler_characteristic"] == 2);
    std::ifstream att(work / "att.csv");
    int rows = -1;
    for (std::string line; std::getline(att, line);) ++rows;
    CHECK(rows == 7 * 4);

    const Run e = run({"eval", "--pred", out.string(), "--target", out.string(), "--samples", "2000", "--sif-faces"});
    REQUIRE(e.code == cli::kExitOk);
    const nlohmann::json j = nlohmann::json::parse(e.out);
    CHECK(j["assd"].get<double>() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(j["hd90"].get<double>() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(j["sif_count"] == 0);
    CHECK(j["sif_faces"].empty());
  }

  SUBCASE("attention dump") {
    const Run a = run({"attention", "--model", model.string()});
    REQUIRE(a.code == cli::kExitOk);
    std::istringstream in(a.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "a,t,r,m,p,p_r");
    std::map<std::pair<double, double>, double> sums;
    int rows = 0;
    while (std::getline(in, line)) {
      double a_v, t, r, m, p, pr;
      char c;
      std::istringstream row(line);
      row >> a_v >> c >> t >> c >> r >> c >> m >> c >> p >> c >> pr;
      sums[{a_v, t}] += p;
      ++rows;
    }
    CHECK(rows == 3 * 51 * 4);
    CHECK(sums.size() == 3 * 51);
    for (const auto& [key, s] : sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("fit modes and mse loss") {
  const fs::path data = test_support::scratch_dir("cli_mse");
  REQUIRE(run({"generate", "--out", data.string(), "--count", "2", "--subdivisions", "1", "--outer-thickness", "0.04"})
              .code == cli::kExitOk);
  const fs::path work = test_support::scratch_dir("cli_mse_out");
  for (const char* mode : {"tvf", "cvf", "svf"}) {
    std::vector<std::string> args = small_fit(data, work / (std::string(mode) + ".ctvf"));
    args.insert(args.end(), {"--mode", mode});
    REQUIRE(run(args).code == cli::kExitOk);
    CHECK(read_json(work / (std::string(mode) + ".ctvf.json"))["mode"] == mode);
  }
  std::vector<std::string> mse = small_fit(data, work / "mse.ctvf");
  mse.insert(mse.end(), {"--loss", "mse", "--mse-epochs", "2"});
  REQUIRE(run(mse).code == cli::kExitOk);
  CHECK(load_checkpoint(work / "mse.ctvf").epochs_done == 2);

  std::vector<std::string> bad = small_fit(data, work / "bad.ctvf");
  bad.insert(bad.end(), {"--mode", "xyz"});
  CHECK(run(bad).code == cli::kExitConfig);
}

TEST_CASE("zero field deform returns the input") {
  const fs::path dir = test_support::scratch_dir("cli_identity");
  ModelConfig cfg;
  cfg.levels = 2;
  cfg.channels = 2;
  cfg.finest = {8, 8, 8};
  write_container(dir / "zero.ctvf", make_model(cfg, 1));
  const TriangleMesh sphere = make_icosphere(2, 0.5);
  write_mesh(dir / "in.obj", sphere);
  REQUIRE(run({"deform", "--model", (dir / "zero.ctvf").string(), "--mesh", (dir / "in.obj").string(), "--out",
               (dir / "out.obj").string()})
              .code == cli::kExitOk);
  const TriangleMesh in = read_mesh(dir / "in.obj");
  const TriangleMesh out = read_mesh(dir / "out.obj");
  CHECK(out.faces == in.faces);
  CHECK(out.vertices == in.vertices);
  CHECK(read_json(dir / "out.obj.json")["steps"] == 50);
}

TEST_CASE("untrained attention is close to uniform") {
  const fs::path dir = test_support::scratch_dir("cli_uniform");
  write_container(dir / "m.ctvf", make_model(ModelConfig{}, 2));
  const Run a = run({"attention", "--model", (dir / "m.ctvf").string(), "--a", "35", "--t-points", "5"});
  REQUIRE(a.code == cli::kExitOk);
  std::istringstream in(a.out);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const double p = std::stod(line.substr(line.find_last_of(',', line.rfind(',') - 1) + 1));
    CHECK(p == doctest::Approx(1.0 / 12).epsilon(0.5));
  }
}

TEST_CASE("error exit codes") {
  const fs::path dir = test_support::scratch_dir("cli_errors");
  CHECK(run({"eval", "--pred", "/missing.obj", "--target", "/missing.obj"}).code == cli::kExitConfig);
  CHECK(run({"deform", "--model", "/missing.ctvf", "--mesh", "/missing.obj", "--out", (dir / "x.obj").string()})
            .code == cli::kExitConfig);
  CHECK(run({"fit", "--data", "/missing/manifest.json"}).code == cli::kExitConfig);
  CHECK(run({"attention", "--model", "/missing.ctvf"}).code == cli::kExitConfig);
  CHECK(run({}).code != cli::kExitOk);
}

TEST_CASE("config files") {
  const fs::path dir = test_support::scratch_dir("cli_config");
  std::ofstream(dir / "gen.ini") << "count = 3\nsubdivisions = 1\na_min = 30\n";
  REQUIRE(run({"generate", "--config", (dir / "gen.ini").string(), "--out", (dir / "d").string(), "--count", "2"})
              .code == cli::kExitOk);
  const nlohmann::json m = read_json(dir / "d" / "manifest.json");
  CHECK(m["items"].size() == 2);  // command line wins
  CHECK(m["items"][0]["a"] == 30.0);

  std::ofstream(dir / "bad.ini") << "colour = blue\n";
  CHECK(run({"generate", "--config", (dir / "bad.ini").string(), "--out", (dir / "e").string()}).code ==
        cli::kExitConfig);
  CHECK(run({"generate", "--config", (dir / "nope.ini").string()}).code == cli::kExitConfig);
}
