#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "scdiff/dataset.hpp"
#include "scdiff/rng.hpp"

using namespace scdiff;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int code = -1;
  std::string out, err;
};

const fs::path& scratch_root() {
  static const fs::path root = [] {
    fs::path p = fs::path("/tmp") /
                 ("scdiff_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = scratch_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), "missing file: ", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(bool(out));
  out << content;
}

RunResult run_cli(const std::string& args) {
  static int serial = 0;
  const fs::path out_file =
      scratch_root() / ("stdout_" + std::to_string(serial));
  const fs::path err_file =
      scratch_root() / ("stderr_" + std::to_string(serial));
  ++serial;
  const std::string cmd = std::string(SCDIFF_CLI_PATH) + " " + args + " >" +
                          out_file.string() + " 2>" + err_file.string();
  const int raw = std::system(cmd.c_str());
  RunResult r;
  REQUIRE(raw != -1);
  REQUIRE(WIFEXITED(raw));
  r.code = WEXITSTATUS(raw);
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

/// 16 cells x 4 genes with a few exact zeros; deterministic.
ExpressionMatrix toy_matrix() {
  ExpressionMatrix m;
  m.values.resize(16, 4);
  Rng rng(404);
  for (Index i = 0; i < 16; ++i)
    for (Index j = 0; j < 4; ++j) {
      const double v = rng.uniform();
      m.values(i, j) = v < 0.25 ? 0.0 : 2.0 * v;
    }
  m.gene_names = {"ga", "gb", "gc", "gd"};
  return m;
}

fs::path write_train_setup(const fs::path& dir) {
  save_csv(toy_matrix(), (dir / "data.csv").string());
  spit(dir / "config.json", R"({
    "schedule": {"T": 25},
    "model": {"patch_size": 2, "hidden_size": 8, "n_blocks": 1, "n_heads": 2},
    "train": {"epochs": 3, "batch_size": 8, "learning_rate": 0.001, "seed": 5}
  })");
  return dir;
}

fs::path trained_dir() {
  static const fs::path dir = [] {
    const fs::path d = write_train_setup(fresh_dir("trained"));
    RunResult r = run_cli("train --config " + (d / "config.json").string() +
                          " --data " + (d / "data.csv").string() + " --out " +
                          (d / "run").string());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("version flag and bare invocation") {
  RunResult v = run_cli("--version");
  CHECK(v.code == 0);
  CHECK(v.out.find("checkpoint format version") != std::string::npos);
  CHECK(v.out.find("report format version") != std::string::npos);

  CHECK(run_cli("").code == 2);           // no subcommand: usage error
  CHECK(run_cli("frobnicate").code == 2);  // unknown subcommand
  CHECK(run_cli("--help").code == 0);
}

TEST_CASE("preprocess: top-k screening, negation, error paths") {
  const fs::path dir = fresh_dir("preprocess");
  spit(dir / "raw.csv",
       "cell_id,ga,gb,gc\n"
       "c1,1,0,5\n"
       "c2,1,2,5\n"
       "c3,1,4,5\n");  // cv: ga 0, gb high, gc 0 (ties broken by name)
  const fs::path out = dir / "reduced.csv";
  RunResult r = run_cli("preprocess --input " + (dir / "raw.csv").string() +
                        " --output " + out.string() + " --top-k 2");
  REQUIRE_MESSAGE(r.code == 0, r.err);

  ExpressionMatrix reduced = load_csv(out.string());
  REQUIRE(reduced.genes() == 2);  // 3-gene input, top-k 2
  CHECK(reduced.gene_names[0] == "gb");  // highest cv first
  CHECK(reduced.gene_names[1] == "ga");
  CHECK(reduced.values(0, 0) == -10.0);  // the zero got the marker

  json sidecar = json::parse(slurp(out.string() + ".genes.json"));
  CHECK(sidecar.at("selected_genes").size() == 2);
  CHECK(sidecar.at("negation").get<double>() == -10.0);

  RunResult missing = run_cli("preprocess --input " +
                              (dir / "nope.csv").string() + " --output " +
                              out.string());
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.csv") != std::string::npos);

  RunResult bad_neg = run_cli("preprocess --input " +
                              (dir / "raw.csv").string() + " --output " +
                              out.string() + " --negation 1");
  CHECK(bad_neg.code == 2);
}

TEST_CASE("train: outputs, loss curve shape, config echo") {
  const fs::path d = trained_dir();
  const fs::path run = d / "run";
  CHECK(fs::exists(run / "checkpoint.bin"));
  CHECK(fs::exists(run / "train_state.bin"));

  const std::string loss = slurp(run / "loss.csv");
  CHECK(loss.rfind("epoch,mean_loss\n", 0) == 0);
  CHECK(count_lines(loss) == 1 + 3);  // header + one row per epoch

  json echoed = json::parse(slurp(run / "config.json"));
  CHECK(echoed.at("schedule").at("T").get<int>() == 25);
  CHECK(echoed.at("train").at("epochs").get<int>() == 3);
  CHECK(echoed.at("model").at("hidden_size").get<int>() == 8);
  CHECK(echoed.at("data").at("path").get<std::string>() ==
        (d / "data.csv").string());
}

TEST_CASE("train: same seed reproduces the checkpoint byte for byte") {
  const fs::path d = write_train_setup(fresh_dir("train_repro"));
  const std::string base = "train --config " + (d / "config.json").string() +
                           " --data " + (d / "data.csv").string() + " --out ";
  REQUIRE(run_cli(base + (d / "a").string()).code == 0);
  REQUIRE(run_cli(base + (d / "b").string()).code == 0);
  CHECK(slurp(d / "a" / "checkpoint.bin") == slurp(d / "b" / "checkpoint.bin"));
  CHECK(slurp(d / "a" / "loss.csv") == slurp(d / "b" / "loss.csv"));
}

TEST_CASE("train: config errors exit 2 with a useful message") {
  const fs::path d = fresh_dir("train_errors");
  save_csv(toy_matrix(), (d / "data.csv").string());

  spit(d / "broken.json", "{\n  \"train\": }");
  RunResult bad = run_cli("train --config " + (d / "broken.json").string() +
                          " --data " + (d / "data.csv").string() + " --out " +
                          (d / "run").string());
  CHECK(bad.code == 2);
  CHECK(bad.err.find("line") != std::string::npos);

  spit(d / "typo.json", R"({"train": {"epochz": 3}})");
  RunResult typo = run_cli("train --config " + (d / "typo.json").string() +
                           " --data " + (d / "data.csv").string() + " --out " +
                           (d / "run").string());
  CHECK(typo.code == 2);
  CHECK(typo.err.find("epochz") != std::string::npos);

  spit(d / "ok.json", "{}");
  RunResult nodata = run_cli("train --config " + (d / "ok.json").string() +
                             " --out " + (d / "run").string());
  CHECK(nodata.code == 2);
}

TEST_CASE("sample: ddim step accounting and sidecar") {
  const fs::path run = trained_dir() / "run";
  const fs::path dir = fresh_dir("sample");
  const std::string ckpt = (run / "checkpoint.bin").string();

  RunResult r = run_cli("sample --checkpoint " + ckpt +
                        " --n 4 --method ddim --steps 5 --seed 3 --out " +
                        (dir / "s.csv").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  ExpressionMatrix s = load_csv((dir / "s.csv").string());
  CHECK(s.cells() == 4);
  CHECK(s.genes() == 4);
  CHECK(s.cell_ids[0] == "sample_0");
  CHECK((s.values.array() >= 0.0).all());  // postprocess truncates

  json sidecar = json::parse(slurp((dir / "s.csv").string() + ".json"));
  CHECK(sidecar.at("denoiser_calls").get<int>() == 5);
  CHECK(sidecar.at("steps").get<int>() == 5);
  CHECK(sidecar.at("method").get<std::string>() == "ddim");
  CHECK(sidecar.at("seed").get<int>() == 3);
  CHECK(sidecar.at("checkpoint_hash").is_string());
}

TEST_CASE("sample: ddpm ignores --steps with a warning") {
  const fs::path run = trained_dir() / "run";
  const fs::path dir = fresh_dir("sample_ddpm");
  RunResult r = run_cli("sample --checkpoint " +
                        (run / "checkpoint.bin").string() +
                        " --n 2 --method ddpm --steps 7 --out " +
                        (dir / "s.csv").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.err.find("ignored") != std::string::npos);
  json sidecar = json::parse(slurp((dir / "s.csv").string() + ".json"));
  CHECK(sidecar.at("denoiser_calls").get<int>() == 25);  // full chain, T=25
  CHECK_FALSE(sidecar.contains("steps"));
}

TEST_CASE("sample: eta domain and seed behavior") {
  const fs::path run = trained_dir() / "run";
  const fs::path dir = fresh_dir("sample_seeds");
  const std::string ckpt = (run / "checkpoint.bin").string();

  CHECK(run_cli("sample --checkpoint " + ckpt + " --method ddim --eta 1.5" +
                " --out " + (dir / "x.csv").string())
            .code == 2);

  const std::string tail = " --n 3 --method ddim --steps 5 --out ";
  REQUIRE(run_cli("sample --checkpoint " + ckpt + " --seed 9" + tail +
                  (dir / "a.csv").string())
              .code == 0);
  REQUIRE(run_cli("sample --checkpoint " + ckpt + " --seed 9" + tail +
                  (dir / "b.csv").string())
              .code == 0);
  REQUIRE(run_cli("sample --checkpoint " + ckpt + " --seed 10" + tail +
                  (dir / "c.csv").string())
              .code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));
  CHECK(slurp((dir / "a.csv").string() + ".json") ==
        slurp((dir / "b.csv").string() + ".json"));

  CHECK(run_cli("sample --checkpoint " + (dir / "no.bin").string() +
                " --out " + (dir / "x.csv").string())
            .code == 2);
}

TEST_CASE("evaluate: identical inputs score zero everywhere") {
  const fs::path dir = fresh_dir("eval_same");
  save_csv(toy_matrix(), (dir / "m.csv").string());
  RunResult r = run_cli("evaluate --real " + (dir / "m.csv").string() +
                        " --synth " + (dir / "m.csv").string() + " --out " +
                        (dir / "report.json").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  json report = json::parse(slurp(dir / "report.json"));
  CHECK(report.at("kl").get<double>() <= 1e-10);
  CHECK(report.at("wasserstein").get<double>() <= 1e-10);
  CHECK(report.at("mmd").get<double>() <= 1e-10);
  CHECK(report.at("n_real").get<int>() == 16);
  CHECK(report.at("n_synth").get<int>() == 16);
}

TEST_CASE("evaluate: gene-header mismatch names the first bad column") {
  const fs::path dir = fresh_dir("eval_mismatch");
  ExpressionMatrix m = toy_matrix();
  save_csv(m, (dir / "real.csv").string());
  m.gene_names[2] = "gX";
  save_csv(m, (dir / "synth.csv").string());
  RunResult r = run_cli("evaluate --real " + (dir / "real.csv").string() +
                        " --synth " + (dir / "synth.csv").string() +
                        " --out " + (dir / "report.json").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("gc") != std::string::npos);
  CHECK(r.err.find("gX") != std::string::npos);
}

TEST_CASE("evaluate: report schema matches the golden file") {
  const fs::path dir = fresh_dir("eval_golden");
  const fs::path golden = fs::path(SCDIFF_GOLDEN_DIR);
  RunResult r = run_cli("evaluate --real " + (golden / "real.csv").string() +
                        " --synth " + (golden / "synth.csv").string() +
                        " --out " + (dir / "report.json").string() +
                        " --gene-stats " + (dir / "genes.csv").string() +
                        " --pca " + (dir / "pca.csv").string() + " --bins 8");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(dir / "report.json") == slurp(golden / "report.json"));
  CHECK(slurp(dir / "genes.csv") == slurp(golden / "gene_stats.csv"));
  CHECK(slurp(dir / "pca.csv") == slurp(golden / "pca.csv"));
}

TEST_CASE("schedule-dump: full table with pinned first row") {
  const fs::path dir = fresh_dir("sched");
  RunResult r = run_cli("schedule-dump --T 10 --out " +
                        (dir / "sched.csv").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const std::string csv = slurp(dir / "sched.csv");
  CHECK(csv.rfind("t,beta,alpha,alpha_bar,beta_tilde\n", 0) == 0);
  CHECK(count_lines(csv) == 1 + 10);
  CHECK(csv.find("\n1,1e-04,0.9999,0.9999,0\n") != std::string::npos);

  CHECK(run_cli("schedule-dump --T 0 --out " + (dir / "x.csv").string())
            .code == 2);
}

TEST_CASE("synth: generator config produces a deterministic dataset") {
  const fs::path dir = fresh_dir("synth");
  spit(dir / "gen.json", R"({
    "generator": {
      "n_genes": 3, "n_cells": 20, "seed": 2,
      "dropout_prob": [0.5, 0.0, 0.2],
      "components": [{"weight": 1.0, "log_mean": 0.0, "log_sd": 0.4}]
    }
  })");
  const std::string base = "synth --config " + (dir / "gen.json").string() +
                           " --out ";
  RunResult r = run_cli(base + (dir / "a.csv").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  ExpressionMatrix m = load_csv((dir / "a.csv").string());
  CHECK(m.cells() == 20);
  CHECK(m.genes() == 3);
  CHECK((m.values.col(0).array() == 0.0).cast<int>().sum() > 0);
  CHECK((m.values.col(1).array() != 0.0).all());

  REQUIRE(run_cli(base + (dir / "b.csv").string()).code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(json::parse(slurp((dir / "a.csv").string() + ".json"))
            .at("generator")
            .at("n_cells")
            .get<int>() == 20);

  spit(dir / "nogen.json", "{}");
  CHECK(run_cli("synth --config " + (dir / "nogen.json").string() +
                " --out " + (dir / "x.csv").string())
            .code == 2);
}

TEST_CASE("bench: acceleration table structure") {
  const fs::path dir = fresh_dir("bench");
  spit(dir / "bench.json", R"({
    "schedule": {"T": 50},
    "model": {"patch_size": 2, "hidden_size": 8, "n_blocks": 1, "n_heads": 2},
    "train": {"epochs": 2, "batch_size": 16, "learning_rate": 0.001},
    "sample": {"n_samples": 8},
    "generator": {
      "n_genes": 4, "n_cells": 32, "seed": 6,
      "dropout_prob": 0.25,
      "components": [{"weight": 1.0, "log_mean": 0.0, "log_sd": 0.3}]
    }
  })");
  RunResult r = run_cli("bench --config " + (dir / "bench.json").string() +
                        " --out " + (dir / "out").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);

  const std::string table = slurp(dir / "out" / "bench.csv");
  CHECK(table.rfind("rate,kl,wasserstein,mmd,wallclock_s,denoiser_calls\n",
                    0) == 0);
  REQUIRE(count_lines(table) == 1 + 5);

  std::istringstream lines(table);
  std::string line;
  std::getline(lines, line);  // header
  const int expected_rates[5] = {1, 10, 20, 50, 100};
  const int expected_calls[5] = {50, 5, 2, 1, 1};  // make_tau at T=50
  for (int i = 0; i < 5; ++i) {
    REQUIRE(bool(std::getline(lines, line)));
    std::istringstream cells(line);
    std::string field;
    std::getline(cells, field, ',');
    CHECK(std::stoi(field) == expected_rates[i]);
    for (int skip = 0; skip < 3; ++skip) std::getline(cells, field, ',');
    std::getline(cells, field, ',');
    CHECK(std::stod(field) > 0.0);  // wallclock
    std::getline(cells, field, ',');
    CHECK(std::stoi(field) == expected_calls[i]);
  }
  CHECK(fs::exists(dir / "out" / "checkpoint.bin"));
  CHECK(fs::exists(dir / "out" / "loss.csv"));
}
