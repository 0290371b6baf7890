#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "scdiff/binio.hpp"
#include "scdiff/checkpoint.hpp"
#include "scdiff/config.hpp"
#include "scdiff/dataset.hpp"
#include "scdiff/errors.hpp"
#include "scdiff/metrics.hpp"
#include "scdiff/report.hpp"
#include "scdiff/sampler.hpp"
#include "scdiff/synthdata.hpp"
#include "scdiff/textio.hpp"
#include "scdiff/trainer.hpp"

namespace scdiff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

void check_matching_genes(const ExpressionMatrix& real,
                          const ExpressionMatrix& synth) {
  if (real.gene_names.size() != synth.gene_names.size())
    throw DimensionMismatch(
        "gene headers differ: " + std::to_string(real.gene_names.size()) +
        " vs " + std::to_string(synth.gene_names.size()) + " genes");
  for (std::size_t g = 0; g < real.gene_names.size(); ++g)
    if (real.gene_names[g] != synth.gene_names[g])
      throw DimensionMismatch("gene headers differ at column " +
                              std::to_string(g + 1) + ": \"" +
                              real.gene_names[g] + "\" vs \"" +
                              synth.gene_names[g] + "\"");
}

/// Builds the record stored in checkpoints when training starts from an
/// already-preprocessed matrix: the file's columns are the selection.
PreprocessSpec spec_for_training_data(const ExpressionMatrix& data,
                                      const DataConfig& cfg) {
  PreprocessSpec spec;
  spec.top_k = static_cast<int>(cfg.top_k);
  spec.negation = cfg.negation;
  spec.selected_genes = data.gene_names;
  spec.selected_indices.resize(data.gene_names.size());
  std::iota(spec.selected_indices.begin(), spec.selected_indices.end(),
            Index{0});
  return spec;
}

struct TrainedRun {
  NoiseSchedule schedule;
  DenoiserModel model;
  TrainState state;
};

/// Shared by `train` and `bench`: runs the configured training loop on a
/// prepared matrix, writing loss.csv, periodic checkpoints, and the final
/// checkpoint/train-state pair into out_dir.
TrainedRun train_to_dir(const RunConfig& cfg, const ExpressionMatrix& data,
                        const std::string& out_dir) {
  TrainedRun run{linear_schedule(cfg.schedule.T, cfg.schedule.beta_start,
                                 cfg.schedule.beta_end),
                 DenoiserModel{}, TrainState{}};
  DenoiserConfig dc = make_denoiser_config(cfg.model, data.genes());
  dc.validate();
  Rng init_rng(cfg.train.seed);
  run.model = init_denoiser(dc, init_rng);
  const PreprocessSpec spec = spec_for_training_data(data, cfg.data);

  std::ofstream loss_csv(out_dir + "/loss.csv", std::ios::binary);
  if (!loss_csv) throw IoError("cannot write " + out_dir + "/loss.csv");
  loss_csv << "epoch,mean_loss\n";

  run.state = init_train_state(run.model, cfg.train);
  const auto on_epoch = [&](int epoch, double mean_loss) {
    loss_csv << epoch << ',' << format_double(mean_loss) << '\n';
    if (cfg.train.log_every > 0 && epoch % cfg.train.log_every == 0)
      std::cerr << "epoch " << epoch << "/" << cfg.train.epochs << " loss "
                << format_double(mean_loss) << "\n";
    if (cfg.train.checkpoint_every > 0 &&
        epoch % cfg.train.checkpoint_every == 0 && epoch < cfg.train.epochs)
      save_checkpoint(out_dir + "/checkpoint_epoch_" + std::to_string(epoch) +
                          ".bin",
                      run.model, cfg.schedule.T, cfg.schedule.beta_start,
                      cfg.schedule.beta_end, spec);
  };
  train_epochs(run.model, run.state, data.values, run.schedule, cfg.train,
               cfg.train.epochs, on_epoch);
  loss_csv.close();
  if (!loss_csv) throw IoError("write failed for " + out_dir + "/loss.csv");

  save_checkpoint(out_dir + "/checkpoint.bin", run.model, cfg.schedule.T,
                  cfg.schedule.beta_start, cfg.schedule.beta_end, spec);
  save_train_state(out_dir + "/train_state.bin", run.state);
  return run;
}

json sample_sidecar(const std::string& checkpoint_path,
                    const SampleRequest& req, const SampleResult& res) {
  json doc;
  doc["checkpoint_hash"] = hash_hex(fnv1a64_file(checkpoint_path));
  doc["method"] = to_string(req.method);
  doc["n_samples"] = req.n_samples;
  doc["seed"] = req.seed;
  doc["denoiser_calls"] = res.denoiser_calls;
  if (req.method == SampleMethod::ddim) {
    doc["steps"] = req.tau.tau.size();
    doc["eta"] = req.tau.eta;
  }
  return doc;
}

}  // namespace

void run_preprocess(const PreprocessArgs& args) {
  ExpressionMatrix raw = load_csv(args.input, /*require_nonnegative=*/true);
  SelectionResult sel =
      select_hypervariable(raw, args.top_k, args.negation);
  sel.reduced.values = zero_negate(sel.reduced.values, args.negation);
  save_csv(sel.reduced, args.output);

  json sidecar;
  sidecar["top_k"] = sel.spec.top_k;
  sidecar["negation"] = sel.spec.negation;
  sidecar["selected_genes"] = sel.spec.selected_genes;
  sidecar["skipped_zero_mean"] = sel.spec.skipped_zero_mean;
  write_file(args.output + ".genes.json", sidecar.dump(2) + "\n");

  std::cout << "kept " << sel.spec.selected_genes.size() << " of "
            << raw.genes() << " genes -> " << args.output << "\n";
}

void run_train(const TrainArgs& args) {
  RunConfig cfg = load_run_config(args.config);
  const std::string data_path = args.data.empty() ? cfg.data.path : args.data;
  if (data_path.empty())
    throw InvalidConfig("no training data: pass --data or set data.path");
  cfg.data.path = data_path;
  ExpressionMatrix data = load_csv(data_path);

  fs::create_directories(args.out_dir);
  write_file(args.out_dir + "/config.json", run_config_json(cfg));
  TrainedRun run = train_to_dir(cfg, data, args.out_dir);
  std::cout << "trained " << run.state.epochs_done << " epochs, final loss "
            << format_double(run.state.loss_history.back()) << ", checkpoint "
            << args.out_dir << "/checkpoint.bin\n";
}

void run_sample(const SampleArgs& args) {
  if (args.eta < 0.0 || args.eta > 1.0)
    throw InvalidEta("eta must lie in [0, 1], got " + format_double(args.eta));
  if (args.n < 1) throw InvalidConfig("need at least one sample");

  CheckpointBundle bundle = load_checkpoint(args.checkpoint);
  SampleRequest req;
  req.n_samples = args.n;
  req.seed = args.seed;
  req.method = sample_method_from_string(args.method);
  if (req.method == SampleMethod::ddpm) {
    if (args.steps_given)
      std::cerr << "warning: --steps is ignored for ddpm (full "
                << bundle.schedule.T << "-step chain)\n";
  } else {
    const int steps = args.steps > 0 ? args.steps : bundle.schedule.T;
    req.tau = make_tau(bundle.schedule.T, steps, TauMode::equidistant);
    req.tau.eta = args.eta;
  }

  SampleResult res = sample(bundle, req);
  save_csv(res.matrix, args.out);
  write_file(args.out + ".json",
             sample_sidecar(args.checkpoint, req, res).dump(2) + "\n");
  std::cerr << "wrote " << args.n << " samples in "
            << format_double(res.wall_clock_s) << "s (" << res.denoiser_calls
            << " denoiser calls)\n";
}

void run_evaluate(const EvaluateArgs& args) {
  ExpressionMatrix real = load_csv(args.real);
  ExpressionMatrix synth = load_csv(args.synth);
  check_matching_genes(real, synth);

  MetricsReport r = compute_metrics(real.values, synth.values, args.bins);
  write_file(args.out, metrics_report_json(r, real.gene_names));
  if (!args.gene_stats.empty())
    write_file(args.gene_stats, gene_stats_csv(r, real.gene_names));
  if (!args.pca.empty())
    write_file(args.pca,
               pca_coords_csv(pca_project(real.values, synth.values, 2)));
  std::cout << "kl " << format_double(r.kl) << "  wasserstein "
            << format_double(r.wasserstein) << "  mmd " << format_double(r.mmd)
            << "\n";
}

void run_schedule_dump(const ScheduleDumpArgs& args) {
  NoiseSchedule s = linear_schedule(args.T, args.beta_start, args.beta_end);
  std::string csv = "t,beta,alpha,alpha_bar,beta_tilde\n";
  for (int t = 1; t <= s.T; ++t) {
    csv += std::to_string(t);
    csv += ',';
    csv += format_double(s.beta_at(t));
    csv += ',';
    csv += format_double(s.alpha_at(t));
    csv += ',';
    csv += format_double(s.alpha_bar_at(t));
    csv += ',';
    csv += format_double(s.beta_tilde_at(t));
    csv += '\n';
  }
  write_file(args.out, csv);
}

void run_synth(const SynthArgs& args) {
  RunConfig cfg = load_run_config(args.config);
  if (!cfg.generator)
    throw InvalidConfig("config has no generator section");
  ExpressionMatrix m = generate(*cfg.generator);
  save_csv(m, args.out);
  write_file(args.out + ".json", run_config_json(cfg));
  std::cout << "generated " << m.cells() << " cells x " << m.genes()
            << " genes -> " << args.out << "\n";
}

void run_bench(const BenchArgs& args) {
  RunConfig cfg = load_run_config(args.config);
  if (!cfg.generator)
    throw InvalidConfig("bench requires a generator section in the config");
  fs::create_directories(args.out_dir);
  write_file(args.out_dir + "/config.json", run_config_json(cfg));

  ExpressionMatrix data = generate(*cfg.generator);
  data.values = zero_negate(data.values, cfg.data.negation);

  // Fresh draw from the same distribution as the evaluation reference.
  GeneratorSpec holdout_spec = *cfg.generator;
  holdout_spec.seed += 1;
  ExpressionMatrix holdout = generate(holdout_spec);

  std::cerr << "training on " << data.cells() << " synthetic cells\n";
  train_to_dir(cfg, data, args.out_dir);
  CheckpointBundle bundle = load_checkpoint(args.out_dir + "/checkpoint.bin");

  std::string table = "rate,kl,wasserstein,mmd,wallclock_s,denoiser_calls\n";
  for (int rate : {1, 10, 20, 50, 100}) {
    SampleRequest req;
    req.method = SampleMethod::ddim;
    req.n_samples = static_cast<int>(cfg.sample.n_samples);
    req.seed = cfg.sample.seed;
    const int steps = std::max(1, cfg.schedule.T / rate);
    req.tau = make_tau(cfg.schedule.T, steps, TauMode::equidistant);
    req.tau.eta = cfg.sample.eta;

    SampleResult res = sample(bundle, req);
    MetricsReport r = compute_metrics(holdout.values, res.matrix.values, 50);
    table += std::to_string(rate);
    table += ',';
    table += format_double(r.kl);
    table += ',';
    table += format_double(r.wasserstein);
    table += ',';
    table += format_double(r.mmd);
    table += ',';
    table += format_double(res.wall_clock_s);
    table += ',';
    table += std::to_string(res.denoiser_calls);
    table += '\n';
    std::cerr << "rate " << rate << ": mmd " << format_double(r.mmd) << " in "
              << format_double(res.wall_clock_s) << "s\n";
  }
  write_file(args.out_dir + "/bench.csv", table);
  std::cout << "wrote " << args.out_dir << "/bench.csv\n";
}

void print_version() {
  std::cout << "scdiff 1.0\n"
            << "checkpoint format version: " << kCheckpointFormatVersion
            << "\n"
            << "report format version: " << kReportFormatVersion << "\n";
}

}  // namespace scdiff::cli
