#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "scdiff/errors.hpp"

namespace {

/// Exit 2 covers everything the user can fix: bad flags, malformed or
/// inconsistent inputs, out-of-range settings. Exit 3 is reserved for
/// numeric failures of an otherwise well-posed run.
bool is_usage_error(const scdiff::Error& e) {
  using namespace scdiff;
  return dynamic_cast<const ParseError*>(&e) ||
         dynamic_cast<const InvalidConfig*>(&e) ||
         dynamic_cast<const InvalidSpec*>(&e) ||
         dynamic_cast<const InvalidEta*>(&e) ||
         dynamic_cast<const InvalidSteps*>(&e) ||
         dynamic_cast<const InvalidRange*>(&e) ||
         dynamic_cast<const IoError*>(&e) ||
         dynamic_cast<const DuplicateGene*>(&e) ||
         dynamic_cast<const NegativeValue*>(&e) ||
         dynamic_cast<const NotRaw*>(&e) ||
         dynamic_cast<const EmptyMatrix*>(&e) ||
         dynamic_cast<const EmptySample*>(&e) ||
         dynamic_cast<const ZeroMeanGene*>(&e) ||
         dynamic_cast<const DimensionMismatch*>(&e);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace scdiff::cli;

  CLI::App app{"Diffusion-based synthetic gene-expression generator"};
  app.require_subcommand(0, 1);
  bool version = false;
  app.add_flag("--version", version, "print tool and file-format versions");

  PreprocessArgs pre_args;
  auto* pre = app.add_subcommand(
      "preprocess", "screen hypervariable genes and mark zeros");
  pre->add_option("--input", pre_args.input, "raw expression CSV")->required();
  pre->add_option("--output", pre_args.output, "reduced CSV to write")
      ->required();
  pre->add_option("--top-k", pre_args.top_k, "genes to keep (default 2000)");
  pre->add_option("--negation", pre_args.negation,
                  "negative marker written over zeros (default -10)");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train the denoiser");
  train->add_option("--config", train_args.config, "run-config JSON")
      ->required();
  train->add_option("--data", train_args.data, "preprocessed training CSV");
  train->add_option("--out", train_args.out_dir, "output directory")
      ->required();

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "generate synthetic cells");
  sample->add_option("--checkpoint", sample_args.checkpoint,
                     "trained model checkpoint")
      ->required();
  sample->add_option("--n", sample_args.n, "number of cells (default 1)");
  sample->add_option("--method", sample_args.method, "ddpm or ddim");
  sample->add_option("--steps", sample_args.steps,
                     "ddim step count (default: every timestep)");
  sample->add_option("--eta", sample_args.eta,
                     "ddim stochasticity in [0,1] (default 0)");
  sample->add_option("--seed", sample_args.seed, "sampling seed (default 0)");
  sample->add_option("--out", sample_args.out, "samples CSV to write")
      ->required();

  EvaluateArgs eval_args;
  auto* evaluate =
      app.add_subcommand("evaluate", "compare real and synthetic matrices");
  evaluate->add_option("--real", eval_args.real, "reference CSV")->required();
  evaluate->add_option("--synth", eval_args.synth, "generated CSV")
      ->required();
  evaluate->add_option("--out", eval_args.out, "metrics report JSON")
      ->required();
  evaluate->add_option("--gene-stats", eval_args.gene_stats,
                       "optional per-gene cv/zero-prop CSV");
  evaluate->add_option("--pca", eval_args.pca,
                       "optional 2-D PCA coordinates CSV");
  evaluate->add_option("--bins", eval_args.bins,
                       "histogram bins for KL (default 50)");

  ScheduleDumpArgs sched_args;
  auto* sched =
      app.add_subcommand("schedule-dump", "write the noise schedule as CSV");
  sched->add_option("--T", sched_args.T, "timesteps (default 1000)");
  sched->add_option("--beta-start", sched_args.beta_start,
                    "first beta (default 1e-4)");
  sched->add_option("--beta-end", sched_args.beta_end,
                    "last beta (default 0.02)");
  sched->add_option("--out", sched_args.out, "CSV to write")->required();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand(
      "synth", "generate a ground-truth dataset from a generator config");
  synth->add_option("--config", synth_args.config,
                    "run-config JSON with a generator section")
      ->required();
  synth->add_option("--out", synth_args.out, "dataset CSV to write")
      ->required();

  BenchArgs bench_args;
  auto* bench = app.add_subcommand(
      "bench", "train once and tabulate sampling-acceleration quality");
  bench->add_option("--config", bench_args.config,
                    "run-config JSON with a generator section")
      ->required();
  bench->add_option("--out", bench_args.out_dir, "output directory")
      ->required();

  try {
    app.parse(argc, argv);
    sample_args.steps_given = sample->count("--steps") > 0;

    if (version) {
      print_version();
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cout << app.help();
      return 2;
    }
    if (pre->parsed()) run_preprocess(pre_args);
    if (train->parsed()) run_train(train_args);
    if (sample->parsed()) run_sample(sample_args);
    if (evaluate->parsed()) run_evaluate(eval_args);
    if (sched->parsed()) run_schedule_dump(sched_args);
    if (synth->parsed()) run_synth(synth_args);
    if (bench->parsed()) run_bench(bench_args);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const scdiff::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_usage_error(e) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
