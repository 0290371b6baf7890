#pragma once

#include <cstdint>
#include <string>

namespace scdiff::cli {

struct PreprocessArgs {
  std::string input, output;
  int top_k = 2000;
  double negation = -10.0;
};

struct TrainArgs {
  std::string config, data, out_dir;
};

struct SampleArgs {
  std::string checkpoint, out;
  int n = 1;
  std::string method = "ddpm";
  int steps = 0;  // 0 = every timestep
  bool steps_given = false;
  double eta = 0.0;
  std::uint64_t seed = 0;
};

struct EvaluateArgs {
  std::string real, synth, out;
  std::string gene_stats, pca;  // optional extra CSV outputs
  int bins = 50;
};

struct ScheduleDumpArgs {
  int T = 1000;
  double beta_start = 1e-4, beta_end = 0.02;
  std::string out;
};

struct SynthArgs {
  std::string config, out;
};

struct BenchArgs {
  std::string config, out_dir;
};

void run_preprocess(const PreprocessArgs&);
void run_train(const TrainArgs&);
void run_sample(const SampleArgs&);
void run_evaluate(const EvaluateArgs&);
void run_schedule_dump(const ScheduleDumpArgs&);
void run_synth(const SynthArgs&);
void run_bench(const BenchArgs&);
void print_version();

}  // namespace scdiff::cli
