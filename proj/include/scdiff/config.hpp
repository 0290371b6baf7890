#pragma once

#include <optional>
#include <string>

#include "scdiff/common.hpp"
#include "scdiff/denoiser.hpp"
#include "scdiff/sampler.hpp"
#include "scdiff/synthdata.hpp"
#include "scdiff/trainer.hpp"

namespace scdiff {

struct DataConfig {
  std::string path;       // optional input CSV; command flags take precedence
  Index top_k = 2000;     // hypervariable genes kept by preprocessing
  double negation = -10;  // marker written over exact zeros
};

struct ScheduleConfig {
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

struct ModelConfig {
  Index patch_size = 4;
  Index hidden_size = 128;
  Index n_blocks = 6;
  Index n_heads = 8;
  double mlp_ratio = 4.0;
};

struct SampleConfig {
  SampleMethod method = SampleMethod::ddpm;
  int n_steps = 0;  // ddim step count; 0 means every timestep
  double eta = 0.0;
  Index n_samples = 1;
  std::uint64_t seed = 0;
};

/// One JSON document drives a whole run. Every section is optional and
/// falls back to the defaults above; unknown keys anywhere are rejected
/// so typos fail loudly instead of silently using a default.
struct RunConfig {
  DataConfig data;
  ScheduleConfig schedule;
  ModelConfig model;
  TrainConfig train;
  SampleConfig sample;
  std::optional<GeneratorSpec> generator;  // required only by `bench`
};

/// Parses JSON text; throws ParseError with a location or key name on
/// malformed input, wrong types, or unknown keys.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);  // IoError if unreadable

/// Serializes the fully-resolved configuration (defaults applied) as
/// stable, sorted-key JSON — written next to run outputs for the record.
std::string run_config_json(const RunConfig& cfg);

DenoiserConfig make_denoiser_config(const ModelConfig& model, Index n_genes);

SampleMethod sample_method_from_string(const std::string& s);  // ParseError
std::string to_string(SampleMethod m);

}  // namespace scdiff
