#pragma once

#include <string>

#include "scdiff/dataset.hpp"
#include "scdiff/denoiser.hpp"
#include "scdiff/schedule.hpp"

namespace scdiff {

/// Bumped whenever the on-disk layout below changes incompatibly.
inline constexpr unsigned kCheckpointFormatVersion = 1;

/// Everything needed to sample: the trained denoiser, the exact noise
/// schedule it was trained under, and the preprocessing record mapping
/// model outputs back to gene names.
struct CheckpointBundle {
  DenoiserModel model;
  NoiseSchedule schedule;
  double beta_start = 0, beta_end = 0;  // schedule is linear(T, start, end)
  PreprocessSpec preprocess;
};

/// Binary format: magic "SCRD", version u32, model config, linear-schedule
/// parameters, preprocess record, then a count-prefixed list of named
/// tensors (u32 name length + UTF-8, u32 ndims, u64 dims, f64 row-major
/// payload, all little-endian).
void save_checkpoint(const std::string& path, const DenoiserModel& model,
                     int T, double beta_start, double beta_end,
                     const PreprocessSpec& preprocess);

CheckpointBundle load_checkpoint(const std::string& path);

}  // namespace scdiff
