#pragma once

#include <stdexcept>
#include <string>

namespace scdiff {

// Base class for every error raised by this library. Each concrete type
// corresponds to one contract violation so callers (and tests) can catch
// them individually.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct NonFinite : Error {
  using Error::Error;
};
struct StepOutOfRange : Error {
  using Error::Error;
};
struct InvalidRange : Error {
  using Error::Error;
};
struct InvalidConfig : Error {
  using Error::Error;
};
struct InvalidEta : Error {
  using Error::Error;
};
struct InvalidSteps : Error {
  using Error::Error;
};
struct NegativeRadicand : Error {
  using Error::Error;
};
struct InvalidSpec : Error {
  using Error::Error;
};
struct ZeroMeanGene : Error {
  using Error::Error;
};
struct EmptyMatrix : Error {
  using Error::Error;
};
struct NotRaw : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct DuplicateGene : Error {
  using Error::Error;
};
struct NegativeValue : Error {
  using Error::Error;
};
struct EmptySample : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct ConvergenceFailure : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace scdiff
