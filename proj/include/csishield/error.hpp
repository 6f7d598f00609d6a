#pragma once

#include <stdexcept>
#include <string>

namespace csishield {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dimension disagreement between operands (rows/cols/feature size).
struct ShapeMismatch : Error {
  using Error::Error;
};

/// Attempt to divide by a zero-magnitude reference symbol.
struct DivisionByZeroSubcarrier : Error {
  int subcarrier;
  explicit DivisionByZeroSubcarrier(int k)
      : Error("transmitted symbol has zero magnitude at subcarrier " + std::to_string(k)),
        subcarrier(k) {}
};

/// Frames of differing length fed to matrix assembly.
struct RaggedFrames : Error {
  using Error::Error;
};

/// An operation received an empty container where at least one element is required.
struct EmptyInput : Error {
  using Error::Error;
};

/// Input matrix does not have the expected column count.
struct WrongWidth : Error {
  int expected;
  int actual;
  WrongWidth(int want, int got)
      : Error("expected " + std::to_string(want) + " columns, got " + std::to_string(got)),
        expected(want), actual(got) {}
};

/// Problems with files and capture data (missing, malformed, truncated).
struct DataError : Error {
  using Error::Error;
};

struct MalformedLine : DataError {
  long line_no;
  MalformedLine(long line, const std::string& reason)
      : DataError("line " + std::to_string(line) + ": " + reason), line_no(line) {}
};

struct TooFewFrames : DataError {
  long found;
  explicit TooFewFrames(long n)
      : DataError("capture holds " + std::to_string(n) + " frames, need at least 990"),
        found(n) {}
};

struct TooManyFrames : DataError {
  long found;
  explicit TooManyFrames(long n)
      : DataError("capture holds " + std::to_string(n) + " frames, accept at most 1010"),
        found(n) {}
};

struct IoFailure : DataError {
  using DataError::DataError;
};

/// Checkpoint header declares a format this reader does not understand.
struct VersionMismatch : DataError {
  using DataError::DataError;
};

/// Checkpoint payload fails its length or checksum validation.
struct CorruptPayload : DataError {
  using DataError::DataError;
};

/// Training produced a NaN/Inf loss; carries the step at which it happened.
struct NonFiniteLoss : Error {
  long step;
  explicit NonFiniteLoss(long s, const std::string& detail)
      : Error("non-finite loss at step " + std::to_string(s) + ": " + detail), step(s) {}
};

/// Classifier training requires at least two distinct labels.
struct SingleClass : Error {
  using Error::Error;
};

/// A feature vector contains NaN/Inf entries.
struct NonFiniteFeature : Error {
  using Error::Error;
};

/// Invalid user-supplied configuration (flag values, config files).
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace csishield
