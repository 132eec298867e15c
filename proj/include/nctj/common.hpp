#pragma once

#include <stdexcept>
#include <string>

namespace nctj {

// Error taxonomy shared by every module. All failures derive from Error so
// the CLI boundary can catch the family and map it to an exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or size mismatch between tensors/matrices.
struct DimensionError : Error { using Error::Error; };
// Bad value for an otherwise well-formed call.
struct ArgumentError : Error { using Error::Error; };
// Call sequencing violated (e.g. backward twice on one tape).
struct StateError : Error { using Error::Error; };
// Malformed file; the message carries the byte offset.
struct FormatError : Error { using Error::Error; };
// NaN/Inf detected; the message names the operation that produced it.
struct NonFiniteError : Error { using Error::Error; };
// Fine-tuning subset intersects the poison ledger.
struct ContaminationError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// Training diverged; carries the last epoch that completed cleanly
// (0 = divergence before the first epoch finished).
struct TrainingError : Error {
  int last_good_epoch;
  TrainingError(const std::string& msg, int epoch)
      : Error(msg), last_good_epoch(epoch) {}
};

}  // namespace nctj
