#pragma once

#include <stdexcept>
#include <string>

namespace seriescore {

enum class ErrorCode {
  kDegenerateSeries,
  kLengthMismatch,
  kShapeMismatch,
  kEmptyDataset,
  kNonFinite,
  kBadSegmentation,
  kBadLength,
  kBadAlphabet,
  kEmptySample,
  kBadBudget,
  kBadCounts,
  kEmptyLeaf,
  kBadCardinality,
  kInsufficientQueries,
  kSizeMismatch,
  kBadFloat,
  kBadBuffer,
  kCorruptIndex,
  kIo,
  kConfig,
};

const char* error_code_name(ErrorCode code) noexcept;

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace seriescore
