#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace itmainn {

// Every failure the library reports carries one of these kinds so callers
// (CLI exit codes, HTTP status mapping, tests) can branch without parsing
// message text.
enum class ErrorKind {
  kInvalidArgument,
  // dataset
  kMissingClassDirectory,
  kUndecodableImage,
  kEmptyClass,
  kFractionOutOfRange,
  kKTooSmall,
  kClassSmallerThanK,
  // augmentation / preprocessing
  kTargetBelowOriginalCount,
  kNoTransformsEnabled,
  kDecodeError,
  kZeroDimension,
  // model zoo
  kUnknownBackbone,
  kWeightFetchFailure,
  kIncompatibleHead,
  kUntrainedModel,
  kWriteFailure,
  kChecksumMismatch,
  kSchemaVersionUnsupported,
  // trainer
  kEmptyTrainingSet,
  kEmptyValidationSet,
  kNonFiniteLoss,
  // evaluator
  kLabelOutOfRange,
  kEmptyBatch,
  kSingleClassBatch,
  kEmptyReportSet,
  // service
  kOversizeImage,
  kValidationError,
  kStorageFailure,
  kCoordinateOutOfRange,
  kEmptyRegistry,
  // cli
  kUnknownSubcommand,
  kConfigError,
  kIoError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const { return kind_; }
  // Message without the kind prefix.
  const std::string& detail() const { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace itmainn
