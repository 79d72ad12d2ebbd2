#include "itmainn/core/error.hpp"

namespace itmainn {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kMissingClassDirectory: return "MissingClassDirectory";
    case ErrorKind::kUndecodableImage: return "UndecodableImage";
    case ErrorKind::kEmptyClass: return "EmptyClass";
    case ErrorKind::kFractionOutOfRange: return "FractionOutOfRange";
    case ErrorKind::kKTooSmall: return "KTooSmall";
    case ErrorKind::kClassSmallerThanK: return "ClassSmallerThanK";
    case ErrorKind::kTargetBelowOriginalCount: return "TargetBelowOriginalCount";
    case ErrorKind::kNoTransformsEnabled: return "NoTransformsEnabled";
    case ErrorKind::kDecodeError: return "DecodeError";
    case ErrorKind::kZeroDimension: return "ZeroDimension";
    case ErrorKind::kUnknownBackbone: return "UnknownBackbone";
    case ErrorKind::kWeightFetchFailure: return "WeightFetchFailure";
    case ErrorKind::kIncompatibleHead: return "IncompatibleHead";
    case ErrorKind::kUntrainedModel: return "UntrainedModel";
    case ErrorKind::kWriteFailure: return "WriteFailure";
    case ErrorKind::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::kSchemaVersionUnsupported: return "SchemaVersionUnsupported";
    case ErrorKind::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::kEmptyValidationSet: return "EmptyValidationSet";
    case ErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::kEmptyBatch: return "EmptyBatch";
    case ErrorKind::kSingleClassBatch: return "SingleClassBatch";
    case ErrorKind::kEmptyReportSet: return "EmptyReportSet";
    case ErrorKind::kOversizeImage: return "OversizeImage";
    case ErrorKind::kValidationError: return "ValidationError";
    case ErrorKind::kStorageFailure: return "StorageFailure";
    case ErrorKind::kCoordinateOutOfRange: return "CoordinateOutOfRange";
    case ErrorKind::kEmptyRegistry: return "EmptyRegistry";
    case ErrorKind::kUnknownSubcommand: return "UnknownSubcommand";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace itmainn
