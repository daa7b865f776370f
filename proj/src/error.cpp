#include "fm3d/error.hpp"

namespace fm3d {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::NonPositiveDimension: return "NonPositiveDimension";
    case Errc::ChannelConstraintViolated: return "ChannelConstraintViolated";
    case Errc::StrideExceedsFilter: return "StrideExceedsFilter";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::UnknownFilterCount: return "UnknownFilterCount";
    case Errc::BadOverride: return "BadOverride";
    case Errc::ChannelNotDivisible: return "ChannelNotDivisible";
    case Errc::EmptyNetwork: return "EmptyNetwork";
    case Errc::MissingKey: return "MissingKey";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::BadValue: return "BadValue";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::BadDims: return "BadDims";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

}  // namespace fm3d
