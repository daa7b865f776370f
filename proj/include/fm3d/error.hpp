#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fm3d {

enum class Errc {
  NonPositiveDimension,
  ChannelConstraintViolated,
  StrideExceedsFilter,
  IndexOutOfRange,
  ShapeMismatch,
  LabelOutOfRange,
  UnknownFilterCount,
  BadOverride,
  ChannelNotDivisible,
  EmptyNetwork,
  MissingKey,
  UnknownKey,
  DuplicateKey,
  BadValue,
  BadMagic,
  VersionMismatch,
  DimMismatch,
  CountMismatch,
  TruncatedFile,
  BadDims,
  EmptyDataset,
  NonFiniteLoss,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

// Every failure surfaced by the library is an Error carrying one of the codes
// above; callers switch on code(), humans read what().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }
  // what() without the leading code name.
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

}  // namespace fm3d
