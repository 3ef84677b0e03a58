#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lockit {

enum class Errc {
  InvalidArgument,
  DegenerateCloud,
  EmptyCloud,
  BackendUnavailable,
  DimensionMismatch,
  EmptyTrajectory,
  EmptyMap,
  BTooLarge,
  AllZeroWeights,
  EmptySet,
  DegenerateGeometry,
  EmptyCorrespondences,
  TooFewCorrespondences,
  NoConsensus,
  DegenerateMotion,
  ExtentTooSmall,
  TooShort,
  EmptyInput,
  Io,
  Parse,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the toolkit carries one of the Errc codes so that
/// callers (and the CLI exit-code mapping) can branch on the kind.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lockit
