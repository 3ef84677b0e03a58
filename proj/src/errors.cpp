#include "lockit/errors.hpp"

namespace lockit {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DegenerateCloud: return "DegenerateCloud";
    case Errc::EmptyCloud: return "EmptyCloud";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyTrajectory: return "EmptyTrajectory";
    case Errc::EmptyMap: return "EmptyMap";
    case Errc::BTooLarge: return "BTooLarge";
    case Errc::AllZeroWeights: return "AllZeroWeights";
    case Errc::EmptySet: return "EmptySet";
    case Errc::DegenerateGeometry: return "DegenerateGeometry";
    case Errc::EmptyCorrespondences: return "EmptyCorrespondences";
    case Errc::TooFewCorrespondences: return "TooFewCorrespondences";
    case Errc::NoConsensus: return "NoConsensus";
    case Errc::DegenerateMotion: return "DegenerateMotion";
    case Errc::ExtentTooSmall: return "ExtentTooSmall";
    case Errc::TooShort: return "TooShort";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::Io: return "Io";
    case Errc::Parse: return "Parse";
  }
  return "Unknown";
}

}  // namespace lockit
