#include "cdjp/error.hpp"

namespace cdjp {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MissingChannels: return "MissingChannels";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::Unsupported: return "Unsupported";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::BadDimensions: return "BadDimensions";
    case Errc::ConfigMismatch: return "ConfigMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::BadLabel: return "BadLabel";
    case Errc::NonFiniteActivation: return "NonFiniteActivation";
    case Errc::NoForwardCache: return "NoForwardCache";
    case Errc::ManifestMismatch: return "ManifestMismatch";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::UnknownLayer: return "UnknownLayer";
    case Errc::UnknownId: return "UnknownId";
    case Errc::DegenerateSplit: return "DegenerateSplit";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Config: return "Config";
    case Errc::Io: return "Io";
    case Errc::Format: return "Format";
  }
  return "Unknown";
}

}  // namespace cdjp
