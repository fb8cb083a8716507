#pragma once

#include <stdexcept>
#include <string>

namespace cdjp {

enum class Errc {
  MissingChannels,
  EmptyCorpus,
  Unsupported,
  LengthMismatch,
  BadDimensions,
  ConfigMismatch,
  ShapeMismatch,
  BadLabel,
  NonFiniteActivation,
  NoForwardCache,
  ManifestMismatch,
  NonFiniteLoss,
  UnknownLayer,
  UnknownId,
  DegenerateSplit,
  InvalidArgument,
  Config,
  Io,
  Format,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace cdjp
