#pragma once

#include <stdexcept>
#include <string>

namespace brm {

enum class ErrorKind {
  DegenerateNorm,
  DimensionMismatch,
  ShapeMismatch,
  BatchTooSmall,
  NotNormalized,
  EmptyPairSet,
  NoValidTriplet,
  NoNegativePartner,
  CacheMismatch,
  InvalidConfig,
  NotSquare,
  InsufficientClassSamples,
  BadMagic,
  TruncatedFile,
  LabelOutOfRange,
  EmptyTrainSet,
  SingleClass,
  DegenerateBatch,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure surfaced by the library carries a kind so callers (the CLI in
// particular) can map it onto an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace brm
