#pragma once

#include <stdexcept>
#include <string>

namespace multimix {

enum class Errc {
  MalformedLine,
  LabelLengthMismatch,
  UnknownLabel,
  DuplicateId,
  IoFailure,
  EmptyDataset,
  InvalidDistribution,
  UnlabeledData,
  NonFiniteLoss,
  DuplicateSeeds,
  EmptyCorpus,
  IndexOutOfRange,
  TooFewSamples,
  MismatchedVocab,
  EmptySizes,
  ZeroSize,
  EpochOutOfRange,
  ConfigArityMismatch,
  SchemeViolation,
  LengthMismatch,
  ConfigInvalid,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::LabelLengthMismatch: return "LabelLengthMismatch";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::IoFailure: return "IoFailure";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::InvalidDistribution: return "InvalidDistribution";
    case Errc::UnlabeledData: return "UnlabeledData";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::DuplicateSeeds: return "DuplicateSeeds";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::MismatchedVocab: return "MismatchedVocab";
    case Errc::EmptySizes: return "EmptySizes";
    case Errc::ZeroSize: return "ZeroSize";
    case Errc::EpochOutOfRange: return "EpochOutOfRange";
    case Errc::ConfigArityMismatch: return "ConfigArityMismatch";
    case Errc::SchemeViolation: return "SchemeViolation";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

/// Library-wide exception; carries a machine-checkable code plus context.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace multimix
