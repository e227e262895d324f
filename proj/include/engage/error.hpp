#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

namespace engage {

/// Every failure the library reports. The string form (see to_string) is the
/// stable wire code used by the CLI diagnostics and the HTTP API.
enum class ErrorCode {
  // corpus
  EmptyTranscript,
  DuplicateSegmentId,
  InvalidGrade,
  InvalidTrimester,
  MalformedRecord,
  MissingFile,
  RegistryGap,
  // codebook
  TranscriptMismatch,
  // keyness
  UnvalidatedAnnotation,
  EmptyMessageSide,
  EmptyBackground,
  // filtering
  EmptyKeywordList,
  OrphanAnnotation,
  DegenerateGoldSpan,
  // selection
  NoFeasibleList,
  // reliability
  CorpusMismatch,
  NoUnits,
  // analytics
  UnresolvedDuplicates,
  MissingRegistryEntry,
  ZeroGroups,
  ZeroTotal,
  IoFailure,
  // coding service
  UnknownCorpus,
  UnknownFilteredSet,
  EmptyRoster,
  DoubleNeedsTwo,
  UnknownSession,
  UnknownCoder,
  UnknownItem,
  SessionClosed,
  ValidationFailed,
  LeaseLost,
  DuplicateSubmission,
  NotDoubleCoded,
  Unauthorized,
  BadRequest,
  // generic
  InvalidArgument,
  UsageError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyTranscript: return "EmptyTranscript";
    case ErrorCode::DuplicateSegmentId: return "DuplicateSegmentId";
    case ErrorCode::InvalidGrade: return "InvalidGrade";
    case ErrorCode::InvalidTrimester: return "InvalidTrimester";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::RegistryGap: return "RegistryGap";
    case ErrorCode::TranscriptMismatch: return "TranscriptMismatch";
    case ErrorCode::UnvalidatedAnnotation: return "UnvalidatedAnnotation";
    case ErrorCode::EmptyMessageSide: return "EmptyMessageSide";
    case ErrorCode::EmptyBackground: return "EmptyBackground";
    case ErrorCode::EmptyKeywordList: return "EmptyKeywordList";
    case ErrorCode::OrphanAnnotation: return "OrphanAnnotation";
    case ErrorCode::DegenerateGoldSpan: return "DegenerateGoldSpan";
    case ErrorCode::NoFeasibleList: return "NoFeasibleList";
    case ErrorCode::CorpusMismatch: return "CorpusMismatch";
    case ErrorCode::NoUnits: return "NoUnits";
    case ErrorCode::UnresolvedDuplicates: return "UnresolvedDuplicates";
    case ErrorCode::MissingRegistryEntry: return "MissingRegistryEntry";
    case ErrorCode::ZeroGroups: return "ZeroGroups";
    case ErrorCode::ZeroTotal: return "ZeroTotal";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::UnknownCorpus: return "UnknownCorpus";
    case ErrorCode::UnknownFilteredSet: return "UnknownFilteredSet";
    case ErrorCode::EmptyRoster: return "EmptyRoster";
    case ErrorCode::DoubleNeedsTwo: return "DoubleNeedsTwo";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownCoder: return "UnknownCoder";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::SessionClosed: return "SessionClosed";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::LeaseLost: return "LeaseLost";
    case ErrorCode::DuplicateSubmission: return "DuplicateSubmission";
    case ErrorCode::NotDoubleCoded: return "NotDoubleCoded";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code plus free-form details.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message),
        details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  const nlohmann::json& details() const noexcept { return details_; }

  /// {code, message, details}
  nlohmann::json to_json() const {
    return {{"code", std::string(to_string(code_))},
            {"message", message_},
            {"details", details_}};
  }

 private:
  ErrorCode code_;
  std::string message_;
  nlohmann::json details_;
};

}  // namespace engage
