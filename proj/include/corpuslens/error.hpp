#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace corpuslens {

enum class ErrorCode {
  ParseError,
  DuplicateId,
  EmptyAfterCleaning,
  NoSegmenter,
  NoTagger,
  EmptyVocabulary,
  EmptyCorpus,
  InvalidConfig,
  TopicOutOfRange,
  DocOutOfRange,
  KTooLarge,
  WordAbsentFromCorpus,
  InvalidMapping,
  TemplateError,
  MissingSenses,
  MissingDescription,
  LlmUnavailable,
  MalformedResponse,
  EmptyResponse,
  NodeAbsent,
  SyntaxError,
  NoNodeSlot,
  MultipleNodeSlots,
  SlotOutOfRange,
  SchemeOverlap,
  UnknownMatch,
  MissingSection,
  UsageError,
  PortInUse,
  CorruptWorkspace,
  MissingArtifact,
  JobRunning,
  IoError,
};

std::string_view error_code_name(ErrorCode code);

// All pipeline failures surface as this type; `code()` is the machine-readable
// part, `what()` the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const { return error_code_name(code_); }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace corpuslens
