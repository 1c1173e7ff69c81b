#include "corpuslens/error.hpp"

namespace corpuslens {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyAfterCleaning: return "EmptyAfterCleaning";
    case ErrorCode::NoSegmenter: return "NoSegmenter";
    case ErrorCode::NoTagger: return "NoTagger";
    case ErrorCode::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::TopicOutOfRange: return "TopicOutOfRange";
    case ErrorCode::DocOutOfRange: return "DocOutOfRange";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::WordAbsentFromCorpus: return "WordAbsentFromCorpus";
    case ErrorCode::InvalidMapping: return "InvalidMapping";
    case ErrorCode::TemplateError: return "TemplateError";
    case ErrorCode::MissingSenses: return "MissingSenses";
    case ErrorCode::MissingDescription: return "MissingDescription";
    case ErrorCode::LlmUnavailable: return "LlmUnavailable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::EmptyResponse: return "EmptyResponse";
    case ErrorCode::NodeAbsent: return "NodeAbsent";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::NoNodeSlot: return "NoNodeSlot";
    case ErrorCode::MultipleNodeSlots: return "MultipleNodeSlots";
    case ErrorCode::SlotOutOfRange: return "SlotOutOfRange";
    case ErrorCode::SchemeOverlap: return "SchemeOverlap";
    case ErrorCode::UnknownMatch: return "UnknownMatch";
    case ErrorCode::MissingSection: return "MissingSection";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::PortInUse: return "PortInUse";
    case ErrorCode::CorruptWorkspace: return "CorruptWorkspace";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::JobRunning: return "JobRunning";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
      code_(code),
      detail_(detail) {}

}  // namespace corpuslens
