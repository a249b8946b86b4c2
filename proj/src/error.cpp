#include "rbqa/error.hpp"

namespace rbqa {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidChunkParams: return "InvalidChunkParams";
    case ErrorCode::BundleParseError: return "BundleParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::DuplicateDocument: return "DuplicateDocument";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DuplicateChunkId: return "DuplicateChunkId";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::IndexFileError: return "IndexFileError";
    case ErrorCode::IndexUnavailable: return "IndexUnavailable";
    case ErrorCode::EndpointTimeout: return "EndpointTimeout";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::EntityNotFound: return "EntityNotFound";
    case ErrorCode::EmptyQuestion: return "EmptyQuestion";
    case ErrorCode::NoContext: return "NoContext";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::ReplayMiss: return "ReplayMiss";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::FixtureWriteError: return "FixtureWriteError";
    case ErrorCode::ReviewParseError: return "ReviewParseError";
    case ErrorCode::UnknownPairId: return "UnknownPairId";
    case ErrorCode::DatasetError: return "DatasetError";
    case ErrorCode::InvalidJudgment: return "InvalidJudgment";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::MissingMode: return "MissingMode";
    case ErrorCode::NoFailures: return "NoFailures";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::None: return "";
    case Stage::Retrieval: return "retrieval";
    case Stage::Linking: return "linking";
    case Stage::Kg: return "kg";
    case Stage::Prompt: return "prompt";
    case Stage::Llm: return "llm";
  }
  return "";
}

}  // namespace rbqa
