#include "sqlml/errors.hpp"

namespace sqlml {

std::string_view error_code_name(ErrorCode code) {
   switch (code) {
      case ErrorCode::Internal: return "Internal";
      case ErrorCode::Usage: return "Usage";
      case ErrorCode::LexError: return "LexError";
      case ErrorCode::ParseError: return "ParseError";
      case ErrorCode::UnsupportedFeature: return "UnsupportedFeature";
      case ErrorCode::UnsupportedOperator: return "UnsupportedOperator";
      case ErrorCode::UnsupportedNode: return "UnsupportedNode";
      case ErrorCode::CyclicDependency: return "CyclicDependency";
      case ErrorCode::ConfigError: return "ConfigError";
      case ErrorCode::UnknownTable: return "UnknownTable";
      case ErrorCode::UnmappedTable: return "UnmappedTable";
      case ErrorCode::ShapeMismatch: return "ShapeMismatch";
      case ErrorCode::DuplicateFeatureName: return "DuplicateFeatureName";
      case ErrorCode::MissingJoinKey: return "MissingJoinKey";
      case ErrorCode::MissingTarget: return "MissingTarget";
      case ErrorCode::MissingInput: return "MissingInput";
      case ErrorCode::NonNumericValue: return "NonNumericValue";
      case ErrorCode::SchemaMismatch: return "SchemaMismatch";
      case ErrorCode::TypeError: return "TypeError";
      case ErrorCode::LengthMismatch: return "LengthMismatch";
      case ErrorCode::NonFiniteValue: return "NonFiniteValue";
      case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
      case ErrorCode::DivergenceDetected: return "DivergenceDetected";
      case ErrorCode::GradientCheckFailed: return "GradientCheckFailed";
      case ErrorCode::IoError: return "IoError";
   }
   return "Internal";
}

int exit_status(ErrorCode code) {
   switch (code) {
      case ErrorCode::Usage: return 2;
      case ErrorCode::LexError:
      case ErrorCode::ParseError:
      case ErrorCode::UnsupportedFeature: return 3;
      case ErrorCode::UnsupportedOperator:
      case ErrorCode::UnsupportedNode:
      case ErrorCode::CyclicDependency:
      case ErrorCode::UnmappedTable:
      case ErrorCode::ShapeMismatch: return 4;
      case ErrorCode::ConfigError:
      case ErrorCode::UnknownTable: return 5;
      case ErrorCode::MissingInput:
      case ErrorCode::IoError: return 6;
      case ErrorCode::DuplicateFeatureName:
      case ErrorCode::MissingJoinKey:
      case ErrorCode::MissingTarget:
      case ErrorCode::NonNumericValue:
      case ErrorCode::SchemaMismatch:
      case ErrorCode::TypeError:
      case ErrorCode::LengthMismatch: return 7;
      case ErrorCode::NonFiniteValue:
      case ErrorCode::NonFiniteGradient:
      case ErrorCode::DivergenceDetected: return 8;
      case ErrorCode::GradientCheckFailed: return 9;
      case ErrorCode::Internal: return 1;
   }
   return 1;
}

SourceError::SourceError(ErrorCode code, SourcePos pos, const std::string& message)
   : Error(code, std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + message), pos_(pos), detail_(message) {}

}
