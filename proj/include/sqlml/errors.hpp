#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sqlml {

/// Stable machine-readable error categories. The CLI maps them to exit codes.
enum class ErrorCode {
   Internal,
   Usage,
   LexError,
   ParseError,
   UnsupportedFeature,
   UnsupportedOperator,
   UnsupportedNode,
   CyclicDependency,
   ConfigError,
   UnknownTable,
   UnmappedTable,
   ShapeMismatch,
   DuplicateFeatureName,
   MissingJoinKey,
   MissingTarget,
   MissingInput,
   NonNumericValue,
   SchemaMismatch,
   TypeError,
   LengthMismatch,
   NonFiniteValue,
   NonFiniteGradient,
   DivergenceDetected,
   GradientCheckFailed,
   IoError,
};

std::string_view error_code_name(ErrorCode code);
/// Process exit status used by the command line tool for a given category.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
   public:
   Error(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}

   ErrorCode code() const noexcept { return code_; }

   private:
   ErrorCode code_;
};

/// 1-based position inside a source text
struct SourcePos {
   std::size_t offset = 0;
   std::size_t line = 1;
   std::size_t column = 1;

   bool operator==(const SourcePos&) const = default;
};

/// An error tied to a location in SQL source text
class SourceError : public Error {
   public:
   SourceError(ErrorCode code, SourcePos pos, const std::string& message);

   const SourcePos& pos() const noexcept { return pos_; }
   /// Message without the "line:column" prefix
   const std::string& detail() const noexcept { return detail_; }

   private:
   SourcePos pos_;
   std::string detail_;
};

}
