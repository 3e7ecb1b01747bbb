#pragma once

#include "sqlml/sql/ast.hpp"
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sqlml::data {

using Value = std::variant<std::monostate, std::int64_t, double, std::string>;

bool is_null(const Value& v);
/// Numeric value as double; nullopt for NULL and strings
std::optional<double> as_double(const Value& v);
std::string value_text(const Value& v);
/// Total order: NULL < numbers (compared numerically) < strings
bool value_less(const Value& a, const Value& b);
bool value_equal(const Value& a, const Value& b);

struct Relation {
   std::string name;
   std::vector<std::string> columns;
   std::vector<std::vector<Value>> rows;

   /// Index of a column; throws Error(SchemaMismatch) when absent
   std::size_t column_index(std::string_view column) const;
   std::optional<std::size_t> find_column(std::string_view column) const;
};

using Database = std::map<std::string, Relation, std::less<>>;

/// RFC 4180 records. Throws Error(IoError) on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text);

/// Parse CSV with a header row into a relation typed by `schema`. Header
/// names must be the schema's columns, in any order. Empty fields are NULL.
/// Throws NonNumericValue, LengthMismatch or SchemaMismatch.
Relation parse_csv(std::string_view text, const sql::CreateTable& schema);
Relation read_csv(const std::filesystem::path& path, const sql::CreateTable& schema);

std::string to_csv(const Relation& r);
std::string csv_field(const std::string& text);

}
