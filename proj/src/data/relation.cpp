#include "sqlml/data/relation.hpp"
#include "sqlml/errors.hpp"
#include "sqlml/runtime/interpreter.hpp"
#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace sqlml::data {

bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

std::optional<double> as_double(const Value& v) {
   if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
   if (auto* d = std::get_if<double>(&v)) return *d;
   return std::nullopt;
}

std::string value_text(const Value& v) {
   if (is_null(v)) return "";
   if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
   if (auto* d = std::get_if<double>(&v)) return runtime::format_double(*d);
   return std::get<std::string>(v);
}

namespace {

int rank(const Value& v) {
   if (is_null(v)) return 0;
   if (std::holds_alternative<std::string>(v)) return 2;
   return 1;
}

}

bool value_less(const Value& a, const Value& b) {
   int ra = rank(a), rb = rank(b);
   if (ra != rb) return ra < rb;
   if (ra == 1) {
      if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b)) return std::get<std::int64_t>(a) < std::get<std::int64_t>(b);
      return *as_double(a) < *as_double(b);
   }
   if (ra == 2) return std::get<std::string>(a) < std::get<std::string>(b);
   return false;
}

bool value_equal(const Value& a, const Value& b) { return !value_less(a, b) && !value_less(b, a); }

std::optional<std::size_t> Relation::find_column(std::string_view column) const {
   for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == column) return i;
   return std::nullopt;
}

std::size_t Relation::column_index(std::string_view column) const {
   auto i = find_column(column);
   if (!i) throw Error(ErrorCode::SchemaMismatch, "relation '" + name + "' has no column '" + std::string(column) + "'");
   return *i;
}

std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
   std::vector<std::vector<std::string>> records;
   std::vector<std::string> record;
   std::string field;
   bool quoted = false, fieldStarted = false;
   std::size_t i = 0;
   auto end_record = [&] {
      record.push_back(std::move(field));
      field.clear();
      if (!(record.size() == 1 && record[0].empty() && !fieldStarted)) records.push_back(std::move(record));
      record.clear();
      fieldStarted = false;
   };
   while (i < text.size()) {
      char c = text[i];
      if (quoted) {
         if (c == '"') {
            if (i + 1 < text.size() && text[i + 1] == '"') {
               field += '"';
               i += 2;
               continue;
            }
            quoted = false;
         } else {
            field += c;
         }
         ++i;
         continue;
      }
      if (c == '"') {
         quoted = true;
         fieldStarted = true;
      } else if (c == ',') {
         record.push_back(std::move(field));
         field.clear();
         fieldStarted = true;
      } else if (c == '\n' || c == '\r') {
         if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
         end_record();
      } else {
         field += c;
         fieldStarted = true;
      }
      ++i;
   }
   if (quoted) throw Error(ErrorCode::IoError, "unterminated quoted CSV field");
   if (fieldStarted || !field.empty() || !record.empty()) end_record();
   return records;
}

namespace {

Value convert(const std::string& text, sql::ColumnType type, const std::string& where) {
   if (text.empty()) return std::monostate{};
   if (type == sql::ColumnType::String) return text;
   std::string_view t = text;
   while (!t.empty() && t.front() == ' ') t.remove_prefix(1);
   while (!t.empty() && t.back() == ' ') t.remove_suffix(1);
   if (t.empty()) return std::monostate{};
   if (type == sql::ColumnType::Int) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec == std::errc() && ptr == t.data() + t.size()) return v;
      throw Error(ErrorCode::NonNumericValue, where + ": '" + text + "' is not an integer");
   }
   double v = 0;
   auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
   if (ec == std::errc() && ptr == t.data() + t.size()) return v;
   throw Error(ErrorCode::NonNumericValue, where + ": '" + text + "' is not a number");
}

}

Relation parse_csv(std::string_view text, const sql::CreateTable& schema) {
   auto records = parse_csv_records(text);
   if (records.empty()) throw Error(ErrorCode::SchemaMismatch, "CSV for '" + schema.name + "' has no header row");
   auto& header = records.front();
   Relation r;
   r.name = schema.name;
   for (auto& c : schema.columns) r.columns.push_back(c.name);
   std::vector<std::size_t> position(schema.columns.size());
   if (header.size() != schema.columns.size())
      throw Error(ErrorCode::SchemaMismatch, "CSV for '" + schema.name + "' has " + std::to_string(header.size()) + " columns, the table declares " +
                                                std::to_string(schema.columns.size()));
   for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      auto it = std::find(header.begin(), header.end(), schema.columns[c].name);
      if (it == header.end()) throw Error(ErrorCode::SchemaMismatch, "CSV for '" + schema.name + "' lacks column '" + schema.columns[c].name + "'");
      position[c] = static_cast<std::size_t>(it - header.begin());
   }
   for (std::size_t line = 1; line < records.size(); ++line) {
      auto& rec = records[line];
      std::string where = schema.name + ".csv line " + std::to_string(line + 1);
      if (rec.size() != header.size())
         throw Error(ErrorCode::LengthMismatch, where + ": " + std::to_string(rec.size()) + " fields, expected " + std::to_string(header.size()));
      std::vector<Value> row;
      for (std::size_t c = 0; c < schema.columns.size(); ++c) row.push_back(convert(rec[position[c]], schema.columns[c].type, where));
      r.rows.push_back(std::move(row));
   }
   return r;
}

Relation read_csv(const std::filesystem::path& path, const sql::CreateTable& schema) {
   std::ifstream in(path, std::ios::binary);
   if (!in) throw Error(ErrorCode::MissingInput, "cannot read '" + path.string() + "'");
   std::ostringstream text;
   text << in.rdbuf();
   return parse_csv(text.str(), schema);
}

std::string csv_field(const std::string& text) {
   if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
   std::string out = "\"";
   for (char c : text) {
      if (c == '"') out += '"';
      out += c;
   }
   return out + "\"";
}

std::string to_csv(const Relation& r) {
   std::string out;
   for (std::size_t i = 0; i < r.columns.size(); ++i) out += (i ? "," : "") + csv_field(r.columns[i]);
   out += '\n';
   for (auto& row : r.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(value_text(row[i]));
      out += '\n';
   }
   return out;
}

}
