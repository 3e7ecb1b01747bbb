#pragma once

#include "sqlml/data/relation.hpp"
#include <cstdint>
#include <string_view>

namespace sqlml::data {

/// Work done while executing a query
struct EvalCounters {
   /// CASE expressions evaluated
   std::uint64_t caseEvaluations = 0;
   /// Rows surviving the join
   std::uint64_t joinedRows = 0;
   /// Aggregate values finalized (groups x aggregate columns)
   std::uint64_t aggregateCells = 0;

   std::uint64_t total() const { return caseEvaluations + joinedRows + aggregateCells; }
};

/// Execute one SELECT of the form the export generators write: column
/// references, SUM/MAX/MIN/COUNT, COALESCE, CASE WHEN a = b THEN x [ELSE y]
/// END, comma joins with equality predicates, subqueries in FROM, GROUP BY.
/// Grouped results come out sorted by group key. Throws Error(ParseError)
/// for anything else.
Relation execute_select(std::string_view sql, const Database& db, EvalCounters* counters = nullptr);

/// Apply `INSERT INTO t(c, ...) VALUES (...), ...;` statements. Unknown
/// tables are created with the listed columns.
void execute_inserts(std::string_view sql, Database& db);

}
