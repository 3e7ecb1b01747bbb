#pragma once

#include "sqlml/sql/ast.hpp"
#include "sqlml/sql/lexer.hpp"
#include <span>

namespace sqlml::sql {

/// Parse a token stream into a script of CREATE TABLE / CREATE VIEW
/// statements. Throws SourceError with ParseError (unexpected token, lists
/// the expected tokens) or UnsupportedFeature (subqueries, ORDER BY, HAVING,
/// non-equality predicates, ...).
SqlScript parse_script(std::span<const Token> tokens);

/// Convenience: tokenize + parse_script
SqlScript parse_script_text(std::string_view text);

/// Parse one stand-alone SELECT. Its numeric projection must be a computed
/// expression, not a bare column.
SelectQuery parse_select(std::span<const Token> tokens);

/// The unique numeric projection of a parsed query
const NumericExpr& extract_numeric_expr(const SelectQuery& q);

}
