#pragma once

#include "sqlml/catalog/catalog.hpp"
#include "sqlml/ir/tensor_ir.hpp"
#include "sqlml/sql/ast.hpp"
#include <map>
#include <string>
#include <vector>

namespace sqlml::translate {

/// View names so that every view follows the views it reads. Throws
/// Error(CyclicDependency).
std::vector<std::string> order_views(const sql::SqlScript& script);

/// Axis an aggregate of this query reduces over: no GROUP BY reduces
/// everything, grouping by a relation's row key reduces its feature axis,
/// any other grouping reduces over rows
ir::Axis infer_reduce_axis(const sql::SelectQuery& q, const catalog::Catalog& cat);

/// Translate the numeric projection of `q`. Column references become tensor
/// variables named after their relation.
ir::ExprPtr translate_numeric_expr(const sql::NumericExpr& e, const sql::SelectQuery& q, const catalog::Catalog& cat);

ir::Assignment translate_view(const sql::CreateView& view, const catalog::Catalog& cat);

/// Whole script to a validated tensor program whose objective is the last
/// view in dependency order. Several feature tables are addressed through
/// slices of one global `features` matrix.
ir::TensorProgram translate_script(const sql::SqlScript& script, const catalog::Catalog& cat);

/// Replace per-table feature (and shared weight) references with symbolic
/// slices of the global matrix. A single feature table is left as is.
ir::TensorProgram rewrite_to_global(const ir::TensorProgram& p, const catalog::Catalog& cat);

/// Name of the global feature matrix in a rewritten program
std::string global_features_name(const catalog::Catalog& cat);

struct Range {
   std::int64_t begin = 0, length = 0;
};

/// Turn symbolic slices into concrete bounds. Throws Error(Internal) for a
/// range that is not supplied. Declared feature dims become literal sizes.
ir::TensorProgram bind_ranges(const ir::TensorProgram& p, const std::map<std::string, Range, std::less<>>& ranges);

/// One row per SQL construct the translator accepts
struct OperatorMapping {
   std::string sql;
   std::string ir;
};
const std::vector<OperatorMapping>& operator_table();

}
