#pragma once

#include "sqlml/catalog/catalog.hpp"
#include "sqlml/data/pivot.hpp"
#include "sqlml/ir/tensor_ir.hpp"
#include <string>
#include <vector>

namespace sqlml::codegen {

enum class Section { DataLoading, Declarations, ModelAssignments, TrainingLoop, WeightExport };

struct EmitPlan {
   std::vector<Section> sections{Section::DataLoading, Section::Declarations, Section::ModelAssignments, Section::TrainingLoop, Section::WeightExport};
   std::string dialect = "tensorflow";
};

struct EmitOptions {
   /// Print the objective every this many iterations (and after the last)
   std::int64_t printEvery = 1;
};

/// Target-dialect expression for one IR node. Throws Error(UnsupportedNode).
std::string emit_expr(const ir::Expr& e);

/// Python name used for a relation; reserved words get a trailing underscore
std::string python_name(const std::string& name);

/// Mnemonic for each IR operator, for the coverage test
std::string_view elem_mnemonic(ir::ElemOp op);
std::string_view unary_mnemonic(ir::UnaryOp op);
std::string_view reduce_mnemonic(ir::ReduceOp op);

/// Full training script: data loading, declarations, one line per
/// assignment, optimizer loop, weight write-back. CSV loading pivots the
/// tables named in the catalog from a data directory given on the command
/// line; when the catalog has DB settings the script runs the export
/// queries instead, which needs `mapping`.
std::string emit_program(const ir::TensorProgram& prog, const catalog::Catalog& cat, const data::FeatureMapping* mapping = nullptr,
                         const EmitOptions& options = {}, const EmitPlan& plan = {});

/// Model section only: one `name = expr` line per assignment
std::string emit_model_section(const ir::TensorProgram& prog);

struct ExportBundle {
   std::string featuresSql;
   std::string targetsSql;
   /// Loader stanza that reads query results into tensors, key columns dropped
   std::string loader;
};
ExportBundle emit_export_queries(const catalog::Catalog& cat, const data::FeatureMapping& mapping);

}
