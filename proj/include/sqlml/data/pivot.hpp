#pragma once

#include "sqlml/catalog/catalog.hpp"
#include "sqlml/data/relation.hpp"
#include "sqlml/runtime/interpreter.hpp"
#include "sqlml/translate/translator.hpp"
#include <map>
#include <string>
#include <vector>

namespace sqlml::data {

/// Columns of the global feature matrix: feature tables in catalog order,
/// and within a table the feature names in byte order
struct FeatureMapping {
   struct Table {
      std::string table;
      std::int64_t begin = 0;
      std::vector<std::string> names;
   };
   std::vector<Table> tables;

   std::size_t total() const;
   const Table& table(std::string_view name) const;
   /// Global column of a feature; nullopt if unknown
   std::optional<std::size_t> index_of(std::string_view table, std::string_view name) const;
   std::map<std::string, translate::Range, std::less<>> ranges() const;
   std::vector<std::size_t> counts() const;
};

/// Collect feature names from the feature tables. Throws
/// Error(DuplicateFeatureName) when tables sharing one weights table reuse a
/// name, Error(NonNumericValue) for a NULL feature name.
FeatureMapping build_feature_mapping(const catalog::Catalog& cat, const Database& db);

struct PivotResult {
   /// Observation keys in sorted order, one row per observation
   Relation observations;
   runtime::TensorValue features;
   runtime::TensorValue targets;
   FeatureMapping mapping;
};

/// Dense matrix with one row per observation and one column per feature;
/// absent (observation, feature) pairs are 0. Throws MissingTarget,
/// DuplicateFeatureName or MissingJoinKey.
PivotResult pivot_in_memory(const catalog::Catalog& cat, const Database& db);

/// Bindings for a translated program: bound ranges plus input tensors
struct TrainingData {
   ir::TensorProgram program;
   runtime::Bindings inputs;
   PivotResult pivot;
};
TrainingData prepare_training(const ir::TensorProgram& unbound, const catalog::Catalog& cat, const Database& db);

/// SQL column alias for a feature in a single-table pivot
std::string pivot_alias(const std::string& featureName);
/// Aliases for every global column in the multi-table pivot (lowerFirst + "Value")
std::vector<std::string> multi_table_aliases(const FeatureMapping& mapping);

/// One-table pivot: SELECT key, SUM(CASE WHEN name='f' THEN v ELSE 0.0 END) AS f ... GROUP BY key
std::string gen_pivot_query(const catalog::Catalog& cat, const FeatureMapping& mapping, std::string_view featuresTable);
/// Pivot each feature table in a subquery and join the results to the observations
std::string gen_multi_table_pivot(const catalog::Catalog& cat, const FeatureMapping& mapping);
/// Join all tables first, then pivot the wide join in one aggregation
std::string gen_naive_export(const catalog::Catalog& cat, const FeatureMapping& mapping);
/// The pivot the tool ships: single-table or multi-table form
std::string gen_feature_export(const catalog::Catalog& cat, const FeatureMapping& mapping);
std::string gen_targets_export(const catalog::Catalog& cat);

/// INSERT statements that write trained weights back, one row per feature
std::string gen_weight_import(const catalog::Catalog& cat, const FeatureMapping& mapping, const runtime::Bindings& parameters);
/// featureName,v CSV of trained weights for one weights table
Relation weights_relation(const catalog::Catalog& cat, const FeatureMapping& mapping, const runtime::TensorValue& weights,
                          std::string_view weightsTable);

/// Read the CSVs `dir/<table>.csv` for every table a model needs. Throws
/// Error(MissingInput) for a missing file.
Database load_tables(const catalog::Catalog& cat, const std::filesystem::path& dir);

std::string quote_sql_string(const std::string& s);

}
