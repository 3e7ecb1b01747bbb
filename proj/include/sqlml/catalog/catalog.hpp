#pragma once

#include "sqlml/sql/ast.hpp"
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace sqlml::catalog {

struct PlainRole {
   bool operator==(const PlainRole&) const = default;
};
struct FeaturesRole {
   std::string nameColumn;
   bool operator==(const FeaturesRole&) const = default;
};
struct WeightsRole {
   /// Shape of the weight tensor; empty when it is derived from the data
   std::vector<std::int64_t> dims;
   bool operator==(const WeightsRole&) const = default;
};
struct TargetsRole {
   bool operator==(const TargetsRole&) const = default;
};
struct ObservationsRole {
   bool operator==(const ObservationsRole&) const = default;
};

using TableRole = std::variant<PlainRole, FeaturesRole, WeightsRole, TargetsRole, ObservationsRole>;

struct Hyperparams {
   std::int64_t iterations = 1000;
   double learningRate = 1e-5;
   std::optional<std::int64_t> batchSize;
   std::uint64_t seed = 0;
   /// Weights start uniform in [-initRange, initRange]; 0 means all zeros
   double initRange = 0;
};

struct DbConfig {
   std::string url;
   std::string user;

   bool configured() const { return !url.empty() && !user.empty(); }
};

struct TableEntry {
   sql::CreateTable schema;
   TableRole role;
   /// Column holding the numeric value the tensor is made of
   std::string valueColumn;
   /// Column holding feature names (features and weights tables), else empty
   std::string nameColumn;
};

/// Keys of a view as derived from its definition
struct ViewInfo {
   std::vector<std::string> columns;
   std::string valueColumn;
   /// nullopt when no subset of the output columns is known to be a key
   std::optional<std::set<std::string>> key;
   /// Output columns carrying feature names
   std::set<std::string> nameColumns;
};

/// Schema metadata plus the user's role hints. Immutable once built.
class Catalog {
   public:
   Catalog() = default;

   /// Combine a parsed script with role assignments. Views are analysed for
   /// keys in statement order. Throws Error(ConfigError) on inconsistent hints.
   Catalog(const sql::SqlScript& script, std::vector<std::pair<std::string, TableRole>> roles, Hyperparams hp, DbConfig db);

   const Hyperparams& hyperparams() const { return hyperparams_; }
   const DbConfig& db() const { return db_; }
   Hyperparams& mutable_hyperparams() { return hyperparams_; }

   bool has_table(std::string_view name) const;
   bool has_view(std::string_view name) const;
   /// Throws Error(UnknownTable)
   const TableEntry& table(std::string_view name) const;
   const ViewInfo& view(std::string_view name) const;
   const std::vector<TableEntry>& tables() const { return tables_; }

   /// Feature tables in configuration order
   std::vector<std::string> features_tables() const;
   std::vector<std::string> weights_tables() const;
   const std::string& targets_table() const { return targets_; }
   const std::optional<std::string>& observations_table() const { return observations_; }
   /// Weight table paired with a feature table (a single weight table serves all)
   const std::string& weights_for(std::string_view featuresTable) const;

   bool is_features(std::string_view name) const;
   bool is_weights(std::string_view name) const;

   /// True iff `columns` contain a declared (or, for views, derived) key
   bool is_key(std::string_view relation, const std::vector<std::string>& columns) const;
   /// Key of a relation, nullopt if unknown
   std::optional<std::set<std::string>> key(std::string_view relation) const;
   /// Key of the tensor a relation turns into: its key without feature-name columns
   std::optional<std::set<std::string>> row_key(std::string_view relation) const;
   /// Columns of a table or view
   std::vector<std::string> columns(std::string_view relation) const;
   const std::string& value_column(std::string_view relation) const;
   /// True when `column` of `relation` carries feature names
   bool is_name_column(std::string_view relation, std::string_view column) const;

   /// Key columns that identify an observation
   std::vector<std::string> observation_key() const;
   /// For a feature table, the key columns it shares with observations
   std::vector<std::string> dimension_key(std::string_view featuresTable) const;

   /// Check declared weight dims against the number of features found in the
   /// data, given per feature table in declaration order. Throws ConfigError.
   void check_feature_counts(const std::vector<std::size_t>& perFeaturesTable) const;
   void check_feature_count(std::size_t total) const;
   /// Re-run all structural checks; idempotent
   void validate() const;

   private:
   std::vector<TableEntry> tables_;
   std::map<std::string, ViewInfo, std::less<>> views_;
   std::vector<std::string> viewOrder_;
   std::string targets_;
   std::optional<std::string> observations_;
   Hyperparams hyperparams_;
   DbConfig db_;

   void analyse_view(const sql::CreateView& view);
};

/// Parsed `key = value` configuration
struct ConfigFile {
   std::vector<std::pair<std::string, std::string>> entries;

   const std::string* find(std::string_view key) const;
};

/// Parse the line-oriented config format. `#` starts a comment.
ConfigFile parse_config(std::string_view text);

/// Build a catalog from config text and the script it annotates
Catalog catalog_from_config(const ConfigFile& config, const sql::SqlScript& script);
Catalog load_config(const std::filesystem::path& path, const sql::SqlScript& script);

}
