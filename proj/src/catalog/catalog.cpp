#include "sqlml/catalog/catalog.hpp"
#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

namespace sqlml::catalog {

namespace {

[[noreturn]] void config_error(const std::string& message) {
   throw Error(ErrorCode::ConfigError, message);
}

bool contains(const std::vector<std::string>& v, std::string_view x) {
   return std::find(v.begin(), v.end(), x) != v.end();
}

std::string pick_value_column(const sql::CreateTable& t, const std::string& nameColumn) {
   std::vector<std::string> candidates;
   for (auto& c : t.columns) {
      if (c.type == sql::ColumnType::String || c.name == nameColumn || contains(t.primaryKey, c.name)) continue;
      candidates.push_back(c.name);
   }
   if (candidates.size() == 1) return candidates.front();
   if (contains(candidates, "v")) return "v";
   config_error("table '" + t.name + "' needs exactly one numeric value column outside its key, found " + std::to_string(candidates.size()));
}

std::string pick_weights_name_column(const sql::CreateTable& t) {
   std::vector<std::string> strings;
   for (auto& c : t.columns)
      if (c.type == sql::ColumnType::String) strings.push_back(c.name);
   if (strings.size() == 1) return strings.front();
   for (auto& k : t.primaryKey)
      if (contains(strings, k)) return k;
   config_error("weights table '" + t.name + "' needs a string column holding feature names");
}

std::vector<std::string> ordered_subset(const sql::CreateTable& t, const std::set<std::string>& keep) {
   std::vector<std::string> out;
   for (auto& c : t.columns)
      if (keep.count(c.name)) out.push_back(c.name);
   return out;
}

}

Catalog::Catalog(const sql::SqlScript& script, std::vector<std::pair<std::string, TableRole>> roles, Hyperparams hp, DbConfig db)
   : hyperparams_(std::move(hp)), db_(std::move(db)) {
   for (auto& [name, role] : roles) {
      if (script.find_view(name)) config_error("'" + name + "' is a view; roles apply to tables only");
      if (!script.find_table(name)) config_error("unknown table '" + name + "' in configuration");
   }
   for (auto* t : script.tables()) {
      TableEntry entry{*t, PlainRole{}, "", ""};
      std::size_t assigned = 0;
      for (auto& [name, role] : roles)
         if (name == t->name) {
            entry.role = role;
            ++assigned;
         }
      if (assigned > 1) config_error("table '" + t->name + "' has more than one role");
      tables_.push_back(std::move(entry));
   }
   // feature tables in configuration order
   std::vector<TableEntry> ordered;
   for (auto& [name, role] : roles)
      for (auto& e : tables_)
         if (e.schema.name == name) ordered.push_back(e);
   for (auto& e : tables_)
      if (std::none_of(roles.begin(), roles.end(), [&](auto& r) { return r.first == e.schema.name; })) ordered.push_back(e);
   tables_ = std::move(ordered);

   for (auto& e : tables_) {
      if (auto* f = std::get_if<FeaturesRole>(&e.role)) {
         auto* col = e.schema.find_column(f->nameColumn);
         if (!col) config_error("feature name column '" + f->nameColumn + "' does not exist in table '" + e.schema.name + "'");
         if (col->type != sql::ColumnType::String) config_error("feature name column '" + e.schema.name + "." + f->nameColumn + "' must have string type");
         e.nameColumn = f->nameColumn;
         e.valueColumn = pick_value_column(e.schema, e.nameColumn);
      } else if (std::holds_alternative<WeightsRole>(e.role)) {
         e.nameColumn = pick_weights_name_column(e.schema);
         e.valueColumn = pick_value_column(e.schema, e.nameColumn);
      } else if (std::holds_alternative<TargetsRole>(e.role)) {
         if (!targets_.empty()) config_error("exactly one targets table is allowed");
         targets_ = e.schema.name;
         e.valueColumn = pick_value_column(e.schema, "");
      } else if (std::holds_alternative<ObservationsRole>(e.role)) {
         if (observations_) config_error("at most one observations table is allowed");
         observations_ = e.schema.name;
      } else {
         std::vector<std::string> numeric;
         for (auto& c : e.schema.columns)
            if (c.type != sql::ColumnType::String && !contains(e.schema.primaryKey, c.name)) numeric.push_back(c.name);
         if (numeric.size() == 1) e.valueColumn = numeric.front();
         else if (contains(numeric, "v")) e.valueColumn = "v";
      }
   }
   validate();
   for (auto* v : sql::views_in_dependency_order(script)) analyse_view(*v);
}

void Catalog::validate() const {
   std::size_t features = 0, weights = 0, targets = 0, observations = 0;
   for (auto& e : tables_) {
      std::visit(
         [&](auto& role) {
            using R = std::decay_t<decltype(role)>;
            if constexpr (std::is_same_v<R, FeaturesRole>) {
               ++features;
               auto* col = e.schema.find_column(role.nameColumn);
               if (!col || col->type != sql::ColumnType::String) config_error("feature name column of '" + e.schema.name + "' must be a string column");
            } else if constexpr (std::is_same_v<R, WeightsRole>) {
               ++weights;
               if (role.dims.size() > 1) config_error("weights table '" + e.schema.name + "': only vector weights (one dimension) are supported");
               for (auto d : role.dims)
                  if (d <= 0) config_error("weights dims must be positive");
            } else if constexpr (std::is_same_v<R, TargetsRole>) {
               ++targets;
            } else if constexpr (std::is_same_v<R, ObservationsRole>) {
               ++observations;
            }
         },
         e.role);
      if (!std::holds_alternative<PlainRole>(e.role) && !std::holds_alternative<ObservationsRole>(e.role)) {
         auto* value = e.schema.find_column(e.valueColumn);
         if (!value || value->type == sql::ColumnType::String)
            config_error("table '" + e.schema.name + "' has no numeric value column");
      }
   }
   if (targets != 1) config_error("exactly one targets table is required");
   if (features == 0) config_error("at least one features table is required");
   if (weights == 0) config_error("at least one weights table is required");
   if (weights != 1 && weights != features)
      config_error("expected one weights table, or one per features table (" + std::to_string(features) + "), got " + std::to_string(weights));
   if (observations > 1) config_error("at most one observations table is allowed");
   if (hyperparams_.iterations < 1) config_error("gd.iterations must be at least 1");
   if (!(hyperparams_.learningRate > 0)) config_error("gd.learning_rate must be positive");
   if (hyperparams_.batchSize && *hyperparams_.batchSize < 1) config_error("gd.batch_size must be positive");
   if (!(hyperparams_.initRange >= 0)) config_error("gd.init_range must be non-negative");
}

void Catalog::analyse_view(const sql::CreateView& view) {
   const auto& q = view.query;
   for (auto& from : q.fromTables)
      if (!has_table(from) && !has_view(from)) throw Error(ErrorCode::UnknownTable, "view '" + view.name + "' reads unknown relation '" + from + "'");

   ViewInfo info;
   sql::JoinClosure classes(q);
   std::vector<std::pair<std::string, sql::ColumnRef>> plain;  // alias, source column
   for (std::size_t i = 0; i < q.projections.size(); ++i) {
      info.columns.push_back(q.projections[i].alias);
      if (i == q.numericIndex) continue;
      plain.emplace_back(q.projections[i].alias, q.projections[i].expr.column);
   }
   info.valueColumn = q.numeric_projection().alias;

   auto alias_for = [&](const sql::ColumnRef& qualified) -> std::optional<std::string> {
      for (auto& [alias, source] : plain)
         if (classes.same(source, qualified)) return alias;
      return std::nullopt;
   };

   for (auto& [alias, source] : plain)
      for (auto& from : q.fromTables)
         for (auto& col : columns(from))
            if (is_name_column(from, col) && classes.same(source, sql::ColumnRef{from, col})) info.nameColumns.insert(alias);

   if (q.groupBy) {
      std::set<std::string> key;
      bool complete = true;
      for (auto& g : *q.groupBy) {
         auto alias = alias_for(g);
         if (!alias) complete = false;
         else key.insert(*alias);
      }
      if (complete) info.key = key;
   } else if (q.numeric_projection().expr.contains_aggregate()) {
      info.key = std::set<std::string>{};
   } else {
      std::set<std::string> key;
      bool complete = true;
      for (auto& from : q.fromTables) {
         auto sourceKey = this->key(from);
         if (!sourceKey) {
            complete = false;
            break;
         }
         for (auto& col : *sourceKey) {
            auto alias = alias_for(sql::ColumnRef{from, col});
            if (!alias) complete = false;
            else key.insert(*alias);
         }
      }
      if (complete) info.key = key;
   }
   views_[view.name] = std::move(info);
   viewOrder_.push_back(view.name);
}

bool Catalog::has_table(std::string_view name) const {
   return std::any_of(tables_.begin(), tables_.end(), [&](auto& e) { return e.schema.name == name; });
}

bool Catalog::has_view(std::string_view name) const { return views_.find(name) != views_.end(); }

const TableEntry& Catalog::table(std::string_view name) const {
   for (auto& e : tables_)
      if (e.schema.name == name) return e;
   throw Error(ErrorCode::UnknownTable, "unknown table '" + std::string(name) + "'");
}

const ViewInfo& Catalog::view(std::string_view name) const {
   auto it = views_.find(name);
   if (it == views_.end()) throw Error(ErrorCode::UnknownTable, "unknown view '" + std::string(name) + "'");
   return it->second;
}

std::vector<std::string> Catalog::features_tables() const {
   std::vector<std::string> out;
   for (auto& e : tables_)
      if (std::holds_alternative<FeaturesRole>(e.role)) out.push_back(e.schema.name);
   return out;
}

std::vector<std::string> Catalog::weights_tables() const {
   std::vector<std::string> out;
   for (auto& e : tables_)
      if (std::holds_alternative<WeightsRole>(e.role)) out.push_back(e.schema.name);
   return out;
}

const std::string& Catalog::weights_for(std::string_view featuresTable) const {
   auto features = features_tables();
   auto weights = weights_tables();
   auto it = std::find(features.begin(), features.end(), featuresTable);
   if (it == features.end()) throw Error(ErrorCode::UnknownTable, "'" + std::string(featuresTable) + "' is not a features table");
   const std::string& name = weights.size() == 1 ? weights.front() : weights[static_cast<std::size_t>(it - features.begin())];
   return table(name).schema.name;
}

bool Catalog::is_features(std::string_view name) const {
   return has_table(name) && std::holds_alternative<FeaturesRole>(table(name).role);
}

bool Catalog::is_weights(std::string_view name) const {
   return has_table(name) && std::holds_alternative<WeightsRole>(table(name).role);
}

std::optional<std::set<std::string>> Catalog::key(std::string_view relation) const {
   if (has_view(relation)) return view(relation).key;
   const auto& e = table(relation);
   if (!e.schema.primaryKey.empty()) return std::set<std::string>(e.schema.primaryKey.begin(), e.schema.primaryKey.end());
   if (std::holds_alternative<PlainRole>(e.role)) return std::nullopt;
   std::set<std::string> all;
   for (auto& c : e.schema.columns)
      if (c.name != e.valueColumn) all.insert(c.name);
   return all;
}

std::optional<std::set<std::string>> Catalog::row_key(std::string_view relation) const {
   auto k = key(relation);
   if (!k) return k;
   for (auto it = k->begin(); it != k->end();) {
      if (is_name_column(relation, *it)) it = k->erase(it);
      else ++it;
   }
   return k;
}

bool Catalog::is_key(std::string_view relation, const std::vector<std::string>& columns) const {
   auto k = key(relation);
   if (!k) return false;
   return std::all_of(k->begin(), k->end(), [&](const std::string& c) { return contains(columns, c); });
}

std::vector<std::string> Catalog::columns(std::string_view relation) const {
   if (has_view(relation)) return view(relation).columns;
   std::vector<std::string> out;
   for (auto& c : table(relation).schema.columns) out.push_back(c.name);
   return out;
}

const std::string& Catalog::value_column(std::string_view relation) const {
   if (has_view(relation)) return view(relation).valueColumn;
   return table(relation).valueColumn;
}

bool Catalog::is_name_column(std::string_view relation, std::string_view column) const {
   if (has_view(relation)) return view(relation).nameColumns.count(std::string(column)) > 0;
   const auto& e = table(relation);
   return !e.nameColumn.empty() && e.nameColumn == column;
}

std::vector<std::string> Catalog::observation_key() const {
   if (observations_) {
      const auto& e = table(*observations_);
      if (!e.schema.primaryKey.empty()) return ordered_subset(e.schema, {e.schema.primaryKey.begin(), e.schema.primaryKey.end()});
      return columns(*observations_);
   }
   const auto& t = table(targets_);
   auto k = key(targets_);
   return ordered_subset(t.schema, *k);
}

std::vector<std::string> Catalog::dimension_key(std::string_view featuresTable) const {
   const auto& e = table(featuresTable);
   auto k = row_key(featuresTable);
   return ordered_subset(e.schema, *k);
}

void Catalog::check_feature_counts(const std::vector<std::size_t>& perFeaturesTable) const {
   auto features = features_tables();
   auto weights = weights_tables();
   if (perFeaturesTable.size() != features.size()) throw Error(ErrorCode::Internal, "feature count list does not match the features tables");
   std::size_t total = std::accumulate(perFeaturesTable.begin(), perFeaturesTable.end(), std::size_t{0});
   for (std::size_t w = 0; w < weights.size(); ++w) {
      auto& dims = std::get<WeightsRole>(table(weights[w]).role).dims;
      if (dims.empty()) continue;
      std::size_t expected = weights.size() == 1 ? total : perFeaturesTable[w];
      std::int64_t product = 1;
      for (auto d : dims) product *= d;
      if (static_cast<std::size_t>(product) != expected)
         config_error("weights dims mismatch for '" + weights[w] + "': declared " + std::to_string(product) + " weights but the data has " +
                      std::to_string(expected) + " features");
   }
}

void Catalog::check_feature_count(std::size_t total) const {
   if (features_tables().size() != 1) throw Error(ErrorCode::Internal, "check_feature_count needs a single features table");
   check_feature_counts({total});
}

// ---------------------------------------------------------------------------

const std::string* ConfigFile::find(std::string_view key) const {
   for (auto& [k, v] : entries)
      if (k == key) return &v;
   return nullptr;
}

namespace {

std::string trim(std::string_view s) {
   auto first = s.find_first_not_of(" \t\r");
   if (first == std::string_view::npos) return "";
   auto last = s.find_last_not_of(" \t\r");
   return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
   std::vector<std::string> out;
   std::stringstream in(value);
   std::string item;
   while (std::getline(in, item, ',')) {
      item = trim(item);
      if (item.empty()) config_error("empty item in list '" + value + "'");
      out.push_back(item);
   }
   if (out.empty()) config_error("empty list");
   return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
   T value{};
   auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
   if (ec != std::errc() || ptr != text.data() + text.size()) config_error("invalid number '" + text + "' for " + key);
   return value;
}

const std::set<std::string, std::less<>> knownKeys{
   "features.table", "features.name_column", "weights.table", "weights.dims", "targets.table", "observations.table",
   "gd.iterations", "gd.learning_rate", "gd.seed", "gd.batch_size", "gd.init_range", "db.url", "db.user",
};

}

ConfigFile parse_config(std::string_view text) {
   ConfigFile config;
   std::size_t lineNo = 0;
   std::size_t start = 0;
   while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      ++lineNo;
      std::string line = trim(text.substr(start, end - start));
      start = end + 1;
      if (line.empty() || line[0] == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) config_error("line " + std::to_string(lineNo) + ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (!knownKeys.count(key)) config_error("line " + std::to_string(lineNo) + ": unknown key '" + key + "'");
      if (value.empty()) config_error("line " + std::to_string(lineNo) + ": empty value for '" + key + "'");
      if (config.find(key)) config_error("line " + std::to_string(lineNo) + ": duplicate key '" + key + "'");
      config.entries.emplace_back(std::move(key), std::move(value));
   }
   return config;
}

Catalog catalog_from_config(const ConfigFile& config, const sql::SqlScript& script) {
   auto required = [&](std::string_view key) -> const std::string& {
      auto* v = config.find(key);
      if (!v) config_error("missing mandatory key '" + std::string(key) + "'");
      return *v;
   };

   std::vector<std::pair<std::string, TableRole>> roles;
   auto featureTables = split_list(required("features.table"));
   auto nameColumns = split_list(required("features.name_column"));
   if (nameColumns.size() != 1 && nameColumns.size() != featureTables.size())
      config_error("features.name_column must list one column, or one per features table");
   for (std::size_t i = 0; i < featureTables.size(); ++i)
      roles.emplace_back(featureTables[i], FeaturesRole{nameColumns.size() == 1 ? nameColumns[0] : nameColumns[i]});

   auto weightTables = split_list(required("weights.table"));
   std::vector<std::int64_t> dims;
   if (auto* d = config.find("weights.dims"))
      for (auto& item : split_list(*d)) dims.push_back(parse_number<std::int64_t>("weights.dims", item));
   for (std::size_t i = 0; i < weightTables.size(); ++i) {
      WeightsRole role;
      if (!dims.empty()) {
         if (weightTables.size() == 1) role.dims = dims;
         else if (dims.size() == weightTables.size()) role.dims = {dims[i]};
         else config_error("weights.dims must list one size per weights table");
      }
      roles.emplace_back(weightTables[i], role);
   }
   roles.emplace_back(required("targets.table"), TargetsRole{});
   if (auto* o = config.find("observations.table")) roles.emplace_back(*o, ObservationsRole{});

   Hyperparams hp;
   if (auto* v = config.find("gd.iterations")) hp.iterations = parse_number<std::int64_t>("gd.iterations", *v);
   if (auto* v = config.find("gd.learning_rate")) hp.learningRate = parse_number<double>("gd.learning_rate", *v);
   if (auto* v = config.find("gd.seed")) {
      if (!v->empty() && (*v)[0] == '-') config_error("gd.seed must be non-negative");
      hp.seed = parse_number<std::uint64_t>("gd.seed", *v);
   }
   if (auto* v = config.find("gd.batch_size")) hp.batchSize = parse_number<std::int64_t>("gd.batch_size", *v);
   if (auto* v = config.find("gd.init_range")) hp.initRange = parse_number<double>("gd.init_range", *v);

   DbConfig db;
   if (auto* v = config.find("db.url")) db.url = *v;
   if (auto* v = config.find("db.user")) db.user = *v;
   if (db.url.empty() != db.user.empty()) config_error("db.url and db.user must be given together");

   return Catalog(script, std::move(roles), hp, db);
}

Catalog load_config(const std::filesystem::path& path, const sql::SqlScript& script) {
   std::ifstream in(path, std::ios::binary);
   if (!in) throw Error(ErrorCode::MissingInput, "cannot read config file '" + path.string() + "'");
   std::ostringstream text;
   text << in.rdbuf();
   return catalog_from_config(parse_config(text.str()), script);
}

}
