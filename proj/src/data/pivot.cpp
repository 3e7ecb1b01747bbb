#include "sqlml/data/pivot.hpp"
#include "sqlml/errors.hpp"
#include "sqlml/sql/lexer.hpp"
#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

namespace sqlml::data {

namespace {

struct KeyLess {
   bool operator()(const std::vector<Value>& a, const std::vector<Value>& b) const {
      return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), value_less);
   }
};

std::vector<Value> project(const std::vector<Value>& row, const std::vector<std::size_t>& idx) {
   std::vector<Value> out;
   for (auto i : idx) out.push_back(row[i]);
   return out;
}

std::string key_text(const std::vector<Value>& key) {
   std::string out = "(";
   for (std::size_t i = 0; i < key.size(); ++i) out += (i ? ", " : "") + value_text(key[i]);
   return out + ")";
}

const Relation& relation(const Database& db, const std::string& name) {
   auto it = db.find(name);
   if (it == db.end()) throw Error(ErrorCode::MissingInput, "no data loaded for table '" + name + "'");
   return it->second;
}

std::vector<std::size_t> indexes(const Relation& r, const std::vector<std::string>& cols) {
   std::vector<std::size_t> out;
   for (auto& c : cols) out.push_back(r.column_index(c));
   return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
   std::string out;
   for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
   return out;
}

std::string sanitize(const std::string& name) {
   std::string out;
   for (unsigned char c : name) out += std::isalnum(c) ? static_cast<char>(c) : '_';
   if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0]))) out = "f_" + out;
   return out;
}

bool is_keyword(const std::string& word) {
   static const std::set<std::string> functions{"sum", "max", "coalesce", "count", "avg", "exp", "ln", "pow"};
   auto tokens = sql::tokenize(word);
   if (tokens.size() != 2 || tokens[0].kind != sql::TokenKind::Identifier) return true;
   std::string lower;
   for (unsigned char c : word) lower += static_cast<char>(std::tolower(c));
   return functions.count(lower) > 0;
}

/// Make every alias distinct from the others and from `taken`
std::vector<std::string> uniquify(std::vector<std::string> aliases, std::set<std::string> taken) {
   for (auto& a : aliases) {
      if (is_keyword(a)) a += "Value";
      std::string base = a;
      for (int i = 2; taken.count(a); ++i) a = base + "_" + std::to_string(i);
      taken.insert(a);
   }
   return aliases;
}

std::string lower_first(std::string s) {
   if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
   return s;
}

std::string case_sum(const std::string& nameCol, const std::string& valueCol, const std::string& feature) {
   return "SUM(CASE WHEN " + nameCol + "=" + quote_sql_string(feature) + " THEN " + valueCol + " ELSE 0.0 END)";
}

/// Relation the observations come from in export queries
std::string anchor_table(const catalog::Catalog& cat) {
   return cat.observations_table() ? *cat.observations_table() : cat.targets_table();
}

std::vector<std::string> single_table_aliases(const catalog::Catalog& cat, const FeatureMapping::Table& t) {
   std::vector<std::string> base;
   for (auto& n : t.names) base.push_back(sanitize(n));
   auto key = cat.dimension_key(t.table);
   return uniquify(base, {key.begin(), key.end()});
}

}

std::string quote_sql_string(const std::string& s) {
   std::string out = "'";
   for (char c : s) {
      if (c == '\'') out += '\'';
      out += c;
   }
   return out + "'";
}

std::size_t FeatureMapping::total() const {
   std::size_t n = 0;
   for (auto& t : tables) n += t.names.size();
   return n;
}

const FeatureMapping::Table& FeatureMapping::table(std::string_view name) const {
   for (auto& t : tables)
      if (t.table == name) return t;
   throw Error(ErrorCode::UnknownTable, "no feature mapping for '" + std::string(name) + "'");
}

std::optional<std::size_t> FeatureMapping::index_of(std::string_view tableName, std::string_view name) const {
   auto& t = table(tableName);
   auto it = std::lower_bound(t.names.begin(), t.names.end(), name);
   if (it == t.names.end() || *it != name) return std::nullopt;
   return static_cast<std::size_t>(t.begin) + static_cast<std::size_t>(it - t.names.begin());
}

std::map<std::string, translate::Range, std::less<>> FeatureMapping::ranges() const {
   std::map<std::string, translate::Range, std::less<>> out;
   for (auto& t : tables) out[t.table] = {t.begin, static_cast<std::int64_t>(t.names.size())};
   return out;
}

std::vector<std::size_t> FeatureMapping::counts() const {
   std::vector<std::size_t> out;
   for (auto& t : tables) out.push_back(t.names.size());
   return out;
}

FeatureMapping build_feature_mapping(const catalog::Catalog& cat, const Database& db) {
   FeatureMapping m;
   std::int64_t begin = 0;
   std::map<std::string, std::string> owner;  // name -> table, for shared weights
   bool shared = cat.weights_tables().size() == 1 && cat.features_tables().size() > 1;
   for (auto& tableName : cat.features_tables()) {
      auto& r = relation(db, tableName);
      auto nameIdx = r.column_index(cat.table(tableName).nameColumn);
      std::set<std::string> names;
      for (auto& row : r.rows) {
         if (is_null(row[nameIdx])) throw Error(ErrorCode::NonNumericValue, "table '" + tableName + "' has a NULL feature name");
         names.insert(value_text(row[nameIdx]));
      }
      if (names.empty()) throw Error(ErrorCode::MissingInput, "features table '" + tableName + "' has no rows");
      if (shared)
         for (auto& n : names) {
            auto [it, fresh] = owner.emplace(n, tableName);
            if (!fresh)
               throw Error(ErrorCode::DuplicateFeatureName, "feature '" + n + "' appears in both '" + it->second + "' and '" + tableName +
                                                               "', which share weights table '" + cat.weights_tables().front() + "'");
         }
      FeatureMapping::Table t{tableName, begin, {names.begin(), names.end()}};
      begin += static_cast<std::int64_t>(t.names.size());
      m.tables.push_back(std::move(t));
   }
   return m;
}

PivotResult pivot_in_memory(const catalog::Catalog& cat, const Database& db) {
   PivotResult out;
   out.mapping = build_feature_mapping(cat, db);
   auto obsKey = cat.observation_key();
   const auto& source = relation(db, anchor_table(cat));
   auto obsIdx = indexes(source, obsKey);

   std::set<std::vector<Value>, KeyLess> keys;
   for (auto& row : source.rows) {
      auto k = project(row, obsIdx);
      if (std::any_of(k.begin(), k.end(), is_null)) throw Error(ErrorCode::MissingJoinKey, "table '" + source.name + "' has a NULL key");
      keys.insert(std::move(k));
   }
   out.observations.name = "observations";
   out.observations.columns = obsKey;
   out.observations.rows.assign(keys.begin(), keys.end());
   std::size_t n = out.observations.rows.size();
   if (n == 0) throw Error(ErrorCode::MissingInput, "there are no observations");

   /// Observation rows grouped by the values of some key columns
   auto group_observations = [&](const std::vector<std::string>& cols, const std::string& who) {
      std::vector<std::size_t> pos;
      for (auto& c : cols) {
         auto it = std::find(obsKey.begin(), obsKey.end(), c);
         if (it == obsKey.end())
            throw Error(ErrorCode::MissingJoinKey, "key column '" + who + "." + c + "' is not part of the observation key " + join(obsKey, ", "));
         pos.push_back(static_cast<std::size_t>(it - obsKey.begin()));
      }
      std::map<std::vector<Value>, std::vector<std::size_t>, KeyLess> groups;
      for (std::size_t i = 0; i < n; ++i) groups[project(out.observations.rows[i], pos)].push_back(i);
      return groups;
   };

   // Targets
   {
      const auto& t = relation(db, cat.targets_table());
      auto tk = cat.observation_key();
      if (cat.observations_table()) {
         auto k = cat.key(cat.targets_table());
         tk.clear();
         for (auto& c : t.columns)
            if (k->count(c)) tk.push_back(c);
      }
      auto groups = group_observations(tk, cat.targets_table());
      auto tkIdx = indexes(t, tk);
      auto vIdx = t.column_index(cat.table(cat.targets_table()).valueColumn);
      std::vector<double> y(n, 0.0);
      std::vector<bool> seen(n, false);
      std::set<std::vector<Value>, KeyLess> targetKeys;
      for (auto& row : t.rows) {
         auto k = project(row, tkIdx);
         if (!targetKeys.insert(k).second) throw Error(ErrorCode::SchemaMismatch, "duplicate target for key " + key_text(k));
         auto it = groups.find(k);
         if (it == groups.end()) continue;
         auto v = as_double(row[vIdx]);
         if (!v) throw Error(ErrorCode::MissingTarget, "target for key " + key_text(k) + " is NULL");
         for (auto i : it->second) y[i] = *v, seen[i] = true;
      }
      for (std::size_t i = 0; i < n; ++i)
         if (!seen[i]) throw Error(ErrorCode::MissingTarget, "observation " + key_text(out.observations.rows[i]) + " has no target");
      out.targets = runtime::TensorValue::vector(std::move(y));
   }

   // Features
   std::size_t F = out.mapping.total();
   out.features = runtime::TensorValue::zeros({n, F});
   for (auto& mt : out.mapping.tables) {
      const auto& r = relation(db, mt.table);
      auto dk = cat.dimension_key(mt.table);
      auto groups = group_observations(dk, mt.table);
      auto dkIdx = indexes(r, dk);
      auto nameIdx = r.column_index(cat.table(mt.table).nameColumn);
      auto vIdx = r.column_index(cat.table(mt.table).valueColumn);
      std::map<std::vector<Value>, std::set<std::string>, KeyLess> namesByKey;
      for (auto& row : r.rows) {
         auto k = project(row, dkIdx);
         auto name = value_text(row[nameIdx]);
         if (!namesByKey[k].insert(name).second)
            throw Error(ErrorCode::DuplicateFeatureName, "table '" + mt.table + "' lists feature '" + name + "' twice for key " + key_text(k));
         auto it = groups.find(k);
         if (it == groups.end()) continue;
         auto v = as_double(row[vIdx]);
         if (!v) continue;
         auto col = *out.mapping.index_of(mt.table, name);
         for (auto i : it->second) out.features.data[i * F + col] = *v;
      }
   }
   return out;
}

TrainingData prepare_training(const ir::TensorProgram& unbound, const catalog::Catalog& cat, const Database& db) {
   TrainingData d;
   d.pivot = pivot_in_memory(cat, db);
   cat.check_feature_counts(d.pivot.mapping.counts());
   d.program = translate::bind_ranges(unbound, d.pivot.mapping.ranges());
   auto global = translate::global_features_name(cat);
   for (auto& in : d.program.inputs) {
      if (in.name == global) d.inputs[in.name] = d.pivot.features;
      else if (in.name == cat.targets_table()) d.inputs[in.name] = d.pivot.targets;
      else throw Error(ErrorCode::Internal, "no data for input '" + in.name + "'");
   }
   return d;
}

std::string pivot_alias(const std::string& featureName) {
   return uniquify({sanitize(featureName)}, {}).front();
}

std::vector<std::string> multi_table_aliases(const FeatureMapping& mapping) {
   std::vector<std::string> base;
   std::map<std::string, int> uses;
   for (auto& t : mapping.tables)
      for (auto& n : t.names) ++uses[lower_first(sanitize(n)) + "Value"];
   for (auto& t : mapping.tables)
      for (auto& n : t.names) {
         std::string a = lower_first(sanitize(n)) + "Value";
         if (uses[a] > 1) a = lower_first(sanitize(t.table)) + "_" + a;
         base.push_back(a);
      }
   return uniquify(base, {});
}

std::string gen_pivot_query(const catalog::Catalog& cat, const FeatureMapping& mapping, std::string_view featuresTable) {
   auto& t = mapping.table(featuresTable);
   auto& entry = cat.table(featuresTable);
   auto key = cat.dimension_key(featuresTable);
   auto aliases = single_table_aliases(cat, t);
   std::string out = "SELECT " + join(key, ", ") + ",\n";
   for (std::size_t i = 0; i < t.names.size(); ++i)
      out += "  " + case_sum(entry.nameColumn, entry.valueColumn, t.names[i]) + " AS " + aliases[i] + (i + 1 < t.names.size() ? ",\n" : "\n");
   out += "FROM " + t.table + "\nGROUP BY " + join(key, ", ") + ";\n";
   return out;
}

std::string gen_multi_table_pivot(const catalog::Catalog& cat, const FeatureMapping& mapping) {
   auto anchor = anchor_table(cat);
   auto obsKey = cat.observation_key();
   auto aliases = multi_table_aliases(mapping);
   std::vector<std::string> select, from{anchor}, where;
   for (auto& k : obsKey) select.push_back(anchor + "." + k);
   std::size_t a = 0;
   for (auto& t : mapping.tables) {
      std::string sub = t.table + "_temp";
      auto& entry = cat.table(t.table);
      auto key = cat.dimension_key(t.table);
      std::string q = "(SELECT " + join(key, ", ") + ",\n";
      for (std::size_t i = 0; i < t.names.size(); ++i, ++a) {
         q += "    " + case_sum(entry.nameColumn, entry.valueColumn, t.names[i]) + " AS " + aliases[a] + (i + 1 < t.names.size() ? ",\n" : "\n");
         select.push_back(sub + "." + aliases[a]);
      }
      q += "  FROM " + t.table + "\n  GROUP BY " + join(key, ", ") + ") AS " + sub;
      from.push_back(q);
      for (auto& k : key) where.push_back(anchor + "." + k + " = " + sub + "." + k);
   }
   std::string out = "SELECT " + join(select, ",\n  ") + "\nFROM " + join(from, ",\n  ");
   if (!where.empty()) out += "\nWHERE " + join(where, " AND ");
   return out + ";\n";
}

std::string gen_naive_export(const catalog::Catalog& cat, const FeatureMapping& mapping) {
   auto anchor = anchor_table(cat);
   auto obsKey = cat.observation_key();
   auto aliases = multi_table_aliases(mapping);
   std::vector<std::string> select, from{anchor}, where, group;
   for (auto& k : obsKey) {
      select.push_back(anchor + "." + k);
      group.push_back(anchor + "." + k);
   }
   std::size_t a = 0;
   for (auto& t : mapping.tables) {
      auto& entry = cat.table(t.table);
      for (auto& n : t.names)
         select.push_back("COALESCE(MAX(CASE WHEN " + t.table + "." + entry.nameColumn + "=" + quote_sql_string(n) + " THEN " + t.table + "." +
                          entry.valueColumn + " END), 0) AS " + aliases[a++]);
      from.push_back(t.table);
      for (auto& k : cat.dimension_key(t.table)) where.push_back(anchor + "." + k + " = " + t.table + "." + k);
   }
   std::string out = "SELECT " + join(select, ",\n  ") + "\nFROM " + join(from, ", ");
   if (!where.empty()) out += "\nWHERE " + join(where, " AND ");
   return out + "\nGROUP BY " + join(group, ", ") + ";\n";
}

std::string gen_feature_export(const catalog::Catalog& cat, const FeatureMapping& mapping) {
   if (mapping.tables.size() == 1) return gen_pivot_query(cat, mapping, mapping.tables.front().table);
   return gen_multi_table_pivot(cat, mapping);
}

std::string gen_targets_export(const catalog::Catalog& cat) {
   auto& t = cat.table(cat.targets_table());
   auto k = cat.key(t.schema.name);
   std::vector<std::string> cols;
   for (auto& c : t.schema.columns)
      if (k->count(c.name)) cols.push_back(c.name);
   cols.push_back(t.valueColumn);
   return "SELECT " + join(cols, ", ") + "\nFROM " + t.schema.name + ";\n";
}

namespace {

std::string exact_number(double v) {
   char buf[64];
   std::snprintf(buf, sizeof buf, "%.17g", v);
   return buf;
}

/// (feature name, weight index) pairs a weights table holds
std::vector<std::pair<std::string, std::size_t>> weight_rows(const catalog::Catalog& cat, const FeatureMapping& mapping, std::string_view weightsTable) {
   std::vector<std::pair<std::string, std::size_t>> rows;
   bool shared = cat.weights_tables().size() == 1;
   for (auto& t : mapping.tables) {
      if (cat.weights_for(t.table) != weightsTable) continue;
      for (std::size_t i = 0; i < t.names.size(); ++i) rows.emplace_back(t.names[i], shared ? static_cast<std::size_t>(t.begin) + i : i);
   }
   return rows;
}

}

std::string gen_weight_import(const catalog::Catalog& cat, const FeatureMapping& mapping, const runtime::Bindings& parameters) {
   std::string out;
   for (auto& w : cat.weights_tables()) {
      auto it = parameters.find(w);
      if (it == parameters.end()) continue;
      auto& entry = cat.table(w);
      for (auto& [name, idx] : weight_rows(cat, mapping, w)) {
         if (idx >= it->second.size()) throw Error(ErrorCode::LengthMismatch, "weights '" + w + "' has fewer values than features");
         out += "INSERT INTO " + w + "(" + entry.nameColumn + ", " + entry.valueColumn + ") VALUES (" + quote_sql_string(name) + ", " +
                exact_number(it->second.data[idx]) + ");\n";
      }
   }
   return out;
}

Relation weights_relation(const catalog::Catalog& cat, const FeatureMapping& mapping, const runtime::TensorValue& weights, std::string_view weightsTable) {
   auto& entry = cat.table(weightsTable);
   Relation r;
   r.name = entry.schema.name;
   r.columns = {entry.nameColumn, entry.valueColumn};
   for (auto& [name, idx] : weight_rows(cat, mapping, weightsTable)) {
      if (idx >= weights.size()) throw Error(ErrorCode::LengthMismatch, "weights '" + r.name + "' has fewer values than features");
      r.rows.push_back({name, weights.data[idx]});
   }
   return r;
}

Database load_tables(const catalog::Catalog& cat, const std::filesystem::path& dir) {
   Database db;
   std::vector<std::string> needed = cat.features_tables();
   needed.push_back(cat.targets_table());
   if (cat.observations_table()) needed.push_back(*cat.observations_table());
   for (auto& name : needed) {
      auto path = dir / (name + ".csv");
      if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingInput, "missing data file '" + path.string() + "'");
      db[name] = read_csv(path, cat.table(name).schema);
   }
   return db;
}

}
