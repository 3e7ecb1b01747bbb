#include "sqlml/codegen/emitter.hpp"

#include "sqlml/runtime/interpreter.hpp"
#include "sqlml/translate/translator.hpp"
#include <algorithm>
#include <set>

namespace sqlml::codegen {

using ir::Expr;

namespace {

const std::set<std::string, std::less<>>& reserved() {
   static const std::set<std::string, std::less<>> words{
       "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del", "elif", "else",
       "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise",
       "return", "try", "while", "with", "yield", "len", "sorted", "float", "int", "str", "open", "list", "tuple", "zip", "slice",
       "print", "range", "tf", "csv", "sys", "read", "obs", "session", "optimizer", "train", "data_dir", "target_values", "trained",
       "out", "step", "sqlalchemy", "engine", "query", "feature_names"};
   return words;
}

std::string number(double v) { return runtime::format_double(v); }

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
   std::string out;
   for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += sep;
      out += parts[i];
   }
   return out;
}

std::string py_string(const std::string& s) {
   std::string out = "'";
   for (char c : s) {
      if (c == '\\' || c == '\'') out += '\\';
      if (c == '\n') {
         out += "\\n";
         continue;
      }
      out += c;
   }
   return out + "'";
}

std::string converter(sql::ColumnType type) {
   switch (type) {
      case sql::ColumnType::Int: return "int";
      case sql::ColumnType::Double: return "float";
      case sql::ColumnType::String: return "str";
   }
   return "str";
}

/// Python tuple expression of typed key columns read from CSV row `r`
std::string csv_key(const catalog::Catalog& cat, const std::string& table, const std::vector<std::string>& cols) {
   auto& schema = cat.table(table).schema;
   std::vector<std::string> parts;
   for (auto& c : cols) {
      auto* def = schema.find_column(c);
      if (!def) throw Error(ErrorCode::MissingJoinKey, "table '" + table + "' has no column '" + c + "'");
      parts.push_back(converter(def->type) + "(r[" + py_string(c) + "])");
   }
   return "(" + join(parts, ", ") + (parts.size() == 1 ? ",)" : ")");
}

/// Tuple of observation key `o` restricted to the columns in `cols`
std::string projection(const std::vector<std::string>& obsKey, const std::vector<std::string>& cols) {
   if (cols == obsKey) return "o";
   std::vector<std::string> parts;
   for (auto& c : cols) {
      auto it = std::find(obsKey.begin(), obsKey.end(), c);
      if (it == obsKey.end()) throw Error(ErrorCode::MissingJoinKey, "column '" + c + "' is not part of the observation key");
      parts.push_back("o[" + std::to_string(it - obsKey.begin()) + "]");
   }
   return "(" + join(parts, ", ") + (parts.size() == 1 ? ",)" : ")");
}

std::string shape_text(const ir::Shape& shape, const catalog::Catalog& cat) {
   std::vector<std::string> dims;
   for (auto& d : shape) {
      if (d == "n")
         dims.push_back("len(obs)");
      else if (d == "F")
         dims.push_back(cat.features_tables().size() == 1 ? "len(" + python_name(cat.features_tables().front()) + "_names)" : "len(feature_names)");
      else if (d.rfind("F_", 0) == 0)
         dims.push_back("len(" + python_name(d.substr(2)) + "_names)");
      else
         dims.push_back(d);
   }
   return "[" + join(dims, ", ") + "]";
}

struct Context {
   const ir::TensorProgram& prog;
   const catalog::Catalog& cat;
   const data::FeatureMapping* mapping;
   const EmitOptions& options;
   std::string features;
   std::vector<std::string> obsKey;
   bool db;
};

void csv_loading(const Context& c, std::vector<std::string>& out) {
   auto& cat = c.cat;
   out.push_back("data_dir = sys.argv[1] if len(sys.argv) > 1 else '.'");
   out.push_back("def read(table):");
   out.push_back("    with open(data_dir + '/' + table + '.csv', newline='') as f:");
   out.push_back("        return list(csv.DictReader(f))");
   auto& targets = cat.table(cat.targets_table());
   out.push_back("target_values = {" + csv_key(cat, targets.schema.name, c.obsKey) + ": float(r[" + py_string(targets.valueColumn) + "]) for r in read(" +
                 py_string(targets.schema.name) + ")}");
   if (auto obs = cat.observations_table())
      out.push_back("obs = sorted({" + csv_key(cat, *obs, c.obsKey) + " for r in read(" + py_string(*obs) + ")})");
   else
      out.push_back("obs = sorted(target_values)");
   for (auto& t : cat.features_tables()) {
      auto& entry = cat.table(t);
      auto p = python_name(t);
      auto name = "r[" + py_string(entry.nameColumn) + "]";
      auto value = "r[" + py_string(entry.valueColumn) + "]";
      out.push_back(p + "_rows = read(" + py_string(t) + ")");
      out.push_back(p + "_names = sorted({" + name + " for r in " + p + "_rows})");
      out.push_back(p + "_cells = {(" + csv_key(cat, t, cat.dimension_key(t)) + ", " + name + "): float(" + value + ") for r in " + p +
                    "_rows if " + value + "}");
   }
}

void db_loading(const Context& c, std::vector<std::string>& out) {
   auto& cat = c.cat;
   if (!c.mapping) throw Error(ErrorCode::Internal, "database loading needs the feature mapping");
   auto url = cat.db().url;
   auto scheme = url.find("://");
   if (scheme == std::string::npos) url = "postgresql://" + cat.db().user + "@" + url;
   out.push_back("engine = sqlalchemy.create_engine(" + py_string(url) + ")");
   out.push_back("def query(path):");
   out.push_back("    with open(path) as f, engine.connect() as connection:");
   out.push_back("        return [tuple(r) for r in connection.execute(sqlalchemy.text(f.read()))]");
   auto k = std::to_string(c.obsKey.size());
   out.push_back("target_values = {r[:" + k + "]: float(r[" + k + "]) for r in query('export_targets.sql')}");
   std::vector<std::string> keyCols = c.obsKey;
   if (c.mapping->tables.size() == 1) keyCols = cat.dimension_key(c.mapping->tables.front().table);
   auto kk = std::to_string(keyCols.size());
   out.push_back("feature_rows = {r[:" + kk + "]: [float(x) for x in r[" + kk + ":]] for r in query('export_features.sql')}");
   out.push_back("obs = sorted(o for o in target_values if " + projection(c.obsKey, keyCols) + " in feature_rows)");
   for (auto& t : c.mapping->tables) {
      std::vector<std::string> names;
      for (auto& n : t.names) names.push_back(py_string(n));
      out.push_back(python_name(t.table) + "_names = [" + join(names, ", ") + "]");
   }
}

void declarations(const Context& c, std::vector<std::string>& out) {
   auto& cat = c.cat;
   auto tables = cat.features_tables();
   if (tables.size() > 1) {
      std::vector<std::string> parts;
      for (auto& t : tables) parts.push_back(python_name(t) + "_names");
      out.push_back("feature_names = " + join(parts, " + "));
      std::string begin = "0";
      for (auto& t : tables) {
         auto end = begin == "0" ? "len(" + python_name(t) + "_names)" : begin + " + len(" + python_name(t) + "_names)";
         out.push_back(python_name(t) + "_range = slice(" + begin + ", " + end + ")");
         begin = end;
      }
   }
   for (auto& d : c.prog.inputs) {
      std::string row;
      if (d.name == c.features) {
         if (c.db) {
            row = "feature_rows[" + projection(c.obsKey, tables.size() == 1 ? cat.dimension_key(tables.front()) : c.obsKey) + "]";
         } else {
            std::vector<std::string> parts;
            for (auto& t : tables) {
               auto p = python_name(t);
               parts.push_back("[" + p + "_cells.get((" + projection(c.obsKey, cat.dimension_key(t)) + ", n), 0.0) for n in " + p + "_names]");
            }
            row = join(parts, " + ");
         }
      } else if (d.name == cat.targets_table()) {
         row = "target_values[o]";
      } else {
         throw Error(ErrorCode::UnsupportedNode, "no data source for input '" + d.name + "'");
      }
      out.push_back(python_name(d.name) + " = tf.constant([" + row + " for o in obs], dtype=tf.float64)");
   }
   auto& hp = cat.hyperparams();
   for (auto& d : c.prog.parameters) {
      auto shape = shape_text(d.shape, cat);
      std::string init = hp.initRange > 0 ? "tf.random_uniform(" + shape + ", " + number(-hp.initRange) + ", " + number(hp.initRange) +
                                                ", dtype=tf.float64, seed=" + std::to_string(hp.seed) + ")"
                                          : "tf.zeros(" + shape + ", dtype=tf.float64)";
      out.push_back(python_name(d.name) + " = tf.Variable(" + init + ")");
   }
}

void training_loop(const Context& c, std::vector<std::string>& out) {
   auto& hp = c.cat.hyperparams();
   auto objective = python_name(c.prog.objective);
   out.push_back("optimizer = tf.train.GradientDescentOptimizer(" + number(hp.learningRate) + ")");
   out.push_back("train = optimizer.minimize(" + objective + ")");
   out.push_back("with tf.Session() as session:");
   out.push_back("    session.run(tf.global_variables_initializer())");
   out.push_back("    for step in range(" + std::to_string(hp.iterations) + "):");
   out.push_back("        session.run(train)");
   std::string print = "print(\"objective:\", session.run(" + objective + "))";
   if (c.options.printEvery > 1) {
      out.push_back("        if (step + 1) % " + std::to_string(c.options.printEvery) + " == 0 or step == " + std::to_string(hp.iterations - 1) + ":");
      out.push_back("            " + print);
   } else {
      out.push_back("        " + print);
   }
   std::vector<std::string> names;
   for (auto& d : c.prog.parameters) names.push_back(python_name(d.name));
   out.push_back("    trained = session.run([" + join(names, ", ") + "])");
}

void weight_export(const Context& c, std::vector<std::string>& out) {
   auto& cat = c.cat;
   auto tables = cat.features_tables();
   bool shared = cat.weights_tables().size() == 1;
   out.push_back("with open('import_weights.sql', 'w') as out:");
   for (std::size_t i = 0; i < c.prog.parameters.size(); ++i) {
      auto& w = c.prog.parameters[i].name;
      if (!cat.has_table(w) || !cat.is_weights(w)) throw Error(ErrorCode::UnsupportedNode, "parameter '" + w + "' is not a weights table");
      auto& entry = cat.table(w);
      std::string names;
      if (shared)
         names = tables.size() == 1 ? python_name(tables.front()) + "_names" : "feature_names";
      else {
         std::vector<std::string> parts;
         for (auto& t : tables)
            if (cat.weights_for(t) == w) parts.push_back(python_name(t) + "_names");
         names = join(parts, " + ");
      }
      auto insert = "INSERT INTO " + w + "(" + entry.nameColumn + ", " + entry.valueColumn + ") VALUES ('%s', %.17g);\\n";
      out.push_back("    for n, v in zip(" + names + ", trained[" + std::to_string(i) + "]):");
      out.push_back("        out.write(\"" + insert + "\" % (n.replace(\"'\", \"''\"), v))");
   }
}

}

std::string python_name(const std::string& name) {
   if (reserved().count(name)) return name + "_";
   return name;
}

std::string_view elem_mnemonic(ir::ElemOp op) {
   switch (op) {
      case ir::ElemOp::Add: return "tf.add";
      case ir::ElemOp::Sub: return "tf.subtract";
      case ir::ElemOp::Mul: return "tf.multiply";
      case ir::ElemOp::Div: return "tf.div";
   }
   throw Error(ErrorCode::UnsupportedNode, "elementwise operator has no mnemonic");
}

std::string_view unary_mnemonic(ir::UnaryOp op) {
   switch (op) {
      case ir::UnaryOp::Neg: return "tf.negative";
      case ir::UnaryOp::Exp: return "tf.exp";
      case ir::UnaryOp::Log: return "tf.log";
      case ir::UnaryOp::Square: return "tf.square";
   }
   throw Error(ErrorCode::UnsupportedNode, "unary operator has no mnemonic");
}

std::string_view reduce_mnemonic(ir::ReduceOp op) {
   switch (op) {
      case ir::ReduceOp::Sum: return "tf.reduce_sum";
      case ir::ReduceOp::Mean: return "tf.reduce_mean";
      case ir::ReduceOp::Size: return "tf.size";
   }
   throw Error(ErrorCode::UnsupportedNode, "reduction has no mnemonic");
}

std::string emit_expr(const Expr& e) {
   auto arg = [&](std::size_t i) {
      if (i >= e.args.size() || !e.args[i]) throw Error(ErrorCode::UnsupportedNode, "malformed expression node");
      return emit_expr(*e.args[i]);
   };
   switch (e.kind) {
      case Expr::Kind::ScalarConst: return "tf.to_double(" + number(e.value) + ")";
      case Expr::Kind::Var: return python_name(e.name);
      case Expr::Kind::Elementwise: return std::string(elem_mnemonic(e.elemOp)) + "(" + arg(0) + ", " + arg(1) + ")";
      case Expr::Kind::Unary: return std::string(unary_mnemonic(e.unaryOp)) + "(" + arg(0) + ")";
      case Expr::Kind::Reduce: {
         if (e.reduceOp == ir::ReduceOp::Size) {
            if (e.axis != ir::Axis::All) throw Error(ErrorCode::UnsupportedNode, "size along an axis has no mnemonic");
            return "tf.to_double(tf.size(" + arg(0) + "))";
         }
         std::string axis = e.axis == ir::Axis::All ? "None" : e.axis == ir::Axis::Rows ? "0" : "1";
         return std::string(reduce_mnemonic(e.reduceOp)) + "(" + arg(0) + ", " + axis + ")";
      }
      case Expr::Kind::TensorDot: return "tf.tensordot(" + arg(0) + ", " + arg(1) + ", axes=1)";
      case Expr::Kind::Slice:
         if (!e.range.empty()) return arg(0) + "[..., " + python_name(e.range) + "_range]";
         return arg(0) + "[..., " + std::to_string(e.begin) + ":" + std::to_string(e.begin + e.length) + "]";
   }
   throw Error(ErrorCode::UnsupportedNode, "expression node has no mnemonic");
}

std::string emit_model_section(const ir::TensorProgram& prog) {
   std::string out;
   for (auto& a : prog.assignments) out += python_name(a.name) + " = " + emit_expr(*a.expr) + "\n";
   return out;
}

std::string emit_program(const ir::TensorProgram& prog, const catalog::Catalog& cat, const data::FeatureMapping* mapping, const EmitOptions& options,
                         const EmitPlan& plan) {
   if (plan.dialect != "tensorflow") throw Error(ErrorCode::UnsupportedNode, "unknown target dialect '" + plan.dialect + "'");
   if (options.printEvery < 1) throw Error(ErrorCode::Usage, "print interval must be positive");
   auto tables = cat.features_tables();
   if (tables.empty()) throw Error(ErrorCode::ConfigError, "no features table configured");
   Context c{prog, cat, mapping, options, tables.size() == 1 ? tables.front() : translate::global_features_name(cat), cat.observation_key(),
             cat.db().configured()};

   std::vector<std::string> header{"import tensorflow.compat.v1 as tf", "tf.disable_v2_behavior()"};
   if (c.db)
      header.insert(header.begin(), "import sqlalchemy");
   else
      header.insert(header.begin(), {"import csv", "import sys"});
   std::vector<std::vector<std::string>> blocks{header};
   for (auto s : plan.sections) {
      std::vector<std::string> block;
      switch (s) {
         case Section::DataLoading: c.db ? db_loading(c, block) : csv_loading(c, block); break;
         case Section::Declarations: declarations(c, block); break;
         case Section::ModelAssignments:
            for (auto& a : prog.assignments) block.push_back(python_name(a.name) + " = " + emit_expr(*a.expr));
            break;
         case Section::TrainingLoop: training_loop(c, block); break;
         case Section::WeightExport: weight_export(c, block); break;
      }
      if (!block.empty()) blocks.push_back(std::move(block));
   }
   std::string out;
   for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (i) out += "\n";
      for (auto& line : blocks[i]) out += line + "\n";
   }
   return out;
}

ExportBundle emit_export_queries(const catalog::Catalog& cat, const data::FeatureMapping& mapping) {
   ExportBundle b;
   b.featuresSql = data::gen_feature_export(cat, mapping);
   b.targetsSql = data::gen_targets_export(cat);
   std::vector<std::string> lines;
   ir::TensorProgram none;
   EmitOptions options;
   Context c{none, cat, &mapping, options, {}, cat.observation_key(), true};
   db_loading(c, lines);
   for (auto& l : lines) b.loader += l + "\n";
   return b;
}

}
