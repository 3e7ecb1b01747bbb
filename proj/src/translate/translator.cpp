#include "sqlml/translate/translator.hpp"
#include <algorithm>
#include <functional>
#include <set>

namespace sqlml::translate {

using sql::NumericExpr;

std::vector<std::string> order_views(const sql::SqlScript& script) {
   std::vector<std::string> out;
   for (auto* v : sql::views_in_dependency_order(script)) out.push_back(v->name);
   return out;
}

namespace {

bool covers_row_key(const sql::SelectQuery& q, const catalog::Catalog& cat, const std::string& relation) {
   if (!q.groupBy) return false;
   auto rk = cat.row_key(relation);
   if (!rk || rk->empty()) return false;
   sql::JoinClosure closure(q);
   for (auto& col : *rk) {
      sql::ColumnRef ref{relation, col};
      if (std::none_of(q.groupBy->begin(), q.groupBy->end(), [&](const sql::ColumnRef& g) { return closure.same(g, ref); })) return false;
   }
   return true;
}

ir::VarKind var_kind(const std::string& relation, const catalog::Catalog& cat) {
   if (cat.has_view(relation)) return ir::VarKind::Derived;
   if (cat.is_weights(relation)) return ir::VarKind::Parameter;
   if (cat.is_features(relation) || relation == cat.targets_table()) return ir::VarKind::Input;
   throw Error(ErrorCode::UnmappedTable, "table '" + relation + "' is not a features, weights or targets table and has no tensor");
}

/// SUM(features.v * weights.v) joined on the feature name and grouped by the row key
bool is_dot_product(const NumericExpr& arg, const sql::SelectQuery& q, const catalog::Catalog& cat) {
   if (arg.kind != NumericExpr::Kind::Binary || arg.op != sql::BinaryOp::Mul) return false;
   auto& a = arg.args[0];
   auto& b = arg.args[1];
   if (!a.is_column() || !b.is_column() || a.column.table == b.column.table) return false;
   const sql::ColumnRef* feat = nullptr;
   const sql::ColumnRef* weight = nullptr;
   for (auto* ref : {&a.column, &b.column}) {
      if (cat.is_features(ref->table)) feat = ref;
      else if (cat.is_weights(ref->table)) weight = ref;
   }
   if (!feat || !weight) return false;
   if (cat.weights_for(feat->table) != weight->table) return false;
   sql::JoinClosure closure(q);
   sql::ColumnRef featName{feat->table, cat.table(feat->table).nameColumn};
   sql::ColumnRef weightName{weight->table, cat.table(weight->table).nameColumn};
   if (!closure.same(featName, weightName)) return false;
   return covers_row_key(q, cat, feat->table);
}

struct ExprTranslator {
   const sql::SelectQuery& q;
   const catalog::Catalog& cat;
   ir::Axis axis;
   bool grouped;

   ir::ExprPtr column(const sql::ColumnRef& ref, bool insideAggregate) {
      if (grouped && !insideAggregate)
         throw Error(ErrorCode::UnsupportedFeature, "column '" + ref.table + "." + ref.column + "' must be inside an aggregate in a grouped query");
      if (!cat.has_table(ref.table) && !cat.has_view(ref.table)) throw Error(ErrorCode::UnknownTable, "unknown relation '" + ref.table + "'");
      auto kind = var_kind(ref.table, cat);
      if (ref.column != cat.value_column(ref.table))
         throw Error(ErrorCode::TypeError, "column '" + ref.table + "." + ref.column + "' is not the value column of its relation");
      return ir::var(ref.table, kind);
   }

   ir::ExprPtr aggregate(const NumericExpr& e, bool insideAggregate) {
      if (insideAggregate) throw Error(ErrorCode::UnsupportedFeature, "nested aggregates are not supported");
      auto& arg = e.args[0];
      switch (e.func) {
         case sql::Function::Sum:
            if (axis == ir::Axis::Columns && is_dot_product(arg, q, cat)) {
               auto& x = arg.args[0];
               auto& y = arg.args[1];
               bool xFirst = cat.is_features(x.column.table);
               auto feat = column(xFirst ? x.column : y.column, true);
               auto weight = column(xFirst ? y.column : x.column, true);
               return ir::tensordot(feat, weight);
            }
            return ir::reduce(ir::ReduceOp::Sum, axis, go(arg, true));
         case sql::Function::Avg: return ir::reduce(ir::ReduceOp::Mean, axis, go(arg, true));
         case sql::Function::Count:
            if (axis != ir::Axis::All) throw Error(ErrorCode::UnsupportedOperator, "COUNT is only supported without GROUP BY");
            return ir::reduce(ir::ReduceOp::Size, axis, go(arg, true));
         default: break;
      }
      throw Error(ErrorCode::Internal, "not an aggregate");
   }

   ir::ExprPtr go(const NumericExpr& e, bool insideAggregate) {
      switch (e.kind) {
         case NumericExpr::Kind::Const: return ir::constant(e.value);
         case NumericExpr::Kind::Column: return column(e.column, insideAggregate);
         case NumericExpr::Kind::Neg: return ir::unary(ir::UnaryOp::Neg, go(e.args[0], insideAggregate));
         case NumericExpr::Kind::Binary: {
            auto a = go(e.args[0], insideAggregate);
            auto b = go(e.args[1], insideAggregate);
            switch (e.op) {
               case sql::BinaryOp::Add: return ir::elementwise(ir::ElemOp::Add, a, b);
               case sql::BinaryOp::Sub: return ir::elementwise(ir::ElemOp::Sub, a, b);
               case sql::BinaryOp::Mul: return ir::elementwise(ir::ElemOp::Mul, a, b);
               case sql::BinaryOp::Div: return ir::elementwise(ir::ElemOp::Div, a, b);
            }
            break;
         }
         case NumericExpr::Kind::Func:
            switch (e.func) {
               case sql::Function::Exp: return ir::unary(ir::UnaryOp::Exp, go(e.args[0], insideAggregate));
               case sql::Function::Ln: return ir::unary(ir::UnaryOp::Log, go(e.args[0], insideAggregate));
               case sql::Function::Pow:
                  if (e.args.size() != 2 || e.args[1].kind != NumericExpr::Kind::Const || e.args[1].value != 2)
                     throw Error(ErrorCode::UnsupportedOperator, "POW is only supported with exponent 2");
                  return ir::unary(ir::UnaryOp::Square, go(e.args[0], insideAggregate));
               case sql::Function::Sum:
               case sql::Function::Avg:
               case sql::Function::Count: return aggregate(e, insideAggregate);
            }
            break;
      }
      throw Error(ErrorCode::UnsupportedNode, "cannot translate expression " + sql::to_sql(e));
   }
};

void check_join_keys(const sql::CreateView& view, const catalog::Catalog& cat) {
   const auto& q = view.query;
   std::vector<std::string> keyed;
   for (auto& from : q.fromTables) {
      auto rk = cat.row_key(from);
      if (rk && !rk->empty()) keyed.push_back(from);
   }
   if (keyed.size() < 2) return;
   sql::JoinClosure closure(q);
   // at most one relation may leave key columns unjoined
   std::string loose;
   for (auto& r : keyed) {
      auto rk = *cat.row_key(r);
      std::size_t joinedCount = 0;
      std::string unjoined;
      for (auto& col : rk) {
         bool joined = false;
         for (auto& other : keyed) {
            if (other == r) continue;
            for (auto& c : cat.columns(other))
               if (closure.same({r, col}, {other, c})) joined = true;
         }
         if (joined)
            ++joinedCount;
         else if (unjoined.empty())
            unjoined = col;
      }
      if (unjoined.empty()) continue;
      if (!loose.empty() || joinedCount == 0)
         throw Error(ErrorCode::MissingJoinKey, "view '" + view.name + "': key column '" + r + "." + unjoined + "' is not joined with the other relations");
      loose = r;
   }
}

}

ir::Axis infer_reduce_axis(const sql::SelectQuery& q, const catalog::Catalog& cat) {
   if (!q.groupBy) return ir::Axis::All;
   for (auto& from : q.fromTables)
      if (covers_row_key(q, cat, from)) return ir::Axis::Columns;
   return ir::Axis::Rows;
}

ir::ExprPtr translate_numeric_expr(const NumericExpr& e, const sql::SelectQuery& q, const catalog::Catalog& cat) {
   bool grouped = q.groupBy.has_value() || e.contains_aggregate();
   ExprTranslator t{q, cat, infer_reduce_axis(q, cat), grouped};
   return t.go(e, false);
}

ir::Assignment translate_view(const sql::CreateView& view, const catalog::Catalog& cat) {
   for (auto& from : view.query.fromTables)
      if (!cat.has_table(from) && !cat.has_view(from)) throw Error(ErrorCode::UnknownTable, "view '" + view.name + "' reads unknown relation '" + from + "'");
   check_join_keys(view, cat);
   try {
      return {view.name, translate_numeric_expr(view.query.numeric_projection().expr, view.query, cat)};
   } catch (const SourceError&) {
      throw;
   } catch (const Error& e) {
      throw SourceError(e.code(), view.pos, std::string("view '") + view.name + "': " + e.what());
   }
}

std::string global_features_name(const catalog::Catalog& cat) {
   auto features = cat.features_tables();
   if (features.size() == 1) return features.front();
   std::string name = "features";
   auto taken = [&](const std::string& n) { return (cat.has_table(n) && !cat.is_features(n)) || cat.has_view(n); };
   while (taken(name)) name += "_all";
   return name;
}

ir::TensorProgram translate_script(const sql::SqlScript& script, const catalog::Catalog& cat) {
   auto order = sql::views_in_dependency_order(script);
   if (order.empty()) throw Error(ErrorCode::ParseError, "the script defines no views");
   ir::TensorProgram p;
   for (auto* v : order) p.assignments.push_back(translate_view(*v, cat));
   p.objective = order.back()->name;

   std::set<std::string> used;
   for (auto& a : p.assignments)
      for (auto& n : ir::free_names(*a.expr)) used.insert(n);
   auto features = cat.features_tables();
   bool single = features.size() == 1;
   for (auto& f : features)
      if (used.count(f)) p.inputs.push_back({f, ir::VarKind::Input, {"n", single ? "F" : "F_" + f}});
   if (used.count(cat.targets_table())) p.inputs.push_back({cat.targets_table(), ir::VarKind::Input, {"n"}});
   auto weights = cat.weights_tables();
   for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!used.count(weights[i])) continue;
      bool shared = weights.size() == 1;
      p.parameters.push_back({weights[i], ir::VarKind::Parameter, {shared || single ? "F" : "F_" + features[i]}});
   }
   if (p.parameters.empty()) throw Error(ErrorCode::MissingInput, "the model reads no weights table, so there is nothing to train");

   if (!single) p = rewrite_to_global(p, cat);
   ir::check(p);
   return p;
}

ir::TensorProgram rewrite_to_global(const ir::TensorProgram& p, const catalog::Catalog& cat) {
   auto features = cat.features_tables();
   if (features.size() == 1) return p;
   std::string global = global_features_name(cat);
   bool sharedWeights = cat.weights_tables().size() == 1;

   std::function<ir::ExprPtr(const ir::ExprPtr&)> rewrite = [&](const ir::ExprPtr& e) -> ir::ExprPtr {
      if (e->kind == ir::Expr::Kind::Var && cat.is_features(e->name)) return ir::symbolic_slice(ir::var(global, ir::VarKind::Input), e->name);
      if (e->kind == ir::Expr::Kind::TensorDot && sharedWeights && e->args[0]->kind == ir::Expr::Kind::Var && cat.is_features(e->args[0]->name) &&
          e->args[1]->kind == ir::Expr::Kind::Var && cat.is_weights(e->args[1]->name)) {
         auto& table = e->args[0]->name;
         return ir::tensordot(ir::symbolic_slice(ir::var(global, ir::VarKind::Input), table), ir::symbolic_slice(e->args[1], table));
      }
      if (e->args.empty()) return e;
      auto copy = std::make_shared<ir::Expr>(*e);
      for (auto& a : copy->args) a = rewrite(a);
      return copy;
   };

   ir::TensorProgram out;
   bool anyFeatures = false;
   for (auto& d : p.inputs) {
      if (cat.is_features(d.name)) {
         if (!anyFeatures) out.inputs.push_back({global, ir::VarKind::Input, {"n", "F"}});
         anyFeatures = true;
         continue;
      }
      out.inputs.push_back(d);
   }
   out.parameters = p.parameters;
   for (auto& a : p.assignments) out.assignments.push_back({a.name, rewrite(a.expr)});
   out.objective = p.objective;
   return out;
}

ir::TensorProgram bind_ranges(const ir::TensorProgram& p, const std::map<std::string, Range, std::less<>>& ranges) {
   std::int64_t total = 0;
   for (auto& [name, r] : ranges) total = std::max(total, r.begin + r.length);
   auto bind_shape = [&](ir::Shape s) {
      for (auto& d : s) {
         if (d == "F") d = std::to_string(total);
         else if (d.rfind("F_", 0) == 0) {
            auto it = ranges.find(d.substr(2));
            if (it == ranges.end()) throw Error(ErrorCode::Internal, "no feature range for '" + d.substr(2) + "'");
            d = std::to_string(it->second.length);
         }
      }
      return s;
   };
   std::function<ir::ExprPtr(const ir::ExprPtr&)> bind = [&](const ir::ExprPtr& e) -> ir::ExprPtr {
      if (e->args.empty()) return e;
      auto copy = std::make_shared<ir::Expr>(*e);
      for (auto& a : copy->args) a = bind(a);
      if (copy->kind == ir::Expr::Kind::Slice && !copy->range.empty()) {
         auto it = ranges.find(copy->range);
         if (it == ranges.end()) throw Error(ErrorCode::Internal, "no feature range for '" + copy->range + "'");
         copy->begin = it->second.begin;
         copy->length = it->second.length;
         copy->range.clear();
      }
      return copy;
   };
   ir::TensorProgram out = p;
   for (auto* list : {&out.inputs, &out.parameters})
      for (auto& d : *list) d.shape = bind_shape(d.shape);
   for (auto& a : out.assignments) a.expr = bind(a.expr);
   return out;
}

const std::vector<OperatorMapping>& operator_table() {
   static const std::vector<OperatorMapping> table{
      {"a + b", "add"},         {"a - b", "sub"},          {"a * b", "mul"},      {"a / b", "div"},
      {"-a", "neg"},            {"EXP(a)", "exp"},         {"LN(a)", "log"},      {"POW(a, 2)", "square"},
      {"SUM(a)", "sum"},        {"AVG(a)", "mean"},        {"COUNT(a)", "size"},  {"SUM(a * b)", "tensordot"},
   };
   return table;
}

}
