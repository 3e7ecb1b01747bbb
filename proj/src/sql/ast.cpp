#include "sqlml/sql/ast.hpp"
#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace sqlml::sql {

std::string_view column_type_name(ColumnType type) {
   switch (type) {
      case ColumnType::Int: return "int";
      case ColumnType::Double: return "double";
      case ColumnType::String: return "string";
   }
   return "?";
}

const ColumnDef* CreateTable::find_column(std::string_view column) const {
   for (auto& c : columns)
      if (c.name == column) return &c;
   return nullptr;
}

std::string_view binary_op_symbol(BinaryOp op) {
   switch (op) {
      case BinaryOp::Add: return "+";
      case BinaryOp::Sub: return "-";
      case BinaryOp::Mul: return "*";
      case BinaryOp::Div: return "/";
   }
   return "?";
}

std::string_view function_name(Function f) {
   switch (f) {
      case Function::Sum: return "SUM";
      case Function::Count: return "COUNT";
      case Function::Avg: return "AVG";
      case Function::Exp: return "EXP";
      case Function::Ln: return "LN";
      case Function::Pow: return "POW";
   }
   return "?";
}

bool is_aggregate(Function f) {
   return f == Function::Sum || f == Function::Count || f == Function::Avg;
}

NumericExpr NumericExpr::constant(double v) {
   NumericExpr e;
   e.kind = Kind::Const;
   e.value = v;
   return e;
}

NumericExpr NumericExpr::column_ref(std::string table, std::string column) {
   NumericExpr e;
   e.kind = Kind::Column;
   e.column = {std::move(table), std::move(column)};
   return e;
}

NumericExpr NumericExpr::neg(NumericExpr inner) {
   NumericExpr e;
   e.kind = Kind::Neg;
   e.args.push_back(std::move(inner));
   return e;
}

NumericExpr NumericExpr::binary(BinaryOp op, NumericExpr l, NumericExpr r) {
   NumericExpr e;
   e.kind = Kind::Binary;
   e.op = op;
   e.args.push_back(std::move(l));
   e.args.push_back(std::move(r));
   return e;
}

NumericExpr NumericExpr::call(Function f, std::vector<NumericExpr> args) {
   NumericExpr e;
   e.kind = Kind::Func;
   e.func = f;
   e.args = std::move(args);
   return e;
}

bool NumericExpr::contains_aggregate() const {
   if (kind == Kind::Func && is_aggregate(func)) return true;
   return std::any_of(args.begin(), args.end(), [](const NumericExpr& a) { return a.contains_aggregate(); });
}

std::vector<const CreateTable*> SqlScript::tables() const {
   std::vector<const CreateTable*> result;
   for (auto& s : statements)
      if (auto* t = std::get_if<CreateTable>(&s)) result.push_back(t);
   return result;
}

std::vector<const CreateView*> SqlScript::views() const {
   std::vector<const CreateView*> result;
   for (auto& s : statements)
      if (auto* v = std::get_if<CreateView>(&s)) result.push_back(v);
   return result;
}

const CreateTable* SqlScript::find_table(std::string_view name) const {
   for (auto* t : tables())
      if (t->name == name) return t;
   return nullptr;
}

const CreateView* SqlScript::find_view(std::string_view name) const {
   for (auto* v : views())
      if (v->name == name) return v;
   return nullptr;
}

namespace {

void collect_tables(const NumericExpr& e, std::vector<std::string>& out) {
   if (e.kind == NumericExpr::Kind::Column) {
      if (std::find(out.begin(), out.end(), e.column.table) == out.end()) out.push_back(e.column.table);
      return;
   }
   for (auto& a : e.args) collect_tables(a, out);
}

std::string format_number(double v) {
   char buffer[64];
   auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
   return std::string(buffer, ptr);
}

std::string column_sql(const ColumnRef& c) {
   return c.table.empty() ? c.column : c.table + "." + c.column;
}

void print(const NumericExpr& e, std::ostream& out) {
   using K = NumericExpr::Kind;
   switch (e.kind) {
      case K::Const:
         // negative constants print parenthesised
         if (e.value < 0 || (e.value == 0 && std::signbit(e.value)))
            out << "(" << format_number(e.value) << ")";
         else
            out << format_number(e.value);
         return;
      case K::Column: out << column_sql(e.column); return;
      case K::Neg:
         out << "-(";
         print(e.args[0], out);
         out << ")";
         return;
      case K::Binary:
         out << "(";
         print(e.args[0], out);
         out << " " << binary_op_symbol(e.op) << " ";
         print(e.args[1], out);
         out << ")";
         return;
      case K::Func:
         out << function_name(e.func) << "(";
         for (std::size_t i = 0; i < e.args.size(); ++i) {
            if (i) out << ", ";
            print(e.args[i], out);
         }
         out << ")";
         return;
   }
}

}

std::vector<std::string> referenced_tables(const NumericExpr& e) {
   std::vector<std::string> out;
   collect_tables(e, out);
   return out;
}

std::string to_sql(const NumericExpr& e) {
   std::ostringstream out;
   print(e, out);
   return out.str();
}

std::string to_sql(const SelectQuery& q) {
   std::ostringstream out;
   out << "SELECT ";
   for (std::size_t i = 0; i < q.projections.size(); ++i) {
      if (i) out << ", ";
      print(q.projections[i].expr, out);
      out << " AS " << q.projections[i].alias;
   }
   out << "\n  FROM ";
   for (std::size_t i = 0; i < q.fromTables.size(); ++i) out << (i ? ", " : "") << q.fromTables[i];
   if (!q.joinPredicates.empty()) {
      out << "\n  WHERE ";
      for (std::size_t i = 0; i < q.joinPredicates.size(); ++i)
         out << (i ? " AND " : "") << column_sql(q.joinPredicates[i].left) << " = " << column_sql(q.joinPredicates[i].right);
   }
   if (q.groupBy) {
      out << "\n  GROUP BY ";
      for (std::size_t i = 0; i < q.groupBy->size(); ++i) out << (i ? ", " : "") << column_sql((*q.groupBy)[i]);
   }
   return out.str();
}

std::string to_sql(const SqlScript& script) {
   std::ostringstream out;
   for (auto& s : script.statements) {
      if (auto* t = std::get_if<CreateTable>(&s)) {
         out << "CREATE TABLE " << t->name << " (";
         for (std::size_t i = 0; i < t->columns.size(); ++i)
            out << (i ? ", " : "") << t->columns[i].name << " " << column_type_name(t->columns[i].type);
         if (!t->primaryKey.empty()) {
            out << ", PRIMARY KEY (";
            for (std::size_t i = 0; i < t->primaryKey.size(); ++i) out << (i ? ", " : "") << t->primaryKey[i];
            out << ")";
         }
         out << ");\n";
      } else {
         auto& v = std::get<CreateView>(s);
         out << "CREATE VIEW " << v.name << " AS\n  " << to_sql(v.query) << ";\n";
      }
   }
   return out.str();
}

std::vector<const CreateView*> views_in_dependency_order(const SqlScript& script) {
   auto views = script.views();
   std::map<std::string, std::size_t, std::less<>> index;
   for (std::size_t i = 0; i < views.size(); ++i) index[views[i]->name] = i;
   std::vector<std::vector<std::size_t>> readers(views.size());
   std::vector<std::size_t> pending(views.size(), 0);
   for (std::size_t i = 0; i < views.size(); ++i) {
      std::set<std::size_t> deps;
      for (auto& from : views[i]->query.fromTables) {
         auto it = index.find(from);
         if (it != index.end()) deps.insert(it->second);
      }
      for (auto d : deps) readers[d].push_back(i);
      pending[i] = deps.size();
   }
   std::vector<const CreateView*> order;
   std::set<std::size_t> ready;
   for (std::size_t i = 0; i < views.size(); ++i)
      if (pending[i] == 0) ready.insert(i);
   while (!ready.empty()) {
      auto next = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(views[next]);
      for (auto r : readers[next])
         if (--pending[r] == 0) ready.insert(r);
   }
   if (order.size() != views.size()) {
      for (std::size_t i = 0; i < views.size(); ++i)
         if (pending[i] != 0) throw Error(ErrorCode::CyclicDependency, "view '" + views[i]->name + "' depends on itself");
   }
   return order;
}

namespace {

std::string qualified(const ColumnRef& c) { return c.table + "." + c.column; }

}

JoinClosure::JoinClosure(const SelectQuery& q) {
   for (auto& jp : q.joinPredicates) {
      auto a = find(qualified(jp.left)), b = find(qualified(jp.right));
      if (a != b) parent_[a] = b;
   }
}

std::string JoinClosure::find(const std::string& x) const {
   std::string cur = x;
   for (auto it = parent_.find(cur); it != parent_.end(); it = parent_.find(cur)) cur = it->second;
   return cur;
}

bool JoinClosure::same(const ColumnRef& a, const ColumnRef& b) const {
   return find(qualified(a)) == find(qualified(b));
}

}
