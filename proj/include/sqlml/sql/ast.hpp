#pragma once

#include "sqlml/errors.hpp"
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sqlml::sql {

enum class ColumnType { Int, Double, String };

std::string_view column_type_name(ColumnType type);

struct ColumnDef {
   std::string name;
   ColumnType type;

   bool operator==(const ColumnDef&) const = default;
};

struct CreateTable {
   std::string name;
   std::vector<ColumnDef> columns;
   /// Empty when the table declares no primary key
   std::vector<std::string> primaryKey;
   SourcePos pos;

   const ColumnDef* find_column(std::string_view column) const;
   bool operator==(const CreateTable& o) const { return name == o.name && columns == o.columns && primaryKey == o.primaryKey; }
};

/// A column reference. `table` is empty only while the parser has not yet
/// resolved an unqualified name.
struct ColumnRef {
   std::string table;
   std::string column;

   bool operator==(const ColumnRef&) const = default;
   auto operator<=>(const ColumnRef&) const = default;
};

enum class BinaryOp { Add, Sub, Mul, Div };
enum class Function { Sum, Count, Avg, Exp, Ln, Pow };

std::string_view binary_op_symbol(BinaryOp op);
std::string_view function_name(Function f);
bool is_aggregate(Function f);

/// The numeric expression tree of a view's single computed projection.
/// `(-1)*e` and `-e` are both represented as Neg.
struct NumericExpr {
   enum class Kind { Const, Column, Neg, Binary, Func };

   Kind kind = Kind::Const;
   double value = 0;
   ColumnRef column;
   BinaryOp op = BinaryOp::Add;
   Function func = Function::Sum;
   std::vector<NumericExpr> args;

   static NumericExpr constant(double v);
   static NumericExpr column_ref(std::string table, std::string column);
   static NumericExpr neg(NumericExpr e);
   static NumericExpr binary(BinaryOp op, NumericExpr l, NumericExpr r);
   static NumericExpr call(Function f, std::vector<NumericExpr> args);

   bool is_column() const { return kind == Kind::Column; }
   bool contains_aggregate() const;

   bool operator==(const NumericExpr&) const = default;
};

struct Projection {
   NumericExpr expr;
   std::string alias;

   bool operator==(const Projection&) const = default;
};

struct JoinPredicate {
   ColumnRef left;
   ColumnRef right;

   bool operator==(const JoinPredicate&) const = default;
};

struct SelectQuery {
   std::vector<Projection> projections;
   /// Index of the one numeric projection; every other projection is a plain column alias
   std::size_t numericIndex = 0;
   std::vector<std::string> fromTables;
   std::vector<JoinPredicate> joinPredicates;
   std::optional<std::vector<ColumnRef>> groupBy;

   const Projection& numeric_projection() const { return projections.at(numericIndex); }
   bool operator==(const SelectQuery&) const = default;
};

struct CreateView {
   std::string name;
   SelectQuery query;
   SourcePos pos;

   bool operator==(const CreateView& o) const { return name == o.name && query == o.query; }
};

using Statement = std::variant<CreateTable, CreateView>;

struct SqlScript {
   std::vector<Statement> statements;

   std::vector<const CreateTable*> tables() const;
   std::vector<const CreateView*> views() const;
   const CreateTable* find_table(std::string_view name) const;
   const CreateView* find_view(std::string_view name) const;

   bool operator==(const SqlScript&) const = default;
};

/// Every relation a numeric expression reads from, in first-use order
std::vector<std::string> referenced_tables(const NumericExpr& e);

/// Equivalence classes of qualified columns under a query's join equalities
class JoinClosure {
   public:
   explicit JoinClosure(const SelectQuery& q);

   bool same(const ColumnRef& a, const ColumnRef& b) const;

   private:
   std::map<std::string, std::string> parent_;
   std::string find(const std::string& x) const;
};

/// Views ordered so each comes after the views it reads; ties keep script
/// order. Throws Error(CyclicDependency) naming a view on the cycle.
std::vector<const CreateView*> views_in_dependency_order(const SqlScript& script);

/// Render SQL text that parses back to the same tree
std::string to_sql(const NumericExpr& e);
std::string to_sql(const SelectQuery& q);
std::string to_sql(const SqlScript& script);

}
