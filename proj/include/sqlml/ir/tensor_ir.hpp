#pragma once

#include "sqlml/errors.hpp"
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sqlml::ir {

/// Reduction axis: All reduces every axis (printed None), Rows is axis 0,
/// Columns is axis 1
enum class Axis { All, Rows, Columns };

enum class VarKind { Parameter, Input, Derived };
enum class ElemOp { Add, Sub, Mul, Div };
enum class UnaryOp { Neg, Exp, Log, Square };
enum class ReduceOp { Sum, Mean, Size };

std::string_view axis_name(Axis a);
std::string_view elem_op_name(ElemOp op);
std::string_view unary_op_name(UnaryOp op);
std::string_view reduce_op_name(ReduceOp op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
   enum class Kind { ScalarConst, Var, Elementwise, Unary, Reduce, TensorDot, Slice };

   Kind kind = Kind::ScalarConst;
   double value = 0;
   std::string name;
   VarKind varKind = VarKind::Derived;
   ElemOp elemOp = ElemOp::Add;
   UnaryOp unaryOp = UnaryOp::Neg;
   ReduceOp reduceOp = ReduceOp::Sum;
   Axis axis = Axis::All;
   /// Slice bounds along the last axis
   std::int64_t begin = 0, length = 0;
   /// Symbolic slice: the feature table whose range is meant, bound later
   std::string range;
   std::vector<ExprPtr> args;
};

ExprPtr constant(double v);
ExprPtr var(std::string name, VarKind kind);
ExprPtr elementwise(ElemOp op, ExprPtr a, ExprPtr b);
ExprPtr unary(UnaryOp op, ExprPtr a);
ExprPtr reduce(ReduceOp op, Axis axis, ExprPtr a);
ExprPtr tensordot(ExprPtr a, ExprPtr b);
ExprPtr slice(ExprPtr a, std::int64_t begin, std::int64_t length);
ExprPtr symbolic_slice(ExprPtr a, std::string range);

bool structurally_equal(const Expr& a, const Expr& b);

/// Symbolic shape; each entry names a dimension ("n", "F", or a literal size)
using Shape = std::vector<std::string>;

struct Declaration {
   std::string name;
   VarKind kind = VarKind::Input;
   Shape shape;
};

struct Assignment {
   std::string name;
   ExprPtr expr;
};

/// Straight-line tensor program: declarations, assignments in dependency
/// order, and the name of the scalar objective
struct TensorProgram {
   std::vector<Declaration> inputs;
   std::vector<Declaration> parameters;
   std::vector<Assignment> assignments;
   std::string objective;

   const Declaration* find_declaration(std::string_view name) const;
   const Assignment* find_assignment(std::string_view name) const;
};

/// Shape of an expression given shapes of the names it uses. Throws
/// Error(ShapeMismatch).
Shape infer_shape(const Expr& e, const std::map<std::string, Shape, std::less<>>& env);
/// Shapes of every declared and assigned name
std::map<std::string, Shape, std::less<>> infer_shapes(const TensorProgram& p);

struct Diagnostic {
   ErrorCode code;
   std::string message;
};

/// All problems found: undefined or duplicate names, shape errors, a
/// non-scalar objective, no parameters, parameters the objective does not use
std::vector<Diagnostic> validate(const TensorProgram& p);
/// Throws the first diagnostic as an Error
void check(const TensorProgram& p);

/// S-expression rendering, e.g. (div 1 (add 1 (exp (neg product))))
std::string to_string(const Expr& e);
std::string to_string(const Shape& s);
std::string to_string(const TensorProgram& p);

/// Names an expression reads, in first-use order
std::vector<std::string> free_names(const Expr& e);

}
