#include "sqlml/ir/tensor_ir.hpp"
#include <algorithm>
#include <charconv>
#include <functional>
#include <set>
#include <sstream>

namespace sqlml::ir {

std::string_view axis_name(Axis a) {
   switch (a) {
      case Axis::All: return "None";
      case Axis::Rows: return "0";
      case Axis::Columns: return "1";
   }
   return "?";
}

std::string_view elem_op_name(ElemOp op) {
   switch (op) {
      case ElemOp::Add: return "add";
      case ElemOp::Sub: return "sub";
      case ElemOp::Mul: return "mul";
      case ElemOp::Div: return "div";
   }
   return "?";
}

std::string_view unary_op_name(UnaryOp op) {
   switch (op) {
      case UnaryOp::Neg: return "neg";
      case UnaryOp::Exp: return "exp";
      case UnaryOp::Log: return "log";
      case UnaryOp::Square: return "square";
   }
   return "?";
}

std::string_view reduce_op_name(ReduceOp op) {
   switch (op) {
      case ReduceOp::Sum: return "sum";
      case ReduceOp::Mean: return "mean";
      case ReduceOp::Size: return "size";
   }
   return "?";
}

ExprPtr constant(double v) {
   auto e = std::make_shared<Expr>();
   e->kind = Expr::Kind::ScalarConst;
   e->value = v;
   return e;
}

ExprPtr var(std::string name, VarKind kind) {
   auto e = std::make_shared<Expr>();
   e->kind = Expr::Kind::Var;
   e->name = std::move(name);
   e->varKind = kind;
   return e;
}

ExprPtr elementwise(ElemOp op, ExprPtr a, ExprPtr b) {
   auto e = std::make_shared<Expr>();
   e->kind = Expr::Kind::Elementwise;
   e->elemOp = op;
   e->args = {std::move(a), std::move(b)};
   return e;
}

ExprPtr unary(UnaryOp op, ExprPtr a) {
   auto e = std::make_shared<Expr>();
   e->kind = Expr::Kind::Unary;
   e->unaryOp = op;
   e->args = {std::move(a)};
   return e;
}

ExprPtr reduce(ReduceOp op, Axis axis, ExprPtr a) {
   auto e = std::make_shared<Expr>();
   e->kind = Expr::Kind::Reduce;
   e->reduceOp = op;
   e->axis = axis;
   e->args = {std::move(a)};
   return e;
}

ExprPtr tensordot(ExprPtr a, ExprPtr b) {
   auto e = std::make_shared<Expr>();
   e->kind = Expr::Kind::TensorDot;
   e->args = {std::move(a), std::move(b)};
   return e;
}

ExprPtr slice(ExprPtr a, std::int64_t begin, std::int64_t length) {
   auto e = std::make_shared<Expr>();
   e->kind = Expr::Kind::Slice;
   e->begin = begin;
   e->length = length;
   e->args = {std::move(a)};
   return e;
}

ExprPtr symbolic_slice(ExprPtr a, std::string range) {
   auto e = std::make_shared<Expr>();
   e->kind = Expr::Kind::Slice;
   e->range = std::move(range);
   e->args = {std::move(a)};
   return e;
}

bool structurally_equal(const Expr& a, const Expr& b) {
   if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
   switch (a.kind) {
      case Expr::Kind::ScalarConst:
         if (a.value != b.value) return false;
         break;
      case Expr::Kind::Var:
         if (a.name != b.name || a.varKind != b.varKind) return false;
         break;
      case Expr::Kind::Elementwise:
         if (a.elemOp != b.elemOp) return false;
         break;
      case Expr::Kind::Unary:
         if (a.unaryOp != b.unaryOp) return false;
         break;
      case Expr::Kind::Reduce:
         if (a.reduceOp != b.reduceOp || a.axis != b.axis) return false;
         break;
      case Expr::Kind::TensorDot: break;
      case Expr::Kind::Slice:
         if (a.begin != b.begin || a.length != b.length || a.range != b.range) return false;
         break;
   }
   for (std::size_t i = 0; i < a.args.size(); ++i)
      if (!structurally_equal(*a.args[i], *b.args[i])) return false;
   return true;
}

const Declaration* TensorProgram::find_declaration(std::string_view name) const {
   for (auto* list : {&inputs, &parameters})
      for (auto& d : *list)
         if (d.name == name) return &d;
   return nullptr;
}

const Assignment* TensorProgram::find_assignment(std::string_view name) const {
   for (auto& a : assignments)
      if (a.name == name) return &a;
   return nullptr;
}

namespace {

[[noreturn]] void shape_error(const Expr& e, const std::string& message) {
   throw Error(ErrorCode::ShapeMismatch, message + " in " + to_string(e));
}

}

Shape infer_shape(const Expr& e, const std::map<std::string, Shape, std::less<>>& env) {
   switch (e.kind) {
      case Expr::Kind::ScalarConst: return {};
      case Expr::Kind::Var: {
         auto it = env.find(e.name);
         if (it == env.end()) throw Error(ErrorCode::UnknownTable, "undefined name '" + e.name + "'");
         return it->second;
      }
      case Expr::Kind::Elementwise: {
         auto a = infer_shape(*e.args[0], env), b = infer_shape(*e.args[1], env);
         if (a.empty()) return b;
         if (b.empty() || a == b) return a;
         shape_error(e, "operands have shapes " + to_string(a) + " and " + to_string(b));
      }
      case Expr::Kind::Unary: return infer_shape(*e.args[0], env);
      case Expr::Kind::Reduce: {
         auto a = infer_shape(*e.args[0], env);
         if (e.reduceOp == ReduceOp::Size && e.axis != Axis::All) shape_error(e, "size counts all elements only");
         switch (e.axis) {
            case Axis::All: return {};
            case Axis::Rows:
               if (a.empty()) shape_error(e, "axis 0 reduction of a scalar");
               a.erase(a.begin());
               return a;
            case Axis::Columns:
               if (a.size() < 2) shape_error(e, "axis 1 reduction of shape " + to_string(a));
               a.erase(a.begin() + 1);
               return a;
         }
         return a;
      }
      case Expr::Kind::TensorDot: {
         auto a = infer_shape(*e.args[0], env), b = infer_shape(*e.args[1], env);
         if (a.empty() || b.empty() || a.back() != b.front())
            shape_error(e, "cannot contract " + to_string(a) + " with " + to_string(b));
         Shape out(a.begin(), a.end() - 1);
         out.insert(out.end(), b.begin() + 1, b.end());
         return out;
      }
      case Expr::Kind::Slice: {
         auto a = infer_shape(*e.args[0], env);
         if (a.empty()) shape_error(e, "slice of a scalar");
         if (!e.range.empty()) {
            a.back() = "F_" + e.range;
            return a;
         }
         if (e.begin < 0 || e.length <= 0) shape_error(e, "empty slice");
         std::int64_t size = 0;
         auto& last = a.back();
         auto [ptr, ec] = std::from_chars(last.data(), last.data() + last.size(), size);
         if (ec == std::errc() && ptr == last.data() + last.size() && e.begin + e.length > size)
            shape_error(e, "slice past the end of dimension " + last);
         a.back() = std::to_string(e.length);
         return a;
      }
   }
   throw Error(ErrorCode::UnsupportedNode, "unknown node kind");
}

std::map<std::string, Shape, std::less<>> infer_shapes(const TensorProgram& p) {
   std::map<std::string, Shape, std::less<>> env;
   for (auto* list : {&p.inputs, &p.parameters})
      for (auto& d : *list) env[d.name] = d.shape;
   for (auto& a : p.assignments) env[a.name] = infer_shape(*a.expr, env);
   return env;
}

std::vector<std::string> free_names(const Expr& e) {
   std::vector<std::string> out;
   std::function<void(const Expr&)> walk = [&](const Expr& x) {
      if (x.kind == Expr::Kind::Var && std::find(out.begin(), out.end(), x.name) == out.end()) out.push_back(x.name);
      for (auto& a : x.args) walk(*a);
   };
   walk(e);
   return out;
}

std::vector<Diagnostic> validate(const TensorProgram& p) {
   std::vector<Diagnostic> out;
   std::map<std::string, Shape, std::less<>> env;
   std::set<std::string> seen;
   auto declare = [&](const std::string& name) {
      if (!seen.insert(name).second) out.push_back({ErrorCode::Internal, "name '" + name + "' is defined twice"});
   };
   for (auto* list : {&p.inputs, &p.parameters})
      for (auto& d : *list) {
         declare(d.name);
         env[d.name] = d.shape;
      }
   for (auto& a : p.assignments) {
      declare(a.name);
      if (!a.expr) {
         out.push_back({ErrorCode::Internal, "assignment '" + a.name + "' has no expression"});
         continue;
      }
      try {
         env[a.name] = infer_shape(*a.expr, env);
      } catch (const Error& e) {
         out.push_back({e.code(), "in '" + a.name + "': " + e.what()});
      }
   }
   if (p.parameters.empty()) out.push_back({ErrorCode::Internal, "program has no parameters"});
   auto obj = env.find(p.objective);
   if (!p.find_assignment(p.objective)) {
      out.push_back({ErrorCode::Internal, "objective '" + p.objective + "' is not assigned"});
   } else if (obj != env.end() && !obj->second.empty()) {
      out.push_back({ErrorCode::ShapeMismatch, "objective '" + p.objective + "' has shape " + to_string(obj->second) + ", expected a scalar"});
   }

   std::set<std::string> reachable;
   std::function<void(const std::string&)> visit = [&](const std::string& name) {
      if (!reachable.insert(name).second) return;
      if (auto* a = p.find_assignment(name); a && a->expr)
         for (auto& n : free_names(*a->expr)) visit(n);
   };
   visit(p.objective);
   for (auto& d : p.parameters)
      if (!reachable.count(d.name)) out.push_back({ErrorCode::Internal, "parameter '" + d.name + "' does not affect the objective"});
   return out;
}

void check(const TensorProgram& p) {
   auto diags = validate(p);
   if (!diags.empty()) throw Error(diags.front().code, diags.front().message);
}

namespace {

std::string number_text(double v) {
   char buf[64];
   auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
   return std::string(buf, ptr);
}

void render(const Expr& e, std::ostringstream& out) {
   switch (e.kind) {
      case Expr::Kind::ScalarConst: out << number_text(e.value); return;
      case Expr::Kind::Var: out << e.name; return;
      case Expr::Kind::Elementwise: out << '(' << elem_op_name(e.elemOp); break;
      case Expr::Kind::Unary: out << '(' << unary_op_name(e.unaryOp); break;
      case Expr::Kind::Reduce: out << '(' << reduce_op_name(e.reduceOp) << ' ' << axis_name(e.axis); break;
      case Expr::Kind::TensorDot: out << "(tensordot"; break;
      case Expr::Kind::Slice:
         if (e.range.empty()) out << "(slice " << e.begin << ' ' << e.length;
         else out << "(slice " << e.range;
         break;
   }
   for (auto& a : e.args) {
      out << ' ';
      render(*a, out);
   }
   out << ')';
}

}

std::string to_string(const Expr& e) {
   std::ostringstream out;
   render(e, out);
   return out.str();
}

std::string to_string(const Shape& s) {
   std::string out = "[";
   for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + s[i];
   return out + "]";
}

std::string to_string(const TensorProgram& p) {
   std::ostringstream out;
   for (auto& d : p.inputs) out << "input " << d.name << " : " << to_string(d.shape) << '\n';
   for (auto& d : p.parameters) out << "param " << d.name << " : " << to_string(d.shape) << '\n';
   for (auto& a : p.assignments) out << a.name << " = " << to_string(*a.expr) << '\n';
   out << "minimize " << p.objective << '\n';
   return out.str();
}

}
