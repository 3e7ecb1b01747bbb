#include "sqlml/runtime/interpreter.hpp"
#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

namespace sqlml::runtime {

TensorValue TensorValue::scalar(double v) { return {{}, {v}}; }

TensorValue TensorValue::vector(std::vector<double> v) {
   std::vector<std::size_t> shape{v.size()};
   return {shape, std::move(v)};
}

TensorValue TensorValue::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
   if (v.size() != rows * cols) throw Error(ErrorCode::LengthMismatch, "matrix data does not match its shape");
   return {{rows, cols}, std::move(v)};
}

TensorValue TensorValue::zeros(std::vector<std::size_t> shape) {
   std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
   return {std::move(shape), std::vector<double>(n, 0.0)};
}

double TensorValue::item() const {
   if (data.size() != 1) throw Error(ErrorCode::ShapeMismatch, "expected a scalar, got " + std::to_string(data.size()) + " values");
   return data[0];
}

std::string format_double(double v) {
   char buf[64];
   auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
   return std::string(buf, ptr);
}

namespace {

std::string shape_text(const std::vector<std::size_t>& s) {
   std::string out = "[";
   for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
   return out + "]";
}

[[noreturn]] void mismatch(const std::string& what, const TensorValue& a, const TensorValue& b) {
   throw Error(ErrorCode::ShapeMismatch, what + ": shapes " + shape_text(a.shape) + " and " + shape_text(b.shape));
}

std::size_t axis_index(ir::Axis a) { return a == ir::Axis::Rows ? 0 : 1; }

struct AxisSplit {
   std::size_t outer = 1, mid = 1, inner = 1;
};

AxisSplit split_at(const std::vector<std::size_t>& shape, std::size_t k) {
   AxisSplit s;
   for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i < k) s.outer *= shape[i];
      else if (i == k) s.mid = shape[i];
      else s.inner *= shape[i];
   }
   return s;
}

using Tape = std::unordered_map<const ir::Expr*, TensorValue>;

class Evaluator {
   public:
   Evaluator(const ir::TensorProgram& p, const Bindings& env) : program(p), values(env) { check_bindings(); }

   const ir::TensorProgram& program;
   Bindings values;
   Tape tape;

   void run() {
      for (auto& a : program.assignments) {
         auto v = forward(*a.expr);
         for (double x : v.data)
            if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteValue, "view '" + a.name + "' produced a non-finite value");
         values[a.name] = std::move(v);
      }
   }

   private:
   void check_bindings() const {
      std::map<std::string, std::size_t> symbols;
      for (auto* list : {&program.inputs, &program.parameters})
         for (auto& d : *list) {
            auto it = values.find(d.name);
            if (it == values.end()) throw Error(ErrorCode::MissingInput, "no value bound for '" + d.name + "'");
            auto& v = it->second;
            if (v.shape.size() != d.shape.size())
               throw Error(ErrorCode::ShapeMismatch, "'" + d.name + "' has shape " + shape_text(v.shape) + ", expected " + ir::to_string(d.shape));
            for (std::size_t i = 0; i < d.shape.size(); ++i) {
               auto& sym = d.shape[i];
               std::size_t literal = 0;
               auto [ptr, ec] = std::from_chars(sym.data(), sym.data() + sym.size(), literal);
               bool isLiteral = ec == std::errc() && ptr == sym.data() + sym.size();
               if (isLiteral ? literal != v.shape[i] : (symbols.count(sym) && symbols[sym] != v.shape[i]))
                  throw Error(ErrorCode::ShapeMismatch, "'" + d.name + "' has shape " + shape_text(v.shape) + ", expected " + ir::to_string(d.shape));
               if (!isLiteral) symbols[sym] = v.shape[i];
            }
         }
   }

   TensorValue forward(const ir::Expr& e) {
      TensorValue out = compute(e);
      tape[&e] = out;
      return out;
   }

   TensorValue compute(const ir::Expr& e) {
      using K = ir::Expr::Kind;
      switch (e.kind) {
         case K::ScalarConst: return TensorValue::scalar(e.value);
         case K::Var: {
            auto it = values.find(e.name);
            if (it == values.end()) throw Error(ErrorCode::MissingInput, "no value for '" + e.name + "'");
            return it->second;
         }
         case K::Elementwise: {
            auto a = forward(*e.args[0]);
            auto b = forward(*e.args[1]);
            return elementwise(e.elemOp, a, b);
         }
         case K::Unary: {
            auto a = forward(*e.args[0]);
            for (auto& x : a.data) {
               switch (e.unaryOp) {
                  case ir::UnaryOp::Neg: x = -x; break;
                  case ir::UnaryOp::Exp: x = std::exp(x); break;
                  case ir::UnaryOp::Square: x = x * x; break;
                  case ir::UnaryOp::Log:
                     if (x < 0 || std::isnan(x)) throw Error(ErrorCode::NonFiniteValue, "logarithm of a negative value " + format_double(x));
                     x = std::log(std::max(x, logFloor));
                     break;
               }
            }
            return a;
         }
         case K::Reduce: {
            auto a = forward(*e.args[0]);
            if (e.reduceOp == ir::ReduceOp::Size) return TensorValue::scalar(static_cast<double>(a.size()));
            if (e.axis == ir::Axis::All) {
               double s = std::accumulate(a.data.begin(), a.data.end(), 0.0);
               if (e.reduceOp == ir::ReduceOp::Mean) s /= static_cast<double>(a.size());
               return TensorValue::scalar(s);
            }
            std::size_t k = axis_index(e.axis);
            if (k >= a.rank()) throw Error(ErrorCode::ShapeMismatch, "reduction over axis " + std::to_string(k) + " of shape " + shape_text(a.shape));
            auto sp = split_at(a.shape, k);
            std::vector<std::size_t> shape = a.shape;
            shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(k));
            TensorValue out = TensorValue::zeros(shape);
            for (std::size_t o = 0; o < sp.outer; ++o)
               for (std::size_t m = 0; m < sp.mid; ++m)
                  for (std::size_t i = 0; i < sp.inner; ++i) out.data[o * sp.inner + i] += a.data[(o * sp.mid + m) * sp.inner + i];
            if (e.reduceOp == ir::ReduceOp::Mean)
               for (auto& x : out.data) x /= static_cast<double>(sp.mid);
            return out;
         }
         case K::TensorDot: {
            auto a = forward(*e.args[0]);
            auto b = forward(*e.args[1]);
            if (a.rank() == 0 || b.rank() == 0 || a.shape.back() != b.shape.front()) mismatch("tensordot", a, b);
            std::size_t k = a.shape.back();
            std::size_t M = std::accumulate(a.shape.begin(), a.shape.end() - 1, std::size_t{1}, std::multiplies<>());
            std::size_t N = std::accumulate(b.shape.begin() + 1, b.shape.end(), std::size_t{1}, std::multiplies<>());
            std::vector<std::size_t> shape(a.shape.begin(), a.shape.end() - 1);
            shape.insert(shape.end(), b.shape.begin() + 1, b.shape.end());
            TensorValue out = TensorValue::zeros(shape);
            for (std::size_t m = 0; m < M; ++m)
               for (std::size_t t = 0; t < k; ++t) {
                  double av = a.data[m * k + t];
                  for (std::size_t j = 0; j < N; ++j) out.data[m * N + j] += av * b.data[t * N + j];
               }
            return out;
         }
         case K::Slice: {
            auto a = forward(*e.args[0]);
            if (!e.range.empty()) throw Error(ErrorCode::Internal, "slice over '" + e.range + "' was not bound to a column range");
            if (a.rank() == 0) throw Error(ErrorCode::ShapeMismatch, "slice of a scalar");
            std::size_t D = a.shape.back(), L = static_cast<std::size_t>(e.length), B = static_cast<std::size_t>(e.begin);
            if (B + L > D) throw Error(ErrorCode::ShapeMismatch, "slice [" + std::to_string(B) + ", " + std::to_string(B + L) + ") past dimension " + std::to_string(D));
            std::size_t outer = D ? a.size() / D : 0;
            auto shape = a.shape;
            shape.back() = L;
            TensorValue out = TensorValue::zeros(shape);
            for (std::size_t o = 0; o < outer; ++o)
               for (std::size_t l = 0; l < L; ++l) out.data[o * L + l] = a.data[o * D + B + l];
            return out;
         }
      }
      throw Error(ErrorCode::UnsupportedNode, "unknown node kind");
   }

   static TensorValue elementwise(ir::ElemOp op, const TensorValue& a, const TensorValue& b) {
      auto apply = [op](double x, double y) {
         switch (op) {
            case ir::ElemOp::Add: return x + y;
            case ir::ElemOp::Sub: return x - y;
            case ir::ElemOp::Mul: return x * y;
            case ir::ElemOp::Div: return x / y;
         }
         return 0.0;
      };
      if (a.shape == b.shape) {
         TensorValue out = a;
         for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = apply(a.data[i], b.data[i]);
         return out;
      }
      if (a.rank() == 0) {
         TensorValue out = b;
         for (auto& y : out.data) y = apply(a.data[0], y);
         return out;
      }
      if (b.rank() == 0) {
         TensorValue out = a;
         for (auto& x : out.data) x = apply(x, b.data[0]);
         return out;
      }
      mismatch(std::string(ir::elem_op_name(op)), a, b);
   }
};

void accumulate_into(TensorValue& target, const TensorValue& g) {
   if (target.data.empty() && target.shape.empty()) {
      target = g;
      return;
   }
   for (std::size_t i = 0; i < g.size(); ++i) target.data[i] += g.data[i];
}

/// Gradient flowing into an operand that may have been broadcast from a scalar
TensorValue unbroadcast(const TensorValue& g, const TensorValue& operand) {
   if (operand.rank() == 0 && g.rank() != 0) return TensorValue::scalar(std::accumulate(g.data.begin(), g.data.end(), 0.0));
   return g;
}

class Backprop {
   public:
   Backprop(const Tape& t, Bindings& adj) : tape(t), adjoints(adj) {}

   void run(const ir::Expr& e, const TensorValue& up) {
      using K = ir::Expr::Kind;
      switch (e.kind) {
         case K::ScalarConst: return;
         case K::Var: {
            auto it = adjoints.find(e.name);
            if (it == adjoints.end()) adjoints.emplace(e.name, up);
            else accumulate_into(it->second, up);
            return;
         }
         case K::Elementwise: {
            auto& a = value(*e.args[0]);
            auto& b = value(*e.args[1]);
            TensorValue ga = up, gb = up;
            for (std::size_t i = 0; i < up.size(); ++i) {
               double x = a.rank() == 0 ? a.data[0] : a.data[i];
               double y = b.rank() == 0 ? b.data[0] : b.data[i];
               double u = up.data[i];
               switch (e.elemOp) {
                  case ir::ElemOp::Add: ga.data[i] = u, gb.data[i] = u; break;
                  case ir::ElemOp::Sub: ga.data[i] = u, gb.data[i] = -u; break;
                  case ir::ElemOp::Mul: ga.data[i] = u * y, gb.data[i] = u * x; break;
                  case ir::ElemOp::Div: ga.data[i] = u / y, gb.data[i] = -u * x / (y * y); break;
               }
            }
            run(*e.args[0], unbroadcast(ga, a));
            run(*e.args[1], unbroadcast(gb, b));
            return;
         }
         case K::Unary: {
            auto& a = value(*e.args[0]);
            auto& out = value(e);
            TensorValue g = up;
            for (std::size_t i = 0; i < g.size(); ++i) {
               switch (e.unaryOp) {
                  case ir::UnaryOp::Neg: g.data[i] = -up.data[i]; break;
                  case ir::UnaryOp::Exp: g.data[i] = up.data[i] * out.data[i]; break;
                  case ir::UnaryOp::Square: g.data[i] = up.data[i] * 2 * a.data[i]; break;
                  case ir::UnaryOp::Log: g.data[i] = a.data[i] < logFloor ? 0.0 : up.data[i] / a.data[i]; break;
               }
            }
            run(*e.args[0], g);
            return;
         }
         case K::Reduce: {
            auto& a = value(*e.args[0]);
            TensorValue g = TensorValue::zeros(a.shape);
            if (e.reduceOp == ir::ReduceOp::Size) {
               run(*e.args[0], g);
               return;
            }
            if (e.axis == ir::Axis::All) {
               double u = up.data[0];
               if (e.reduceOp == ir::ReduceOp::Mean) u /= static_cast<double>(a.size());
               std::fill(g.data.begin(), g.data.end(), u);
            } else {
               auto sp = split_at(a.shape, axis_index(e.axis));
               double scale = e.reduceOp == ir::ReduceOp::Mean ? 1.0 / static_cast<double>(sp.mid) : 1.0;
               for (std::size_t o = 0; o < sp.outer; ++o)
                  for (std::size_t m = 0; m < sp.mid; ++m)
                     for (std::size_t i = 0; i < sp.inner; ++i) g.data[(o * sp.mid + m) * sp.inner + i] = up.data[o * sp.inner + i] * scale;
            }
            run(*e.args[0], g);
            return;
         }
         case K::TensorDot: {
            auto& a = value(*e.args[0]);
            auto& b = value(*e.args[1]);
            std::size_t k = a.shape.back();
            std::size_t M = std::accumulate(a.shape.begin(), a.shape.end() - 1, std::size_t{1}, std::multiplies<>());
            std::size_t N = std::accumulate(b.shape.begin() + 1, b.shape.end(), std::size_t{1}, std::multiplies<>());
            TensorValue ga = TensorValue::zeros(a.shape), gb = TensorValue::zeros(b.shape);
            for (std::size_t m = 0; m < M; ++m)
               for (std::size_t t = 0; t < k; ++t) {
                  double av = a.data[m * k + t], acc = 0;
                  for (std::size_t j = 0; j < N; ++j) {
                     double u = up.data[m * N + j];
                     acc += u * b.data[t * N + j];
                     gb.data[t * N + j] += av * u;
                  }
                  ga.data[m * k + t] = acc;
               }
            run(*e.args[0], ga);
            run(*e.args[1], gb);
            return;
         }
         case K::Slice: {
            auto& a = value(*e.args[0]);
            TensorValue g = TensorValue::zeros(a.shape);
            std::size_t D = a.shape.back(), L = static_cast<std::size_t>(e.length), B = static_cast<std::size_t>(e.begin);
            std::size_t outer = D ? a.size() / D : 0;
            for (std::size_t o = 0; o < outer; ++o)
               for (std::size_t l = 0; l < L; ++l) g.data[o * D + B + l] = up.data[o * L + l];
            run(*e.args[0], g);
            return;
         }
      }
   }

   private:
   const Tape& tape;
   Bindings& adjoints;

   const TensorValue& value(const ir::Expr& e) const {
      auto it = tape.find(&e);
      if (it == tape.end()) throw Error(ErrorCode::Internal, "node missing from the tape");
      return it->second;
   }
};

}

Bindings eval(const ir::TensorProgram& p, const Bindings& env) {
   Evaluator ev(p, env);
   ev.run();
   return std::move(ev.values);
}

double eval_objective(const ir::TensorProgram& p, const Bindings& env) {
   auto values = eval(p, env);
   return values.at(p.objective).item();
}

GradResult grad(const ir::TensorProgram& p, const Bindings& env) {
   Evaluator ev(p, env);
   ev.run();
   GradResult result;
   result.objective = ev.values.at(p.objective).item();
   Bindings adjoints;
   adjoints.emplace(p.objective, TensorValue::scalar(1.0));
   Backprop bp(ev.tape, adjoints);
   for (auto it = p.assignments.rbegin(); it != p.assignments.rend(); ++it) {
      auto adj = adjoints.find(it->name);
      if (adj == adjoints.end()) continue;
      auto up = adj->second;
      auto& own = ev.values.at(it->name);
      if (up.rank() == 0 && own.rank() != 0) {
         TensorValue full = own;
         std::fill(full.data.begin(), full.data.end(), up.data[0]);
         up = full;
      }
      bp.run(*it->expr, up);
   }
   for (auto& d : p.parameters) {
      auto it = adjoints.find(d.name);
      if (it != adjoints.end()) result.gradients[d.name] = it->second;
      else result.gradients[d.name] = TensorValue::zeros(ev.values.at(d.name).shape);
   }
   return result;
}

Bindings slice_rows(const Bindings& inputs, std::size_t rows, std::size_t begin, std::size_t end) {
   Bindings out;
   for (auto& [name, v] : inputs) {
      if (v.rank() == 0 || v.shape[0] != rows) {
         out[name] = v;
         continue;
      }
      std::size_t stride = rows ? v.size() / rows : 0;
      TensorValue s;
      s.shape = v.shape;
      s.shape[0] = end - begin;
      s.data.assign(v.data.begin() + static_cast<std::ptrdiff_t>(begin * stride), v.data.begin() + static_cast<std::ptrdiff_t>(end * stride));
      out[name] = std::move(s);
   }
   return out;
}

namespace {

Bindings merged(const Bindings& a, const Bindings& b) {
   Bindings out = a;
   for (auto& [k, v] : b) out[k] = v;
   return out;
}

std::size_t observation_count(const ir::TensorProgram& p, const Bindings& inputs) {
   for (auto& d : p.inputs)
      if (!d.shape.empty() && d.shape[0] == "n") {
         auto it = inputs.find(d.name);
         if (it != inputs.end() && it->second.rank() > 0) return it->second.shape[0];
      }
   return 0;
}

}

TrainResult gd_train(const ir::TensorProgram& p, const Bindings& inputs, Bindings start, const TrainOptions& options) {
   if (options.iterations < 1) throw Error(ErrorCode::ConfigError, "iterations must be at least 1");
   if (!(options.learningRate > 0)) throw Error(ErrorCode::ConfigError, "learning rate must be positive");
   TrainResult result;
   result.parameters = std::move(start);
   std::size_t n = observation_count(p, inputs);
   std::size_t batch = options.batchSize ? static_cast<std::size_t>(*options.batchSize) : n;
   if (batch == 0 || batch > n) batch = n;
   std::size_t cursor = 0;

   auto gradient_step = [&](std::int64_t iteration) {
      Bindings env;
      if (batch == n) env = merged(inputs, result.parameters);
      else {
         std::size_t end = std::min(cursor + batch, n);
         env = merged(slice_rows(inputs, n, cursor, end), result.parameters);
         cursor = end == n ? 0 : end;
      }
      GradResult g;
      try {
         g = grad(p, env);
      } catch (const Error& e) {
         if (e.code() == ErrorCode::NonFiniteValue && iteration > 0)
            throw Error(ErrorCode::DivergenceDetected, "training diverged at iteration " + std::to_string(iteration) + ": " + e.what());
         throw;
      }
      return g;
   };

   GradResult g = gradient_step(0);
   result.lossTrace.reserve(static_cast<std::size_t>(options.iterations));
   for (std::int64_t it = 1; it <= options.iterations; ++it) {
      for (auto& [name, gv] : g.gradients) {
         for (double x : gv.data)
            if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteGradient, "gradient of '" + name + "' is not finite at iteration " + std::to_string(it));
         auto& w = result.parameters.at(name);
         for (std::size_t i = 0; i < w.size(); ++i) w.data[i] -= options.learningRate * gv.data[i];
      }
      double loss;
      if (batch == n) {
         g = gradient_step(it);
         loss = g.objective;
      } else {
         try {
            loss = eval_objective(p, merged(inputs, result.parameters));
         } catch (const Error& e) {
            if (e.code() != ErrorCode::NonFiniteValue) throw;
            throw Error(ErrorCode::DivergenceDetected, "training diverged at iteration " + std::to_string(it) + ": " + e.what());
         }
         if (it < options.iterations) g = gradient_step(it);
      }
      if (!std::isfinite(loss) || loss > options.divergenceThreshold)
         throw Error(ErrorCode::DivergenceDetected, "training diverged at iteration " + std::to_string(it) + ": loss " + format_double(loss));
      result.lossTrace.push_back(loss);
      if (options.onIteration) options.onIteration(it, loss);
   }
   return result;
}

Bindings initial_parameters(const ir::TensorProgram& p, std::uint64_t seed, double initRange) {
   std::mt19937_64 rng(seed);
   std::uniform_real_distribution<double> dist(-initRange, initRange);
   Bindings out;
   for (auto& d : p.parameters) {
      std::vector<std::size_t> shape;
      for (auto& sym : d.shape) {
         std::size_t size = 0;
         auto [ptr, ec] = std::from_chars(sym.data(), sym.data() + sym.size(), size);
         if (ec != std::errc() || ptr != sym.data() + sym.size())
            throw Error(ErrorCode::Internal, "parameter '" + d.name + "' has unbound dimension " + sym);
         shape.push_back(size);
      }
      auto v = TensorValue::zeros(shape);
      if (initRange > 0)
         for (auto& x : v.data) x = dist(rng);
      out[d.name] = std::move(v);
   }
   return out;
}

GradCheckResult finite_diff_check(const ir::TensorProgram& p, const Bindings& env, double h, double tolerance) {
   auto analytic = grad(p, env);
   GradCheckResult r;
   Bindings probe = env;
   for (auto& d : p.parameters) {
      auto& g = analytic.gradients.at(d.name);
      auto& w = probe.at(d.name);
      for (std::size_t i = 0; i < w.size(); ++i) {
         double orig = w.data[i];
         w.data[i] = orig + h;
         double up = eval_objective(p, probe);
         w.data[i] = orig - h;
         double down = eval_objective(p, probe);
         w.data[i] = orig;
         double numeric = (up - down) / (2 * h);
         double err = std::abs(g.data[i] - numeric) / std::max({1.0, std::abs(g.data[i]), std::abs(numeric)});
         if (r.worstParameter.empty() || err > r.maxError) {
            r.maxError = err;
            r.worstParameter = d.name;
            r.worstIndex = i;
         }
      }
   }
   r.passed = r.maxError <= tolerance;
   return r;
}

std::string loss_trace_csv(const std::vector<double>& trace) {
   std::string out = "iteration,loss\n";
   for (std::size_t i = 0; i < trace.size(); ++i) out += std::to_string(i + 1) + "," + format_double(trace[i]) + "\n";
   return out;
}

}
