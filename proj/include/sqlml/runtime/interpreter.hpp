#pragma once

#include "sqlml/ir/tensor_ir.hpp"
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sqlml::runtime {

/// Dense row-major tensor of doubles; rank 0 is a scalar
struct TensorValue {
   std::vector<std::size_t> shape;
   std::vector<double> data;

   static TensorValue scalar(double v);
   static TensorValue vector(std::vector<double> v);
   static TensorValue matrix(std::size_t rows, std::size_t cols, std::vector<double> v);
   static TensorValue zeros(std::vector<std::size_t> shape);

   std::size_t rank() const { return shape.size(); }
   std::size_t size() const { return data.size(); }
   /// The value of a scalar (or one-element) tensor
   double item() const;
   bool operator==(const TensorValue&) const = default;
};

using Bindings = std::map<std::string, TensorValue, std::less<>>;

/// Arguments below this are clamped before taking a logarithm
inline constexpr double logFloor = 1e-12;

/// Evaluate every assignment. `env` holds inputs and parameters. Throws
/// Error(ShapeMismatch) for values that do not fit the program and
/// Error(NonFiniteValue) when a view evaluates to NaN or infinity.
Bindings eval(const ir::TensorProgram& p, const Bindings& env);

double eval_objective(const ir::TensorProgram& p, const Bindings& env);

struct GradResult {
   double objective = 0;
   /// d objective / d parameter, one entry per program parameter
   Bindings gradients;
};

/// Reverse-mode gradient of the objective with respect to all parameters
GradResult grad(const ir::TensorProgram& p, const Bindings& env);

struct TrainOptions {
   std::int64_t iterations = 1000;
   double learningRate = 1e-5;
   /// Rows per update, taken sequentially; nullopt for full batch
   std::optional<std::int64_t> batchSize;
   /// Loss above this counts as divergence
   double divergenceThreshold = 1e12;
   /// Called after each update with the 1-based iteration and the new loss
   std::function<void(std::int64_t, double)> onIteration;
};

struct TrainResult {
   Bindings parameters;
   /// lossTrace[i] is the full-data loss after update i + 1
   std::vector<double> lossTrace;
};

/// Plain gradient descent from `start` (parameters) with inputs `inputs`.
/// Throws Error(DivergenceDetected) or Error(NonFiniteGradient).
TrainResult gd_train(const ir::TensorProgram& p, const Bindings& inputs, Bindings start, const TrainOptions& options);

/// Starting weights for every parameter: zeros, or uniform in
/// [-initRange, initRange] from a generator seeded with `seed`. Parameter
/// shapes must be bound to literal sizes.
Bindings initial_parameters(const ir::TensorProgram& p, std::uint64_t seed, double initRange);

struct GradCheckResult {
   /// Largest |analytic - numeric| / max(1, |analytic|, |numeric|)
   double maxError = 0;
   std::string worstParameter;
   std::size_t worstIndex = 0;
   bool passed = false;
};

/// Compare analytic gradients against central differences with step h
GradCheckResult finite_diff_check(const ir::TensorProgram& p, const Bindings& env, double h = 1e-6, double tolerance = 1e-4);

/// "iteration,loss" CSV with one row per update
std::string loss_trace_csv(const std::vector<double>& trace);

/// Rows [begin, end) of every binding whose leading dimension is `rows`
Bindings slice_rows(const Bindings& inputs, std::size_t rows, std::size_t begin, std::size_t end);

std::string format_double(double v);

}
