#pragma once

// Limited-memory BFGS with the orthant-wise extension (OWL-QN) for an
// objective of the form  f(x) + l1 * |x|_1  where f is smooth. With l1 == 0
// this is plain L-BFGS with a backtracking Armijo line search.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cetk {

/// Evaluates the smooth part at x, writes its gradient into grad, returns f(x).
using SmoothObjective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsConfig {
  std::size_t memory = 6;
  std::size_t max_iterations = 200;
  /// Stop when |f_prev - f| <= tolerance * |f|.
  double tolerance = 1e-5;
  double l1 = 0.0;
  std::size_t max_linesearch = 40;
  double armijo = 1e-4;
  double backtrack = 0.5;
  /// Stop when the (pseudo-)gradient norm falls below this.
  double gradient_tolerance = 1e-10;
};

enum class LbfgsStop { Converged, GradientVanished, MaxIterations, LineSearchFailed };

struct LbfgsResult {
  std::vector<double> x;
  /// Full objective f(x) + l1 * |x|_1 at the returned point.
  double objective = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  /// Full objective after each accepted iteration, starting with x0.
  std::vector<double> trace;
  LbfgsStop stop = LbfgsStop::MaxIterations;
};

std::string_view stop_reason_name(LbfgsStop stop);

LbfgsResult minimize_lbfgs(const SmoothObjective& objective, std::vector<double> x0,
                           const LbfgsConfig& config);

/// Orthant-wise pseudo-gradient of f + l1*|x|_1 given the smooth gradient.
std::vector<double> pseudo_gradient(std::span<const double> x, std::span<const double> grad,
                                    double l1);

}  // namespace cetk
