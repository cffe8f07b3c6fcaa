#include "cetk/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <numeric>

namespace cetk {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l1_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

struct Correction {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

// Two-loop recursion: returns H * v for the current inverse-Hessian estimate.
std::vector<double> apply_inverse_hessian(const std::deque<Correction>& history,
                                          std::span<const double> v) {
  std::vector<double> q(v.begin(), v.end());
  std::vector<double> alpha(history.size());
  for (std::size_t k = history.size(); k-- > 0;) {
    alpha[k] = history[k].rho * dot(history[k].s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * history[k].y[i];
  }
  if (!history.empty()) {
    const auto& last = history.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& qi : q) qi *= gamma;
  }
  for (std::size_t k = 0; k < history.size(); ++k) {
    const double beta = history[k].rho * dot(history[k].y, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += (alpha[k] - beta) * history[k].s[i];
  }
  return q;
}

}  // namespace

std::string_view stop_reason_name(LbfgsStop stop) {
  switch (stop) {
    case LbfgsStop::Converged: return "converged";
    case LbfgsStop::GradientVanished: return "gradient_vanished";
    case LbfgsStop::MaxIterations: return "max_iterations";
    case LbfgsStop::LineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

std::vector<double> pseudo_gradient(std::span<const double> x, std::span<const double> grad,
                                    double l1) {
  std::vector<double> pg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (l1 == 0.0) {
      pg[i] = grad[i];
    } else if (x[i] < 0.0) {
      pg[i] = grad[i] - l1;
    } else if (x[i] > 0.0) {
      pg[i] = grad[i] + l1;
    } else if (grad[i] + l1 < 0.0) {
      pg[i] = grad[i] + l1;
    } else if (grad[i] - l1 > 0.0) {
      pg[i] = grad[i] - l1;
    } else {
      pg[i] = 0.0;
    }
  }
  return pg;
}

LbfgsResult minimize_lbfgs(const SmoothObjective& objective, std::vector<double> x0,
                           const LbfgsConfig& config) {
  const std::size_t n = x0.size();
  const bool orthant_wise = config.l1 > 0.0;

  LbfgsResult result;
  std::vector<double> x = std::move(x0);
  std::vector<double> grad(n, 0.0);
  double smooth = objective(x, grad);
  ++result.evaluations;
  double f = smooth + config.l1 * l1_norm(x);
  result.trace.push_back(f);

  std::deque<Correction> history;
  std::vector<double> x_new(n);
  std::vector<double> grad_new(n);

  while (true) {
    const std::vector<double> pg = pseudo_gradient(x, grad, config.l1);
    if (std::sqrt(dot(pg, pg)) <= config.gradient_tolerance) {
      result.stop = LbfgsStop::GradientVanished;
      break;
    }
    if (result.iterations >= config.max_iterations) {
      result.stop = LbfgsStop::MaxIterations;
      break;
    }

    std::vector<double> dir = apply_inverse_hessian(history, pg);
    for (double& d : dir) d = -d;
    if (orthant_wise) {
      // Keep only components that descend along the pseudo-gradient.
      for (std::size_t i = 0; i < n; ++i) {
        if (dir[i] * pg[i] >= 0.0) dir[i] = 0.0;
      }
    }
    if (dot(dir, pg) >= 0.0) {
      // Curvature history produced an ascent direction; restart from steepest descent.
      history.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -pg[i];
    }

    std::vector<double> orthant(n, 0.0);
    if (orthant_wise) {
      for (std::size_t i = 0; i < n; ++i) {
        if (x[i] != 0.0) {
          orthant[i] = x[i] > 0.0 ? 1.0 : -1.0;
        } else {
          orthant[i] = pg[i] > 0.0 ? -1.0 : (pg[i] < 0.0 ? 1.0 : 0.0);
        }
      }
    }

    double step = 1.0;
    if (history.empty()) step = 1.0 / std::max(1.0, std::sqrt(dot(dir, dir)));

    bool accepted = false;
    double f_new = f;
    double smooth_new = smooth;
    for (std::size_t ls = 0; ls < config.max_linesearch; ++ls) {
      for (std::size_t i = 0; i < n; ++i) {
        double v = x[i] + step * dir[i];
        if (orthant_wise && v * orthant[i] <= 0.0) v = 0.0;
        x_new[i] = v;
      }
      smooth_new = objective(x_new, grad_new);
      ++result.evaluations;
      f_new = smooth_new + config.l1 * l1_norm(x_new);
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += pg[i] * (x_new[i] - x[i]);
      if (std::isfinite(f_new) && f_new <= f + config.armijo * decrease) {
        accepted = true;
        break;
      }
      step *= config.backtrack;
    }
    if (!accepted) {
      result.stop = LbfgsStop::LineSearchFailed;
      break;
    }

    Correction c;
    c.s.resize(n);
    c.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      c.s[i] = x_new[i] - x[i];
      c.y[i] = grad_new[i] - grad[i];
    }
    const double sy = dot(c.s, c.y);
    if (sy > 1e-16) {
      c.rho = 1.0 / sy;
      history.push_back(std::move(c));
      if (history.size() > config.memory) history.pop_front();
    }

    const double f_prev = f;
    x.swap(x_new);
    grad.swap(grad_new);
    smooth = smooth_new;
    f = f_new;
    ++result.iterations;
    result.trace.push_back(f);

    if (std::abs(f_prev - f) <= config.tolerance * std::max(std::abs(f), 1e-12)) {
      result.stop = LbfgsStop::Converged;
      break;
    }
  }

  result.x = std::move(x);
  result.objective = f;
  return result;
}

}  // namespace cetk
