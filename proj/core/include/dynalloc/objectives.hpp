#pragma once

/**
 * @file objectives.hpp
 * @brief Sample-average objectives over terminal wealth, all stored as
 * minimization problems, and their exact per-path cotangents.
 *
 *   DSQ    mean((W - gamma)^2)
 *   OSQ    mean(min(W - gamma, 0)^2 - eps * W)
 *   MV     -[Wbar - rho * mean((W - Wbar)^2)]
 *   MCV    mean(-rho * W - xi + (1/alpha) * psi(xi - W))
 *   MSemiV -[Wbar - rho * mean(min(W - Wbar, 0)^2)]
 *
 * Wbar is the mean over the supplied sample; psi is the C1 smoothing of
 * max(x, 0) with half-width lambda_smooth (plain max when lambda_smooth = 0).
 */

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dynalloc {

enum class ObjectiveKind { DSQ, OSQ, MV, MCV, MSemiV };

std::string_view to_string(ObjectiveKind kind) noexcept;
ObjectiveKind parse_objective_kind(std::string_view name);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::DSQ;
  double gamma = 0.0;            ///< DSQ/OSQ wealth target
  double rho = 0.0;              ///< MV/MCV/MSemiV scalarization
  double alpha = 0.05;           ///< MCV tail level
  double epsilon = 1e-6;         ///< OSQ regularizer
  double lambda_smooth = 1e-3;   ///< MCV max-smoothing half-width

  bool has_xi() const noexcept { return kind == ObjectiveKind::MCV; }
  void validate() const;

  static ObjectiveSpec dsq(double gamma);
  static ObjectiveSpec osq(double gamma, double epsilon = 1e-6);
  static ObjectiveSpec mv(double rho);
  static ObjectiveSpec mcv(double rho, double alpha = 0.05, double lambda_smooth = 1e-3);
  static ObjectiveSpec msemiv(double rho);
};

struct ObjectiveValue {
  double value = 0.0;  ///< minimization convention
  double mean_wealth = 0.0;
  std::optional<double> xi;
};

struct Cotangents {
  std::vector<double> d_terminal;
  double d_xi = 0.0;
};

/// Smoothed max(x, 0): x above lambda, 0 below -lambda, quadratic between.
double smooth_max(double x, double lambda) noexcept;
double smooth_max_derivative(double x, double lambda) noexcept;

ObjectiveValue evaluate(const ObjectiveSpec& spec, std::span<const double> terminal_wealth,
                        double xi = 0.0);

Cotangents cotangents(const ObjectiveSpec& spec, std::span<const double> terminal_wealth,
                      double xi = 0.0);

struct CvarResult {
  double cvar = 0.0;  ///< mean of the ceil(alpha n) smallest outcomes
  double var = 0.0;   ///< the ceil(alpha n)-th smallest outcome
};

/// Lower-tail CVaR of wealth (larger is better), nearest-rank convention.
CvarResult empirical_cvar(std::span<const double> terminal_wealth, double alpha);

/// Number of tail observations used by empirical_cvar.
std::size_t tail_count(std::size_t n, double alpha) noexcept;

}  // namespace dynalloc
