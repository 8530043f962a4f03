#include "dynalloc/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "dynalloc/error.hpp"

namespace dynalloc {

namespace {

double mean_of(std::span<const double> w) {
  double s = 0.0;
  for (double x : w) s += x;
  return s / static_cast<double>(w.size());
}

void require_nonempty(std::span<const double> w) {
  if (w.empty()) throw ValidationError("no paths");
}

double hinge(double x, double lambda) noexcept {
  return lambda > 0.0 ? smooth_max(x, lambda) : std::max(x, 0.0);
}

double hinge_derivative(double x, double lambda) noexcept {
  return lambda > 0.0 ? smooth_max_derivative(x, lambda) : (x > 0.0 ? 1.0 : 0.0);
}

}  // namespace

std::string_view to_string(ObjectiveKind kind) noexcept {
  switch (kind) {
    case ObjectiveKind::DSQ: return "DSQ";
    case ObjectiveKind::OSQ: return "OSQ";
    case ObjectiveKind::MV: return "MV";
    case ObjectiveKind::MCV: return "MCV";
    case ObjectiveKind::MSemiV: return "MSemiV";
  }
  return "?";
}

ObjectiveKind parse_objective_kind(std::string_view name) {
  for (auto k : {ObjectiveKind::DSQ, ObjectiveKind::OSQ, ObjectiveKind::MV, ObjectiveKind::MCV,
                 ObjectiveKind::MSemiV}) {
    if (name == to_string(k)) return k;
  }
  throw ValidationError("unknown objective kind '" + std::string(name) + "'");
}

void ObjectiveSpec::validate() const {
  switch (kind) {
    case ObjectiveKind::DSQ:
    case ObjectiveKind::OSQ:
      if (!(gamma > 0.0)) throw ValidationError("objective: gamma must be > 0");
      if (kind == ObjectiveKind::OSQ && !(epsilon >= 0.0))
        throw ValidationError("objective: epsilon must be >= 0");
      break;
    case ObjectiveKind::MCV:
      if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("objective: alpha must lie in (0,1)");
      if (!(lambda_smooth >= 0.0)) throw ValidationError("objective: lambda_smooth must be >= 0");
      [[fallthrough]];
    case ObjectiveKind::MV:
    case ObjectiveKind::MSemiV:
      if (!(rho > 0.0)) throw ValidationError("objective: rho must be > 0");
      break;
  }
}

ObjectiveSpec ObjectiveSpec::dsq(double gamma) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::DSQ;
  s.gamma = gamma;
  return s;
}

ObjectiveSpec ObjectiveSpec::osq(double gamma, double epsilon) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::OSQ;
  s.gamma = gamma;
  s.epsilon = epsilon;
  return s;
}

ObjectiveSpec ObjectiveSpec::mv(double rho) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::MV;
  s.rho = rho;
  return s;
}

ObjectiveSpec ObjectiveSpec::mcv(double rho, double alpha, double lambda_smooth) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::MCV;
  s.rho = rho;
  s.alpha = alpha;
  s.lambda_smooth = lambda_smooth;
  return s;
}

ObjectiveSpec ObjectiveSpec::msemiv(double rho) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::MSemiV;
  s.rho = rho;
  return s;
}

double smooth_max(double x, double lambda) noexcept {
  if (x > lambda) return x;
  if (x < -lambda) return 0.0;
  return x * x / (4.0 * lambda) + 0.5 * x + 0.25 * lambda;
}

double smooth_max_derivative(double x, double lambda) noexcept {
  if (x > lambda) return 1.0;
  if (x < -lambda) return 0.0;
  return x / (2.0 * lambda) + 0.5;
}

ObjectiveValue evaluate(const ObjectiveSpec& spec, std::span<const double> w, double xi) {
  require_nonempty(w);
  const double n = static_cast<double>(w.size());
  const double wbar = mean_of(w);
  ObjectiveValue out;
  out.mean_wealth = wbar;
  double acc = 0.0;
  switch (spec.kind) {
    case ObjectiveKind::DSQ:
      for (double x : w) acc += (x - spec.gamma) * (x - spec.gamma);
      out.value = acc / n;
      break;
    case ObjectiveKind::OSQ:
      for (double x : w) {
        const double shortfall = std::min(x - spec.gamma, 0.0);
        acc += shortfall * shortfall - spec.epsilon * x;
      }
      out.value = acc / n;
      break;
    case ObjectiveKind::MV:
      for (double x : w) acc += (x - wbar) * (x - wbar);
      out.value = -(wbar - spec.rho * acc / n);
      break;
    case ObjectiveKind::MSemiV:
      for (double x : w) {
        const double down = std::min(x - wbar, 0.0);
        acc += down * down;
      }
      out.value = -(wbar - spec.rho * acc / n);
      break;
    case ObjectiveKind::MCV:
      for (double x : w) acc += -spec.rho * x - xi + hinge(xi - x, spec.lambda_smooth) / spec.alpha;
      out.value = acc / n;
      out.xi = xi;
      break;
  }
  return out;
}

Cotangents cotangents(const ObjectiveSpec& spec, std::span<const double> w, double xi) {
  require_nonempty(w);
  const std::size_t count = w.size();
  const double n = static_cast<double>(count);
  const double inv_n = 1.0 / n;
  Cotangents out;
  out.d_terminal.resize(count);
  auto& d = out.d_terminal;
  switch (spec.kind) {
    case ObjectiveKind::DSQ:
      for (std::size_t j = 0; j < count; ++j) d[j] = 2.0 * (w[j] - spec.gamma) * inv_n;
      break;
    case ObjectiveKind::OSQ:
      for (std::size_t j = 0; j < count; ++j)
        d[j] = (2.0 * std::min(w[j] - spec.gamma, 0.0) - spec.epsilon) * inv_n;
      break;
    case ObjectiveKind::MV:
    case ObjectiveKind::MSemiV: {
      // Phase 1: batch reduction; phase 2: per-path map. The risk term couples
      // every path through Wbar: dR/dW_j = (2/n) r_j - (2/n^2) sum_k r_k.
      const bool semi = spec.kind == ObjectiveKind::MSemiV;
      const double wbar = mean_of(w);
      double sum_r = 0.0;
      for (double x : w) sum_r += semi ? std::min(x - wbar, 0.0) : (x - wbar);
      for (std::size_t j = 0; j < count; ++j) {
        const double r = semi ? std::min(w[j] - wbar, 0.0) : (w[j] - wbar);
        const double d_risk = 2.0 * r * inv_n - 2.0 * sum_r * inv_n * inv_n;
        d[j] = -inv_n + spec.rho * d_risk;
      }
      break;
    }
    case ObjectiveKind::MCV: {
      double sum_slope = 0.0;
      for (std::size_t j = 0; j < count; ++j) {
        const double slope = hinge_derivative(xi - w[j], spec.lambda_smooth);
        sum_slope += slope;
        d[j] = (-spec.rho - slope / spec.alpha) * inv_n;
      }
      out.d_xi = -1.0 + sum_slope * inv_n / spec.alpha;
      break;
    }
  }
  return out;
}

std::size_t tail_count(std::size_t n, double alpha) noexcept {
  const double k = std::ceil(alpha * static_cast<double>(n) * (1.0 - 1e-12));
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(k, 1.0)), 1, n);
}

CvarResult empirical_cvar(std::span<const double> w, double alpha) {
  require_nonempty(w);
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  const std::size_t k = tail_count(w.size(), alpha);
  std::vector<double> sorted(w.begin(), w.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  CvarResult out;
  out.var = sorted[k - 1];
  std::sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k));
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += sorted[i];
  out.cvar = acc / static_cast<double>(k);
  return out;
}

}  // namespace dynalloc
