#pragma once

#include <cmath>

#include "cshield/common.hpp"

namespace cshield {

// Parameters of a proximity function, stored in unconstrained form:
// sigma1 = exp(a) in (0, inf), sigma2 = 1 + exp(b) in (1, inf). Gradient
// descent on (a, b) can never leave the valid domain.
struct ProximityParams {
  double a = 0.0;
  double b = 0.0;

  double sigma1() const { return std::exp(a); }
  double sigma2() const { return 1.0 + std::exp(b); }

  static ProximityParams from_sigmas(double sigma1, double sigma2) {
    if (!(sigma1 > 0.0)) throw SpecError("ProximityParams: sigma1 must be > 0");
    if (!(sigma2 > 1.0)) throw SpecError("ProximityParams: sigma2 must be > 1");
    return ProximityParams{std::log(sigma1), std::log(sigma2 - 1.0)};
  }
};

// 1 - exp(-(d / sigma1)^sigma2). Exactly 0 at d = 0, strictly increasing,
// saturating toward 1.
inline double proximity_eval(const ProximityParams& p, double d) {
  if (!(d >= 0.0)) throw SpecError("proximity_eval: distance must be nonnegative");
  if (d == 0.0) return 0.0;
  const double t = std::pow(d / p.sigma1(), p.sigma2());
  return -std::expm1(-t);
}

struct ProximityGrad {
  double wrt_a = 0.0;
  double wrt_b = 0.0;
  double wrt_d = 0.0;
};

// Analytic partials of proximity_eval with respect to (a, b) and d. At d = 0
// the function is identically zero on the region, so all partials are 0 by
// convention; the same applies when the power term under- or overflows.
inline ProximityGrad proximity_grad(const ProximityParams& p, double d) {
  if (!(d >= 0.0)) throw SpecError("proximity_grad: distance must be nonnegative");
  ProximityGrad g;
  if (d == 0.0) return g;
  const double s1 = p.sigma1();
  const double s2 = p.sigma2();
  const double u = d / s1;
  const double t = std::pow(u, s2);
  if (t == 0.0 || !std::isfinite(t)) return g;
  const double e = std::exp(-t);
  g.wrt_a = -e * s2 * t;
  g.wrt_b = e * t * std::log(u) * (s2 - 1.0);
  g.wrt_d = e * s2 * t / d;
  return g;
}

}  // namespace cshield
