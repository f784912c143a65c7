#pragma once

// Observer with a compact absorbing set: correction term k^, damping phi,
// observer vector field and the inter-sample output predictor.

#include <algorithm>
#include <string>

#include "absorb/core.hpp"

namespace absorb {

/// Piecewise-linear ramp p with p(s) = 0 for s <= a and p(s) = 1 for s >= b.
struct BlendingFn {
  double a = 1.0;
  double b = 1.5;

  double operator()(double s) const {
    if (s <= a) return 0.0;
    if (s >= b) return 1.0;
    return (s - a) / (b - a);
  }
};

inline void validate(const BlendingFn& fn) {
  if (!(fn.a < fn.b)) throw ConfigError("blending function: need a < b");
}

inline double blend_p(double s, const BlendingFn& fn) {
  validate(fn);
  return fn(s);
}

/// Selects whether the damping term phi enters k^. Disabling it exists only
/// for ablation checks.
enum class Damping { kEnabled, kDisabled };

/// phi(z, y, u) = max(0, gradV(z) f(z,u) + W(z) + p(V(z)) gradV(z) L (h(z) - y)).
inline double phi(const Vector& z, const Vector& y, const Vector& u,
                  const PlantModel& plant, const AssumptionData& assm,
                  const BlendingFn& fn) {
  const Vector grad = assm.grad_V(z);
  const Vector innovation = assm.L * (plant.h(z) - y);
  const double inner = grad.dot(plant.f(z, u)) + assm.W(z) +
                       fn(assm.V(z)) * grad.dot(innovation);
  return std::max(0.0, inner);
}

/// k^(z, y, u): L (h(z) - y) inside {V <= R}; outside, the component of
/// the flow that would violate dissipation along gradV is removed.
inline Vector observer_correction(const Vector& z, const Vector& y,
                                  const Vector& u, const PlantModel& plant,
                                  const AssumptionData& assm,
                                  const BlendingFn& fn,
                                  Damping damping = Damping::kEnabled) {
  Vector corr = assm.L * (plant.h(z) - y);
  if (damping == Damping::kDisabled || assm.V(z) <= assm.R) return corr;
  const Vector grad = assm.grad_V(z);
  const double grad_sq = grad.squaredNorm();
  if (grad_sq < 1e-24) {
    throw DegenerateGradientError(
        "observer: |grad V(z)| vanishes at a point with V(z) > R");
  }
  const double damp = phi(z, y, u, plant, assm, fn);
  if (damp > 0.0) corr -= (damp / grad_sq) * grad;
  return corr;
}

/// z' = f(z, u(t - r - tau)) + k^(z, w, u(t - r - tau)).
inline Vector observer_rhs(const Vector& z, const Vector& w,
                           const Vector& u_delayed, const PlantModel& plant,
                           const AssumptionData& assm, const BlendingFn& fn) {
  return plant.f(z, u_delayed) +
         observer_correction(z, w, u_delayed, plant, assm, fn);
}

/// w' = grad h(z) f(z, u(t - r - tau)) between samples.
inline Vector isp_rhs(const Vector& z, const Vector& u_delayed,
                      const PlantModel& plant) {
  return plant.jac_h(z) * plant.f(z, u_delayed);
}

/// w(tau_i) = y(tau_i).
inline Vector isp_reset(const Vector& y_sample) { return y_sample; }

}  // namespace absorb
