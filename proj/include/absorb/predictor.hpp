#pragma once

// Approximate predictor: repeated explicit Euler over the delay window r + tau,
// with the input integral of every step computed exactly from the
// piecewise-constant history.

#include <vector>

#include "absorb/core.hpp"

namespace absorb {

/// Grid point i of the N-step Euler grid on [t_end - window, t_end]. The last
/// point is t_end itself so the final step never leaves the history.
inline double euler_grid_point(double t_end, double window, int N, int i) {
  if (i == N) return t_end;
  return (t_end - window) + (window * i) / N;
}

/// All Euler iterates x_0 = x0, ..., x_N. The history must cover
/// [t_end - (r + tau), t_end) where t_end = hist.t_end().
inline std::vector<Vector> euler_iterates(const Vector& x0,
                                          const InputHistory& hist, int N,
                                          const PlantModel& plant) {
  if (N < 1) throw ConfigError("predictor: N must be >= 1");
  std::vector<Vector> iterates;
  iterates.reserve(static_cast<std::size_t>(N) + 1);
  iterates.push_back(x0);
  const double window = plant.delay_window();
  if (window == 0.0) return iterates;

  const double t_end = hist.t_end();
  if (hist.t_min() > t_end - window) {
    throw CoverageError("predictor: input history shorter than r + tau");
  }
  Vector x = x0;
  Vector incr(x0.size());
  for (int i = 0; i < N; ++i) {
    const double s0 = euler_grid_point(t_end, window, N, i);
    const double s1 = euler_grid_point(t_end, window, N, i + 1);
    incr.setZero();
    hist.for_each_run(s0, s1, [&](const Vector& u, double a, double b) {
      incr += plant.f(x, u) * (b - a);
    });
    x += incr;
    iterates.push_back(x);
  }
  return iterates;
}

/// Phi_N(x0, u~): the last Euler iterate. Returns x0 when r + tau = 0.
inline Vector euler_predict(const Vector& x0, const InputHistory& hist, int N,
                            const PlantModel& plant) {
  return euler_iterates(x0, hist, N, plant).back();
}

/// True iff every Euler iterate stays in S2 = {V <= b}.
inline bool predict_in_set(const Vector& x0, const InputHistory& hist, int N,
                           const PlantModel& plant,
                           const AssumptionData& assm) {
  for (const Vector& xi : euler_iterates(x0, hist, N, plant)) {
    if (!(assm.V(xi) <= assm.b)) return false;
  }
  return true;
}

}  // namespace absorb
