#pragma once

// Planar benchmark plant
//
//   x1' = zeta x1 - 10 x1^3 + x2,   x2' = -13/4 x2 + u,   y = x1,
//
// with U = [-50 zeta sqrt(2), 50 zeta sqrt(2)] and the Lyapunov, observer and
// controller data that certify the absorbing-set assumptions for it. Besides
// the generic model, this header carries closed-form versions of phi, k^ and
// one predictor step that serve as independent cross-checks.

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "absorb/core.hpp"
#include "absorb/observer.hpp"
#include "absorb/predictor.hpp"

namespace absorb::planar {

/// 25001 zeta^2 + 2 zeta <= 4.
inline bool check_zeta_bound(double zeta) {
  if (!(zeta > 0.0)) throw ConfigError("zeta must be positive");
  return 25001.0 * zeta * zeta + 2.0 * zeta <= 4.0;
}

inline double input_bound(double zeta) { return 50.0 * zeta * std::sqrt(2.0); }

/// Lower blending level a = max(1, 10008/17 zeta^2, 1251 zeta^2 + 221/640).
inline double blend_lower_level(double zeta) {
  const double z2 = zeta * zeta;
  return std::max({1.0, (10008.0 / 17.0) * z2, 1251.0 * z2 + 221.0 / 640.0});
}

/// Unsaturated local controller k~(x) = -(3 zeta/4)(13 - 4 zeta) x1 + 20 zeta x1^3.
inline double local_control(const Vector& x, double zeta) {
  const double x1 = x(0);
  return -(3.0 * zeta / 4.0) * (13.0 - 4.0 * zeta) * x1 + 20.0 * zeta * x1 * x1 * x1;
}

/// Coefficient matrix M of the quadratic form P(x) = x' M x.
inline Matrix p_form(double zeta) {
  const double c0 = 2.0 / (zeta * (13.0 - 4.0 * zeta));
  Matrix M(2, 2);
  M << 0.5 + 4.0 * zeta * zeta * c0, 2.0 * zeta * c0,
      2.0 * zeta * c0, c0;
  return M;
}

struct Example {
  PlantModel plant;
  AssumptionData assm;
  BlendingFn blend;
  double zeta = 0.0;
};

/// Builds the model without checking the zeta bound. Used for counterexamples;
/// prefer build_example.
inline Example make_example_unchecked(double zeta, double b_level = 1.5,
                                      double c_frac = 0.5) {
  Example ex;
  ex.zeta = zeta;

  PlantModel& plant = ex.plant;
  plant.n = 2;
  plant.m = 1;
  plant.k_out = 1;
  plant.f = [zeta](const Vector& x, const Vector& u) {
    Vector dx(2);
    dx(0) = zeta * x(0) - 10.0 * x(0) * x(0) * x(0) + x(1);
    dx(1) = -3.25 * x(1) + u(0);
    return dx;
  };
  plant.h = [](const Vector& x) {
    Vector y(1);
    y(0) = x(0);
    return y;
  };
  plant.jac_h = [](const Vector&) {
    Matrix J(1, 2);
    J << 1.0, 0.0;
    return J;
  };
  plant.input_box = InputBox::symmetric(1, input_bound(zeta));

  const double c0 = 2.0 / (zeta * (13.0 - 4.0 * zeta));
  AssumptionData& assm = ex.assm;
  assm.V = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
  assm.grad_V = [](const Vector& x) { return Vector(x); };
  assm.W = [](const Vector& x) { return 0.125 * x.squaredNorm(); };
  assm.P = [zeta, c0](const Vector& x) {
    const double s = x(1) + 2.0 * zeta * x(0);
    return 0.5 * x(0) * x(0) + c0 * s * s;
  };
  assm.grad_P = [zeta, c0](const Vector& x) {
    const double s = x(1) + 2.0 * zeta * x(0);
    Vector g(2);
    g(0) = x(0) + 4.0 * zeta * c0 * s;
    g(1) = 2.0 * c0 * s;
    return g;
  };
  assm.k_local = [zeta](const Vector& x) {
    Vector u(1);
    u(0) = local_control(x, zeta);
    return u;
  };
  assm.L = Matrix(2, 1);
  assm.L << -2.0 * zeta, -1.0;
  assm.Q = Matrix::Identity(2, 2);
  assm.R = 1.0;
  assm.a = blend_lower_level(zeta);
  assm.b = b_level;
  assm.c = c_frac;
  assm.omega = zeta;

  // P decays at least like exp(-2 zeta t) inside S1, so mu = zeta lambda_min
  // and K1 = lambda_min of the quadratic form.
  const double lambda_min =
      Eigen::SelfAdjointEigenSolver<Matrix>(p_form(zeta)).eigenvalues()(0);
  assm.K1 = lambda_min;
  assm.mu = zeta * lambda_min;

  ex.blend = BlendingFn{assm.a, assm.b};
  return ex;
}

inline Example build_example(double zeta, double b_level = 1.5,
                             double c_frac = 0.5) {
  if (!check_zeta_bound(zeta)) {
    throw ConfigError("zeta = " + detail::fmt_time(zeta) +
                      " violates the bound 25001*zeta^2 + 2*zeta <= 4");
  }
  Example ex = make_example_unchecked(zeta, b_level, c_frac);
  if (!(b_level > ex.assm.a)) {
    throw ConfigError("b must exceed a = " + detail::fmt_time(ex.assm.a));
  }
  if (!(c_frac > 0.0 && c_frac < 1.0)) {
    throw ConfigError("c must lie in (0, 1)");
  }
  validate(ex.plant);
  validate(ex.assm, ex.plant);
  return ex;
}

/// Closed-form damping term for this plant.
inline double phi_closed_form(const Vector& z, double y, double u, double zeta,
                              const BlendingFn& fn) {
  const double z1 = z(0);
  const double z2 = z(1);
  const double inner = (zeta + 0.125 - 10.0 * z1 * z1) * z1 * z1 +
                       (z1 + u) * z2 - (25.0 / 8.0) * z2 * z2 -
                       fn(0.5 * (z1 * z1 + z2 * z2)) * (2.0 * zeta * z1 + z2) *
                           (z1 - y);
  return std::max(0.0, inner);
}

/// Closed-form correction: -(2 zeta, 1)'(z1 - y), minus phi z / |z|^2 outside
/// the disc |z|^2 <= 2.
inline Vector correction_closed_form(const Vector& z, double y, double u,
                                     double zeta, const BlendingFn& fn) {
  Vector k(2);
  k(0) = -2.0 * zeta * (z(0) - y);
  k(1) = -(z(0) - y);
  const double rho = z(0) * z(0) + z(1) * z(1);
  if (rho > 2.0) k -= (phi_closed_form(z, y, u, zeta, fn) / rho) * z;
  return k;
}

/// One step of the explicit predictor recursion, q_i -> q_{i+1}, on the
/// N-step grid over [t_end - window, t_end], t_end = hist.t_end(). The input
/// integral is accumulated run by run in the same order as euler_predict, so
/// composing N steps reproduces it bit for bit.
inline Vector predictor_step(const Vector& q, const InputHistory& hist, int i,
                             int N, double window, double zeta) {
  const double t_end = hist.t_end();
  const double s0 = euler_grid_point(t_end, window, N, i);
  const double s1 = euler_grid_point(t_end, window, N, i + 1);
  const double q1 = q(0);
  const double q2 = q(1);
  double incr1 = 0.0;
  double incr2 = 0.0;
  hist.for_each_run(s0, s1, [&](const Vector& u, double a, double b) {
    const double dt = b - a;
    incr1 += (zeta * q1 - 10.0 * q1 * q1 * q1 + q2) * dt;
    incr2 += (-3.25 * q2 + u(0)) * dt;
  });
  Vector next(2);
  next(0) = q1 + incr1;
  next(1) = q2 + incr2;
  return next;
}

}  // namespace absorb::planar
