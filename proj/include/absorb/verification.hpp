#pragma once

// Sampling-based checkers for the standing assumptions of the absorbing-set
// observer/predictor design, plus the predictor convergence study.
//
// Each check is a pure margin function on a packed sample point (returning
// nullopt when the point misses the check's side conditions) reduced by
// run_check into a CheckReport. A check passes when its worst margin is at
// most the tolerance; negative margins are slack.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "absorb/core.hpp"
#include "absorb/observer.hpp"
#include "absorb/predictor.hpp"

namespace absorb {

inline constexpr double kDefaultTolerance = 1e-9;

struct CheckReport {
  std::string name;
  std::size_t points_tested = 0;
  std::size_t skipped = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();
  Vector worst_point;
  bool pass = false;
  double tolerance = kDefaultTolerance;
  std::uint64_t seed = 0;
};

using MarginFn = std::function<std::optional<double>(const Vector& point)>;

/// Reduces a margin function over sample points. Throws ConfigError on an
/// empty point set and InsufficientDataError when every point is skipped.
inline CheckReport run_check(std::string name, const std::vector<Vector>& points,
                             const MarginFn& margin, double tol,
                             std::uint64_t seed) {
  if (points.empty()) throw ConfigError(name + ": no sample points");
  CheckReport rep;
  rep.name = std::move(name);
  rep.tolerance = tol;
  rep.seed = seed;
  for (const Vector& p : points) {
    const std::optional<double> m = margin(p);
    if (!m) {
      ++rep.skipped;
      continue;
    }
    ++rep.points_tested;
    if (rep.points_tested == 1 || *m > rep.worst_margin) {
      rep.worst_margin = *m;
      rep.worst_point = p;
    }
  }
  if (rep.points_tested == 0) {
    throw InsufficientDataError(rep.name + ": all " +
                                std::to_string(rep.skipped) +
                                " samples miss the side conditions");
  }
  rep.pass = rep.worst_margin <= tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::array<int, 24> kPrimes = {
    2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
    41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};

inline double radical_inverse(std::uint64_t index, int base) {
  double inv = 1.0 / base;
  double scale = inv;
  double out = 0.0;
  while (index > 0) {
    out += static_cast<double>(index % base) * scale;
    index /= base;
    scale *= inv;
  }
  return out;
}

}  // namespace detail

/// Halton points in [0,1)^dim with a seeded random shift (mod 1) per axis.
class HaltonSequence {
 public:
  HaltonSequence(int dim, std::uint64_t seed) : dim_(dim), shift_(dim) {
    if (dim < 1 || dim > static_cast<int>(detail::kPrimes.size())) {
      throw ConfigError("halton: unsupported dimension");
    }
    std::uint64_t state = seed;
    for (int d = 0; d < dim; ++d) {
      shift_(d) =
          static_cast<double>(detail::splitmix64(state) >> 11) * 0x1.0p-53;
    }
    index_ = 1 + (detail::splitmix64(state) % 4096);
  }

  Vector next() {
    Vector p(dim_);
    for (int d = 0; d < dim_; ++d) {
      const double v = detail::radical_inverse(index_, detail::kPrimes[d]) + shift_(d);
      p(d) = v >= 1.0 ? v - 1.0 : v;
    }
    ++index_;
    return p;
  }

 private:
  int dim_;
  Vector shift_;
  std::uint64_t index_ = 1;
};

/// Bounding box of {V <= level} found by bisection along each coordinate
/// half-axis. Assumes V(0) <= level and V grows along each half-axis.
inline std::pair<Vector, Vector> sublevel_box(const ScalarMap& V, int n,
                                              double level) {
  if (!(V(Vector::Zero(n)) <= level)) {
    throw ConfigError("sublevel_box: origin outside the sublevel set");
  }
  Vector lo(n);
  Vector hi(n);
  for (int i = 0; i < n; ++i) {
    for (double sign : {-1.0, 1.0}) {
      auto at = [&](double s) {
        Vector x = Vector::Zero(n);
        x(i) = sign * s;
        return V(x);
      };
      double inside = 0.0;
      double outside = 1.0;
      int guard = 0;
      while (at(outside) <= level) {
        inside = outside;
        outside *= 2.0;
        if (++guard > 200) throw ConfigError("sublevel_box: set is unbounded");
      }
      for (int it = 0; it < 200 && outside - inside > 1e-12 * outside; ++it) {
        const double midpoint = 0.5 * (inside + outside);
        (at(midpoint) <= level ? inside : outside) = midpoint;
      }
      (sign < 0.0 ? lo(i) : hi(i)) = sign * outside;
    }
  }
  return {lo, hi};
}

/// One factor of a product sampling domain.
struct SampleBlock {
  enum class Kind { kLevelBand, kBox };
  Kind kind = Kind::kBox;
  int dim = 0;
  // Level band: level_lo <= V <= level_hi, or level_lo < V when lo_strict.
  double level_lo = -std::numeric_limits<double>::infinity();
  double level_hi = 0.0;
  bool lo_strict = false;
  Vector lo;
  Vector hi;

  static SampleBlock level_band(int n, double level_lo, double level_hi,
                                bool lo_strict = false) {
    SampleBlock b;
    b.kind = Kind::kLevelBand;
    b.dim = n;
    b.level_lo = level_lo;
    b.level_hi = level_hi;
    b.lo_strict = lo_strict;
    return b;
  }
  static SampleBlock sublevel(int n, double level) {
    return level_band(n, -std::numeric_limits<double>::infinity(), level);
  }
  static SampleBlock box(Vector lo, Vector hi) {
    SampleBlock b;
    b.kind = Kind::kBox;
    b.dim = static_cast<int>(lo.size());
    b.lo = std::move(lo);
    b.hi = std::move(hi);
    return b;
  }
};

struct SampleSet {
  std::vector<Vector> points;
  std::size_t rejected = 0;
  std::uint64_t seed = 0;
};

/// Draws `count` points of the product domain: quasi-random in the bounding
/// box of every factor, rejecting points that miss a level band.
inline SampleSet draw_samples(std::vector<SampleBlock> blocks,
                              const ScalarMap& V, std::size_t count,
                              std::uint64_t seed) {
  int total = 0;
  for (auto& b : blocks) {
    if (b.kind == SampleBlock::Kind::kLevelBand) {
      auto [lo, hi] = sublevel_box(V, b.dim, b.level_hi);
      b.lo = std::move(lo);
      b.hi = std::move(hi);
    }
    total += b.dim;
  }
  HaltonSequence seq(total, seed);
  SampleSet out;
  out.seed = seed;
  out.points.reserve(count);
  const std::size_t max_attempts = 1000 * count + 1000;
  std::size_t attempts = 0;
  while (out.points.size() < count) {
    if (++attempts > max_attempts) {
      throw InsufficientDataError("draw_samples: acceptance rate too low");
    }
    const Vector unit = seq.next();
    Vector p(total);
    bool accept = true;
    int offset = 0;
    for (const auto& b : blocks) {
      auto seg = p.segment(offset, b.dim);
      seg = b.lo.array() + unit.segment(offset, b.dim).array() * (b.hi - b.lo).array();
      if (b.kind == SampleBlock::Kind::kLevelBand) {
        const double v = V(seg);
        const bool above = b.lo_strict ? v > b.level_lo : v >= b.level_lo;
        if (!(above && v <= b.level_hi)) accept = false;
      }
      offset += b.dim;
    }
    if (accept) {
      out.points.push_back(std::move(p));
    } else {
      ++out.rejected;
    }
  }
  return out;
}

// Domain helpers for the individual checks. Point layouts are documented on
// the margin functions below.

inline SampleSet sample_h1(const PlantModel& plant, const AssumptionData& assm,
                           std::size_t count, std::uint64_t seed,
                           double level_max = 100.0) {
  return draw_samples({SampleBlock::level_band(plant.n, assm.R, level_max),
                       SampleBlock::box(plant.input_box.lo, plant.input_box.hi)},
                      assm.V, count, seed);
}

inline SampleSet sample_h2(const PlantModel& plant, const AssumptionData& assm,
                           std::size_t count, std::uint64_t seed) {
  return draw_samples({SampleBlock::sublevel(plant.n, assm.R)}, assm.V, count,
                      seed);
}

inline SampleSet sample_h3(const PlantModel& plant, const AssumptionData& assm,
                           std::size_t count, std::uint64_t seed) {
  return draw_samples({SampleBlock::sublevel(plant.n, assm.b),
                       SampleBlock::sublevel(plant.n, assm.R),
                       SampleBlock::box(plant.input_box.lo, plant.input_box.hi)},
                      assm.V, count, seed);
}

inline SampleSet sample_h4(const PlantModel& plant, const AssumptionData& assm,
                           std::size_t count, std::uint64_t seed) {
  return draw_samples({SampleBlock::level_band(plant.n, assm.a, assm.b, true),
                       SampleBlock::sublevel(plant.n, assm.R),
                       SampleBlock::box(plant.input_box.lo, plant.input_box.hi)},
                      assm.V, count, seed);
}

inline SampleSet sample_a1(const PlantModel& plant, const AssumptionData& assm,
                           std::size_t count, std::uint64_t seed) {
  return draw_samples({SampleBlock::sublevel(plant.n, assm.R),
                       SampleBlock::sublevel(plant.n, assm.b),
                       SampleBlock::box(plant.input_box.lo, plant.input_box.hi)},
                      assm.V, count, seed);
}

inline SampleSet sample_dissipation(const PlantModel& plant,
                                    const AssumptionData& assm,
                                    std::size_t count, std::uint64_t seed,
                                    double level_max = 100.0,
                                    double w_bound = 30.0) {
  return draw_samples(
      {SampleBlock::level_band(plant.n, assm.b, level_max),
       SampleBlock::box(Vector::Constant(plant.k_out, -w_bound),
                        Vector::Constant(plant.k_out, w_bound)),
       SampleBlock::box(plant.input_box.lo, plant.input_box.hi)},
      assm.V, count, seed);
}

// ---------------------------------------------------------------------------
// Margins
// ---------------------------------------------------------------------------

/// (x, u) with V(x) >= R: gradV(x) f(x,u) + W(x).
inline std::optional<double> margin_h1(const PlantModel& plant,
                                       const AssumptionData& assm,
                                       const Vector& p) {
  const Vector x = p.head(plant.n);
  const Vector u = p.tail(plant.m);
  if (!(assm.V(x) >= assm.R) || !plant.input_box.contains(u)) return {};
  return assm.grad_V(x).dot(plant.f(x, u)) + assm.W(x);
}

/// x with V(x) <= R: worst of gradP f(x, k(x)) + 2 mu |x|^2 and K1 |x|^2 - P(x).
inline std::optional<double> margin_h2(const PlantModel& plant,
                                       const AssumptionData& assm,
                                       const Vector& x) {
  if (!(assm.V(x) <= assm.R)) return {};
  const Vector u = clamp_input(assm.k_local(x), plant.input_box);
  const double sq = x.squaredNorm();
  const double decay = assm.grad_P(x).dot(plant.f(x, u)) + 2.0 * assm.mu * sq;
  const double lower = assm.K1 * sq - assm.P(x);
  return std::max(decay, lower);
}

namespace detail {

/// (z - x)' Q (f(z,u) + L(h(z) - h(x)) - f(x,u)).
inline double local_observer_contraction(const PlantModel& plant,
                                         const AssumptionData& assm,
                                         const Vector& z, const Vector& x,
                                         const Vector& u) {
  const Vector drift =
      plant.f(z, u) + assm.L * (plant.h(z) - plant.h(x)) - plant.f(x, u);
  return (z - x).dot(assm.Q * drift);
}

}  // namespace detail

/// (z, x, u) with V(z) <= b, V(x) <= R:
/// (z-x)'Q(f(z,u) + L(h(z)-h(x)) - f(x,u)) + omega |z-x|^2.
inline std::optional<double> margin_h3(const PlantModel& plant,
                                       const AssumptionData& assm,
                                       const Vector& p) {
  const Vector z = p.segment(0, plant.n);
  const Vector x = p.segment(plant.n, plant.n);
  const Vector u = p.tail(plant.m);
  if (!(assm.V(z) <= assm.b) || !(assm.V(x) <= assm.R) ||
      !plant.input_box.contains(u)) {
    return {};
  }
  return detail::local_observer_contraction(plant, assm, z, x, u) +
         assm.omega * (z - x).squaredNorm();
}

/// (z, x, u) with a < V(z) <= b, V(x) <= R and gradV(z) Q (z-x) < 0:
/// gradV(z)(f(z,u) + L(h(z)-h(x))) + W(z)
///   - (1-c)|gradV(z)|^2 [(z-x)'Q(...)] / [gradV(z) Q (z-x)].
inline std::optional<double> margin_h4(const PlantModel& plant,
                                       const AssumptionData& assm,
                                       const Vector& p) {
  const Vector z = p.segment(0, plant.n);
  const Vector x = p.segment(plant.n, plant.n);
  const Vector u = p.tail(plant.m);
  const double vz = assm.V(z);
  if (!(vz > assm.a && vz <= assm.b) || !(assm.V(x) <= assm.R) ||
      !plant.input_box.contains(u)) {
    return {};
  }
  const Vector grad = assm.grad_V(z);
  const double side = grad.dot(assm.Q * (z - x));
  if (!(side < 0.0)) return {};
  const double lhs =
      grad.dot(plant.f(z, u) + assm.L * (plant.h(z) - plant.h(x)));
  const double ratio =
      detail::local_observer_contraction(plant, assm, z, x, u) / side;
  return lhs + assm.W(z) - (1.0 - assm.c) * grad.squaredNorm() * ratio;
}

/// (z, x, u) with a < V(z) <= b, V(x) <= R, no sign condition:
/// gradV(z)(f(z,u) + L(h(z)-h(x))) + W(z). Where H3 holds this bounds the
/// H4 margin from above, so passing it certifies H4.
inline std::optional<double> margin_h4_sufficient(const PlantModel& plant,
                                                  const AssumptionData& assm,
                                                  const Vector& p) {
  const Vector z = p.segment(0, plant.n);
  const Vector x = p.segment(plant.n, plant.n);
  const Vector u = p.tail(plant.m);
  const double vz = assm.V(z);
  if (!(vz > assm.a && vz <= assm.b) || !(assm.V(x) <= assm.R) ||
      !plant.input_box.contains(u)) {
    return {};
  }
  return assm.grad_V(z).dot(plant.f(z, u) +
                            assm.L * (plant.h(z) - plant.h(x))) +
         assm.W(z);
}

/// (x, z, u) with V(x) <= R, V(z) <= b:
/// (z-x)'Q(f(z,u) + k^(z, h(x), u) - f(x,u)) + c omega |z-x|^2.
inline std::optional<double> margin_contraction_a1(
    const PlantModel& plant, const AssumptionData& assm, const BlendingFn& fn,
    const Vector& p, Damping damping = Damping::kEnabled) {
  const Vector x = p.segment(0, plant.n);
  const Vector z = p.segment(plant.n, plant.n);
  const Vector u = p.tail(plant.m);
  if (!(assm.V(x) <= assm.R) || !(assm.V(z) <= assm.b) ||
      !plant.input_box.contains(u)) {
    return {};
  }
  const Vector drift =
      plant.f(z, u) +
      observer_correction(z, plant.h(x), u, plant, assm, fn, damping) -
      plant.f(x, u);
  return (z - x).dot(assm.Q * drift) + assm.c * assm.omega * (z - x).squaredNorm();
}

/// (z, w, u) with V(z) >= b: gradV(z)(f(z,u) + k^(z,w,u)) + W(z).
inline std::optional<double> margin_dissipation(
    const PlantModel& plant, const AssumptionData& assm, const BlendingFn& fn,
    const Vector& p, Damping damping = Damping::kEnabled) {
  const Vector z = p.segment(0, plant.n);
  const Vector w = p.segment(plant.n, plant.k_out);
  const Vector u = p.tail(plant.m);
  if (!(assm.V(z) >= assm.b) || !plant.input_box.contains(u)) return {};
  return assm.grad_V(z).dot(plant.f(z, u) + observer_correction(
                                                z, w, u, plant, assm, fn, damping)) +
         assm.W(z);
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

inline CheckReport check_h1(const PlantModel& plant, const AssumptionData& assm,
                            const SampleSet& samples,
                            double tol = kDefaultTolerance) {
  return run_check("H1", samples.points,
                   [&](const Vector& p) { return margin_h1(plant, assm, p); },
                   tol, samples.seed);
}

inline CheckReport check_h2(const PlantModel& plant, const AssumptionData& assm,
                            const SampleSet& samples,
                            double tol = kDefaultTolerance) {
  return run_check("H2", samples.points,
                   [&](const Vector& p) { return margin_h2(plant, assm, p); },
                   tol, samples.seed);
}

inline CheckReport check_h3(const PlantModel& plant, const AssumptionData& assm,
                            const SampleSet& samples,
                            double tol = kDefaultTolerance) {
  return run_check("H3", samples.points,
                   [&](const Vector& p) { return margin_h3(plant, assm, p); },
                   tol, samples.seed);
}

inline CheckReport check_h4(const PlantModel& plant, const AssumptionData& assm,
                            const SampleSet& samples,
                            double tol = kDefaultTolerance) {
  return run_check("H4", samples.points,
                   [&](const Vector& p) { return margin_h4(plant, assm, p); },
                   tol, samples.seed);
}

inline CheckReport check_h4_sufficient(const PlantModel& plant,
                                       const AssumptionData& assm,
                                       const SampleSet& samples,
                                       double tol = kDefaultTolerance) {
  return run_check(
      "H4-sufficient", samples.points,
      [&](const Vector& p) { return margin_h4_sufficient(plant, assm, p); },
      tol, samples.seed);
}

inline CheckReport check_contraction_a1(const PlantModel& plant,
                                        const AssumptionData& assm,
                                        const BlendingFn& fn,
                                        const SampleSet& samples,
                                        double tol = kDefaultTolerance,
                                        Damping damping = Damping::kEnabled) {
  return run_check(damping == Damping::kEnabled ? "A1-contraction"
                                                : "A1-contraction-no-damping",
                   samples.points,
                   [&](const Vector& p) {
                     return margin_contraction_a1(plant, assm, fn, p, damping);
                   },
                   tol, samples.seed);
}

inline CheckReport check_dissipation_37(const PlantModel& plant,
                                        const AssumptionData& assm,
                                        const BlendingFn& fn,
                                        const SampleSet& samples,
                                        double tol = kDefaultTolerance,
                                        Damping damping = Damping::kEnabled) {
  return run_check(damping == Damping::kEnabled ? "dissipation"
                                                : "dissipation-no-damping",
                   samples.points,
                   [&](const Vector& p) {
                     return margin_dissipation(plant, assm, fn, p, damping);
                   },
                   tol, samples.seed);
}

// ---------------------------------------------------------------------------
// Derivative consistency
// ---------------------------------------------------------------------------

/// Largest |analytic - central difference| over all points and components.
inline double gradient_mismatch(const ScalarMap& fn, const VectorMap& grad,
                                const std::vector<Vector>& points,
                                double step = 1e-6) {
  double worst = 0.0;
  for (const Vector& x : points) {
    const Vector g = grad(x);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Vector xp = x;
      Vector xm = x;
      xp(i) += step;
      xm(i) -= step;
      const double fd = (fn(xp) - fn(xm)) / (2.0 * step);
      worst = std::max(worst, std::abs(fd - g(i)));
    }
  }
  return worst;
}

inline double jacobian_mismatch(const VectorMap& fn, const MatrixMap& jac,
                                const std::vector<Vector>& points,
                                double step = 1e-6) {
  double worst = 0.0;
  for (const Vector& x : points) {
    const Matrix J = jac(x);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Vector xp = x;
      Vector xm = x;
      xp(i) += step;
      xm(i) -= step;
      const Vector fd = (fn(xp) - fn(xm)) / (2.0 * step);
      worst = std::max(worst, (fd - J.col(i)).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Predictor convergence study
// ---------------------------------------------------------------------------

/// Classical RK4 solution of x' = f(x, u(s)) across the history window
/// [t_end - (r + tau), t_end], restarting at every input switch.
inline Vector rk4_window_flow(const PlantModel& plant, const Vector& x0,
                              const InputHistory& hist, double max_substep) {
  const double window = plant.delay_window();
  Vector x = x0;
  if (window == 0.0) return x;
  const double t_end = hist.t_end();
  hist.for_each_run(t_end - window, t_end,
                    [&](const Vector& u, double a, double b) {
    const auto steps =
        static_cast<long>(std::max(1.0, std::ceil((b - a) / max_substep - 1e-9)));
    const double h = (b - a) / static_cast<double>(steps);
    for (long s = 0; s < steps; ++s) {
      const Vector k1 = plant.f(x, u);
      const Vector k2 = plant.f(x + 0.5 * h * k1, u);
      const Vector k3 = plant.f(x + 0.5 * h * k2, u);
      const Vector k4 = plant.f(x + h * k3, u);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  });
  return x;
}

struct ConvergencePoint {
  int N = 0;
  double error = 0.0;
};

/// e(N) = |reference - Phi_N(x0, u~)| for each N, with an RK4 reference at
/// substep ref_substep <= 1e-4.
inline std::vector<ConvergencePoint> predictor_convergence_study(
    const PlantModel& plant, const Vector& x0, const InputHistory& hist,
    const std::vector<int>& N_list, double ref_substep = 1e-4) {
  if (!(ref_substep > 0.0 && ref_substep <= 1e-4)) {
    throw ConfigError("convergence study: ref_substep must lie in (0, 1e-4]");
  }
  if (N_list.empty()) throw ConfigError("convergence study: empty N list");
  for (std::size_t i = 1; i < N_list.size(); ++i) {
    if (!(N_list[i] > N_list[i - 1])) {
      throw ConfigError("convergence study: N list must be increasing");
    }
  }
  const Vector reference = rk4_window_flow(plant, x0, hist, ref_substep);
  std::vector<ConvergencePoint> out;
  for (int N : N_list) {
    out.push_back({N, (reference - euler_predict(x0, hist, N, plant)).norm()});
  }
  return out;
}

}  // namespace absorb
