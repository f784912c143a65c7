#pragma once

// Shared value types: plant model, assumption data, input/state histories,
// sampling partitions, simulation configuration and trajectories.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "absorb/errors.hpp"

namespace absorb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using VectorField = std::function<Vector(const Vector& x, const Vector& u)>;
using VectorMap = std::function<Vector(const Vector& x)>;
using MatrixMap = std::function<Matrix(const Vector& x)>;
using ScalarMap = std::function<double(const Vector& x)>;

namespace detail {

inline std::string fmt_time(double t) {
  std::ostringstream os;
  os.precision(17);
  os << t;
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Input set
// ---------------------------------------------------------------------------

/// Axis-aligned compact input set U = [lo_1, hi_1] x ... x [lo_m, hi_m].
struct InputBox {
  Vector lo;
  Vector hi;

  Eigen::Index dim() const { return lo.size(); }

  bool contains(const Vector& u) const {
    if (u.size() != lo.size()) return false;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      if (!(u(j) >= lo(j) && u(j) <= hi(j))) return false;
    }
    return true;
  }

  static InputBox symmetric(Eigen::Index m, double bound) {
    return {Vector::Constant(m, -bound), Vector::Constant(m, bound)};
  }
};

inline void validate(const InputBox& box) {
  if (box.lo.size() != box.hi.size() || box.lo.size() == 0) {
    throw ConfigError("input box: lo/hi dimension mismatch or empty");
  }
  for (Eigen::Index j = 0; j < box.lo.size(); ++j) {
    if (!(box.lo(j) <= box.hi(j))) {
      throw ConfigError("input box: lo > hi in component " + std::to_string(j));
    }
  }
}

/// Componentwise projection onto the box.
inline Vector clamp_input(const Vector& u_raw, const InputBox& box) {
  Vector out(u_raw.size());
  for (Eigen::Index j = 0; j < u_raw.size(); ++j) {
    out(j) = std::min(box.hi(j), std::max(box.lo(j), u_raw(j)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plant and assumption data
// ---------------------------------------------------------------------------

/// x'(t) = f(x(t), u(t - tau)),  y(tau_i) = h(x(tau_i - r)).
struct PlantModel {
  int n = 0;
  int m = 0;
  int k_out = 0;
  VectorField f;
  VectorMap h;
  MatrixMap jac_h;
  InputBox input_box;
  double r = 0.0;
  double tau = 0.0;

  double delay_window() const { return r + tau; }
  bool delay_free() const { return r == 0.0 && tau == 0.0; }
};

/// Lyapunov, observer and controller data for the four standing assumptions.
struct AssumptionData {
  ScalarMap V;
  VectorMap grad_V;
  ScalarMap W;
  ScalarMap P;
  VectorMap grad_P;
  VectorMap k_local;  // pre-clamp local controller
  Matrix L;           // n x k_out observer gain
  Matrix Q;           // n x n symmetric positive definite
  double R = 1.0;
  double a = 1.0;
  double b = 1.5;
  double c = 0.5;
  double omega = 0.0;
  double mu = 0.0;
  double K1 = 0.0;
};

inline void validate(const PlantModel& plant) {
  if (plant.n < 1 || plant.m < 1 || plant.k_out < 1) {
    throw ConfigError("plant: dimensions must be positive");
  }
  if (!plant.f || !plant.h || !plant.jac_h) {
    throw ConfigError("plant: f, h and jac_h must be set");
  }
  validate(plant.input_box);
  if (plant.input_box.dim() != plant.m) {
    throw ConfigError("plant: input box dimension differs from m");
  }
  for (Eigen::Index j = 0; j < plant.m; ++j) {
    if (!(plant.input_box.lo(j) <= 0.0 && 0.0 <= plant.input_box.hi(j))) {
      throw ConfigError("plant: input box must contain 0");
    }
  }
  if (!(plant.r >= 0.0) || !(plant.tau >= 0.0)) {
    throw ConfigError("plant: delays r and tau must be >= 0");
  }
  const Vector f0 = plant.f(Vector::Zero(plant.n), Vector::Zero(plant.m));
  const Vector h0 = plant.h(Vector::Zero(plant.n));
  if (f0.size() != plant.n || h0.size() != plant.k_out) {
    throw ConfigError("plant: f or h returns the wrong dimension");
  }
  if (f0.norm() > 1e-12 || h0.norm() > 1e-12) {
    throw ConfigError("plant: origin must be an equilibrium with h(0) = 0");
  }
}

inline void validate(const AssumptionData& assm, const PlantModel& plant) {
  if (!assm.V || !assm.grad_V || !assm.W || !assm.P || !assm.grad_P ||
      !assm.k_local) {
    throw ConfigError("assumption data: all callables must be set");
  }
  if (!(assm.R <= assm.a && assm.a < assm.b)) {
    throw ConfigError("assumption data: need R <= a < b");
  }
  if (!(assm.c > 0.0 && assm.c < 1.0)) {
    throw ConfigError("assumption data: c must lie in (0, 1)");
  }
  if (!(assm.omega > 0.0 && assm.mu > 0.0 && assm.K1 > 0.0)) {
    throw ConfigError("assumption data: omega, mu, K1 must be positive");
  }
  if (assm.L.rows() != plant.n || assm.L.cols() != plant.k_out) {
    throw ConfigError("assumption data: L must be n x k_out");
  }
  if (assm.Q.rows() != plant.n || assm.Q.cols() != plant.n) {
    throw ConfigError("assumption data: Q must be n x n");
  }
  if (!assm.Q.isApprox(assm.Q.transpose(), 1e-12)) {
    throw ConfigError("assumption data: Q must be symmetric");
  }
  const Eigen::LDLT<Matrix> ldlt(assm.Q);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
    throw ConfigError("assumption data: Q must be positive definite");
  }
}

// ---------------------------------------------------------------------------
// Input history (piecewise constant, right-open)
// ---------------------------------------------------------------------------

struct InputSegment {
  double t_start;
  Vector value;
};

/// Append-only piecewise-constant record of an input signal on [t_min, t_end).
/// The value at t is the value of the last segment with t_start <= t.
class InputHistory {
 public:
  InputHistory() = default;

  /// Empty history anchored at t0 (coverage [t0, t0)).
  explicit InputHistory(double t0) : t_min_(t0), t_end_(t0) {}

  /// Constant history on [t_min, t_end).
  InputHistory(double t_min, double t_end, Vector value) : t_min_(t_min) {
    t_end_ = t_min;
    if (t_end > t_min) append(t_min, t_end, std::move(value));
  }

  /// Segments must have strictly increasing start times; the first starts
  /// at the coverage start, the last ends at t_end.
  static InputHistory from_segments(std::vector<InputSegment> segments,
                                    double t_end) {
    if (segments.empty()) {
      throw ConfigError("input history: no segments");
    }
    InputHistory hist(segments.front().t_start);
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const double end =
          i + 1 < segments.size() ? segments[i + 1].t_start : t_end;
      hist.append(segments[i].t_start, end, std::move(segments[i].value));
    }
    return hist;
  }

  /// Extends coverage from t_end() to t_end_new with a constant value.
  void append(double t_start, double t_end_new, Vector value) {
    if (t_start != t_end_) {
      throw ConfigError("input history: appended segment must start at " +
                        detail::fmt_time(t_end_));
    }
    if (!(t_end_new > t_start)) {
      throw ConfigError("input history: segment must have positive length");
    }
    if (!segments_.empty() && segments_.front().value.size() != value.size()) {
      throw ConfigError("input history: value dimension mismatch");
    }
    segments_.push_back({t_start, std::move(value)});
    t_end_ = t_end_new;
  }

  const Vector& value_at(double t) const {
    if (!(t >= t_min_ && t < t_end_)) {
      throw CoverageError("input history: t = " + detail::fmt_time(t) +
                          " outside [" + detail::fmt_time(t_min_) + ", " +
                          detail::fmt_time(t_end_) + ")");
    }
    return segments_[index_at(t)].value;
  }

  /// Visits maximal runs of equal value overlapping [t0, t1] as
  /// fn(value, run_start, run_end). Adjacent segments holding identical
  /// values are merged, so splitting a segment never changes the result.
  template <class Fn>
  void for_each_run(double t0, double t1, Fn&& fn) const {
    require_interval(t0, t1);
    if (t0 == t1) return;
    std::size_t i = index_at(t0);
    while (i < segments_.size() && segments_[i].t_start < t1) {
      const Vector& value = segments_[i].value;
      const double run_a = std::max(t0, segments_[i].t_start);
      std::size_t j = i + 1;
      while (j < segments_.size() && segments_[j].t_start < t1 &&
             segments_[j].value == value) {
        ++j;
      }
      const double seg_end = j < segments_.size() ? segments_[j].t_start : t_end_;
      const double run_b = std::min(t1, seg_end);
      if (run_b > run_a) fn(value, run_a, run_b);
      i = j;
    }
  }

  /// Exact integral of the input over [t0, t1].
  Vector integral(double t0, double t1) const {
    Vector acc = Vector::Zero(value_dim());
    for_each_run(t0, t1, [&](const Vector& v, double a, double b) {
      acc += v * (b - a);
    });
    return acc;
  }

  /// sup |u| over [t0, t1); zero for an empty interval.
  double sup_norm(double t0, double t1) const {
    if (!(t1 > t0)) return 0.0;
    double best = 0.0;
    for_each_run(t0, t1, [&](const Vector& v, double, double) {
      best = std::max(best, v.norm());
    });
    return best;
  }

  /// Drops segments that end at or before t. Coverage start moves forward.
  void discard_before(double t) {
    while (segments_.size() >= 2 && segments_[1].t_start <= t) {
      segments_.pop_front();
    }
    if (!segments_.empty()) {
      t_min_ = std::max(t_min_, segments_.front().t_start);
    }
  }

  double t_min() const { return t_min_; }
  double t_end() const { return t_end_; }
  bool empty() const { return segments_.empty(); }
  const std::deque<InputSegment>& segments() const { return segments_; }

  Eigen::Index value_dim() const {
    return segments_.empty() ? 0 : segments_.front().value.size();
  }

 private:
  std::size_t index_at(double t) const {
    auto it = std::upper_bound(
        segments_.begin(), segments_.end(), t,
        [](double value, const InputSegment& s) { return value < s.t_start; });
    return static_cast<std::size_t>(std::distance(segments_.begin(), it)) - 1;
  }

  void require_interval(double t0, double t1) const {
    if (!(t0 <= t1)) {
      throw ConfigError("input history: integration bounds reversed");
    }
    if (!(t0 >= t_min_ && t1 <= t_end_)) {
      throw CoverageError("input history: [" + detail::fmt_time(t0) + ", " +
                          detail::fmt_time(t1) + "] outside [" +
                          detail::fmt_time(t_min_) + ", " +
                          detail::fmt_time(t_end_) + ")");
    }
  }

  std::deque<InputSegment> segments_;
  double t_min_ = 0.0;
  double t_end_ = 0.0;
};

// ---------------------------------------------------------------------------
// State history (interpolated)
// ---------------------------------------------------------------------------

struct StateSample {
  double t;
  Vector x;
};

/// Append-only record of the plant state on [t_min, t_max], linearly
/// interpolated between stored nodes and exact at them.
class StateHistory {
 public:
  StateHistory() = default;

  /// Constant initial history on [t_min, t_max] (a single node if equal).
  static StateHistory constant(double t_min, double t_max, const Vector& x) {
    StateHistory hist;
    hist.push(t_min, x);
    if (t_max > t_min) hist.push(t_max, x);
    return hist;
  }

  void push(double t, Vector x) {
    if (!samples_.empty() && !(t > samples_.back().t)) {
      throw ConfigError("state history: times must be strictly increasing");
    }
    samples_.push_back({t, std::move(x)});
  }

  Vector value_at(double t) const {
    if (samples_.empty() || !(t >= t_min() && t <= t_max())) {
      throw CoverageError("state history: t = " + detail::fmt_time(t) +
                          " outside coverage");
    }
    auto it = std::lower_bound(
        samples_.begin(), samples_.end(), t,
        [](const StateSample& s, double value) { return s.t < value; });
    if (it->t == t) return it->x;
    const StateSample& hi = *it;
    const StateSample& lo = *std::prev(it);
    const double theta = (t - lo.t) / (hi.t - lo.t);
    return lo.x + theta * (hi.x - lo.x);
  }

  /// sup |x| over [t0, t1] of the interpolant (attained at nodes or ends).
  double sup_norm(double t0, double t1) const {
    double best = std::max(value_at(t0).norm(), value_at(t1).norm());
    for (const auto& s : samples_) {
      if (s.t > t0 && s.t < t1) best = std::max(best, s.x.norm());
    }
    return best;
  }

  /// Drops nodes no longer needed to interpolate at times >= t.
  void discard_before(double t) {
    while (samples_.size() >= 2 && samples_[1].t <= t) samples_.pop_front();
  }

  double t_min() const { return samples_.front().t; }
  double t_max() const { return samples_.back().t; }
  std::size_t size() const { return samples_.size(); }
  const std::deque<StateSample>& samples() const { return samples_; }

 private:
  std::deque<StateSample> samples_;
};

// ---------------------------------------------------------------------------
// Sampling partition, configuration, trajectory
// ---------------------------------------------------------------------------

/// Measurement instants tau_0 = 0 < tau_1 < ... with gaps in (0, T_s].
struct SamplingPartition {
  std::vector<double> times;
  double T_s = 0.0;
};

inline void validate(const SamplingPartition& part) {
  if (part.times.empty() || part.times.front() != 0.0) {
    throw ConfigError("partition: must start at tau_0 = 0");
  }
  if (!(part.T_s > 0.0)) throw ConfigError("partition: T_s must be positive");
  const double slack = 1e-9 * part.T_s;
  for (std::size_t i = 1; i < part.times.size(); ++i) {
    const double gap = part.times[i] - part.times[i - 1];
    if (!(gap > 0.0) || gap > part.T_s + slack) {
      throw ConfigError("partition: gap " + std::to_string(i) +
                        " outside (0, T_s]");
    }
  }
}

struct SimConfig {
  double T_H = 0.05;
  int N = 64;
  double horizon = 40.0;
  double dt_max = 1e-3;
  std::uint64_t seed = 0;
  double record_dt = 0.05;
};

inline void validate(const SimConfig& cfg) {
  if (!(cfg.T_H > 0.0)) throw ConfigError("config: T_H must be > 0");
  if (cfg.N < 1) throw ConfigError("config: N must be >= 1");
  if (!(cfg.horizon > 0.0)) throw ConfigError("config: horizon must be > 0");
  if (!(cfg.dt_max > 0.0 && cfg.dt_max <= cfg.T_H)) {
    throw ConfigError("config: need 0 < dt_max <= T_H");
  }
  if (!(cfg.record_dt > 0.0)) throw ConfigError("config: record_dt must be > 0");
}

struct TrajectoryRow {
  double t = 0.0;
  Vector x;
  Vector z;
  Vector w;
  Vector u;  // input applied at t, u(t)
  double Vx = 0.0;
  double Vz = 0.0;
  double norm = 0.0;  // ||x_t|| + |z(t)| + ||u~_t||
};

struct Trajectory {
  int n = 0;
  int m = 0;
  int k_out = 0;
  std::vector<TrajectoryRow> rows;
};

}  // namespace absorb
