#pragma once

// Event-driven hybrid simulation of the sampled-data closed loop:
//
//   plant      x' = f(x, u(t - tau))
//   observer   z' = f(z, u(t - r - tau)) + k^(z, w, u(t - r - tau))
//   ISP        w' = grad h(z) f(z, u(t - r - tau)),  w(tau_i) = h(x(tau_i - r))
//   control    u(t) = k(Phi_N(z(jT_H), u~_{jT_H})) on [jT_H, (j+1)T_H)
//
// Integration is classical RK4 with equal substeps between consecutive
// nodes. Nodes are sampling instants, hold instants, recording instants and
// the instants where a delayed input switches value, so every substep sees
// constant inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "absorb/controller.hpp"
#include "absorb/core.hpp"
#include "absorb/observer.hpp"
#include "absorb/predictor.hpp"

namespace absorb {

/// Initial data: x on [-r, 0], z(0), u on [-r - tau, 0), w(0).
struct InitialData {
  StateHistory x0_history;
  Vector z0;
  InputHistory u0_history;
  Vector w0;

  /// Constant x0 and u0 histories.
  static InitialData constant(const PlantModel& plant, const Vector& x0,
                              const Vector& z0, const Vector& u0) {
    InitialData init;
    init.x0_history = StateHistory::constant(-plant.r, 0.0, x0);
    init.z0 = z0;
    init.u0_history = InputHistory(-plant.delay_window(), 0.0, u0);
    init.w0 = plant.h(x0);
    return init;
  }
};

inline void validate(const InitialData& init, const PlantModel& plant) {
  if (init.x0_history.size() == 0 || init.x0_history.t_min() != -plant.r ||
      init.x0_history.t_max() != 0.0) {
    throw ConfigError("initial data: x0 history must cover exactly [-r, 0]");
  }
  for (const auto& s : init.x0_history.samples()) {
    if (s.x.size() != plant.n) throw ConfigError("initial data: x0 dimension");
  }
  if (init.z0.size() != plant.n) throw ConfigError("initial data: z0 dimension");
  if (init.w0.size() != plant.k_out) {
    throw ConfigError("initial data: w0 dimension");
  }
  const double window = plant.delay_window();
  if (init.u0_history.t_min() != -window || init.u0_history.t_end() != 0.0) {
    throw ConfigError(
        "initial data: u0 history must cover exactly [-r - tau, 0)");
  }
  for (const auto& seg : init.u0_history.segments()) {
    if (!plant.input_box.contains(seg.value)) {
      throw ConfigError("initial data: u0 value outside U");
    }
  }
}

// ---------------------------------------------------------------------------
// Sampling partitions
// ---------------------------------------------------------------------------

/// Random partition of [0, horizon] with gaps uniform in [min_frac T_s, T_s].
/// min_frac = 1 gives the uniform grid i T_s.
inline SamplingPartition generate_partition(double T_s, double horizon,
                                            std::uint64_t seed,
                                            double min_frac = 0.5) {
  if (!(T_s > 0.0) || !(horizon > 0.0)) {
    throw ConfigError("partition: T_s and horizon must be positive");
  }
  if (!(min_frac > 0.0 && min_frac <= 1.0)) {
    throw ConfigError("partition: min_frac must lie in (0, 1]");
  }
  SamplingPartition part;
  part.T_s = T_s;
  part.times.push_back(0.0);
  if (min_frac == 1.0) {
    for (std::size_t i = 1; part.times.back() < horizon; ++i) {
      part.times.push_back(static_cast<double>(i) * T_s);
    }
    return part;
  }
  // Raw 64-bit draws keep the stream identical across standard libraries.
  std::mt19937_64 rng(seed);
  while (part.times.back() < horizon) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const double gap = T_s * (min_frac + (1.0 - min_frac) * unit);
    part.times.push_back(part.times.back() + gap);
  }
  return part;
}

// ---------------------------------------------------------------------------
// Closed-loop simulation
// ---------------------------------------------------------------------------

struct SampleEvent {
  double t;
  Vector y;        // h(x(t - r))
  Vector w_after;  // w immediately after the reset
};

struct HoldEvent {
  double t;
  Vector z;  // z(jT_H)
  Vector u;  // value held on [jT_H, (j+1)T_H)
};

struct SimResult {
  Trajectory trajectory;
  std::vector<SampleEvent> samples;
  std::vector<HoldEvent> holds;
  double initial_norm = 0.0;
  double terminal_norm = 0.0;
  double max_Vx = 0.0;  // over every integration node, not only rows
  double max_Vz = 0.0;
};

namespace detail {

struct Node {
  double t;
  bool sample = false;
  bool hold = false;
  bool record = false;
};

inline std::vector<Node> build_schedule(const PlantModel& plant,
                                        const SamplingPartition& part,
                                        const SimConfig& cfg,
                                        const InputHistory& u0) {
  const double horizon = cfg.horizon;
  const double end_tol = 1e-12 * std::max(1.0, horizon);
  std::vector<Node> raw;
  for (double t : part.times) {
    if (t <= horizon + end_tol) raw.push_back({t, true, false, false});
  }
  for (std::size_t j = 0;; ++j) {
    const double t = static_cast<double>(j) * cfg.T_H;
    if (t > horizon + end_tol) break;
    raw.push_back({t, false, true, false});
    // Delayed copies of this hold instant switch the plant/observer inputs.
    for (double shift : {plant.tau, plant.delay_window()}) {
      if (shift > 0.0 && t + shift < horizon) raw.push_back({t + shift});
    }
  }
  for (const auto& seg : u0.segments()) {
    for (double shift : {plant.tau, plant.delay_window()}) {
      const double t = seg.t_start + shift;
      if (t > 0.0 && t < horizon) raw.push_back({t});
    }
  }
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * cfg.record_dt;
    if (t > horizon + end_tol) break;
    raw.push_back({t, false, false, true});
  }
  raw.push_back({horizon, false, false, true});

  std::sort(raw.begin(), raw.end(),
            [](const Node& a, const Node& b) { return a.t < b.t; });

  // Merge nodes closer than round-off; a hold instant keeps its exact time
  // because the input history is stitched at those instants.
  std::vector<Node> nodes;
  for (const Node& n : raw) {
    if (!nodes.empty() &&
        n.t - nodes.back().t <= 1e-12 * std::max(1.0, std::abs(n.t))) {
      Node& last = nodes.back();
      if (n.hold && !last.hold) last.t = n.t;
      last.sample |= n.sample;
      last.hold |= n.hold;
      last.record |= n.record;
    } else {
      nodes.push_back(n);
    }
  }
  // Nodes past the horizon (merged onto it) are dropped.
  while (!nodes.empty() && nodes.back().t > horizon + end_tol) nodes.pop_back();
  return nodes;
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace detail

/// Integrates the closed loop on [0, cfg.horizon].
inline SimResult simulate_closed_loop(const PlantModel& plant,
                                      const AssumptionData& assm,
                                      const BlendingFn& fn,
                                      const SamplingPartition& partition,
                                      const SimConfig& cfg,
                                      const InitialData& init) {
  validate(plant);
  validate(fn);
  validate(cfg);
  validate(partition);
  validate(init, plant);
  if (partition.times.back() < cfg.horizon) {
    throw ConfigError("simulate: partition does not reach the horizon");
  }

  const double r = plant.r;
  const double tau = plant.tau;
  const double window = plant.delay_window();
  const bool delay_free = plant.delay_free();

  StateHistory x_hist = init.x0_history;
  InputHistory u_hist = init.u0_history;
  Vector x = x_hist.value_at(0.0);
  Vector z = init.z0;
  Vector w = init.w0;

  SimResult result;
  result.trajectory.n = plant.n;
  result.trajectory.m = plant.m;
  result.trajectory.k_out = plant.k_out;
  result.max_Vx = assm.V(x);
  result.max_Vz = assm.V(z);

  const std::vector<detail::Node> nodes =
      detail::build_schedule(plant, partition, cfg, init.u0_history);

  auto composite = [&](double t) {
    return x_hist.sup_norm(t - r, t) + z.norm() +
           (window > 0.0 ? u_hist.sup_norm(t - window, t) : 0.0);
  };

  std::size_t hold_index = 0;
  auto process_events = [&](const detail::Node& node) {
    const double t = node.t;
    if (node.sample) {
      const Vector y = plant.h(x_hist.value_at(t - r));
      w = isp_reset(y);
      result.samples.push_back({t, y, w});
    }
    if (node.hold) {
      const Vector u = delay_free ? hold_control_delay_free(z, plant, assm)
                                  : hold_control(z, u_hist, cfg.N, plant, assm);
      ++hold_index;
      u_hist.append(t, static_cast<double>(hold_index) * cfg.T_H, u);
      result.holds.push_back({t, z, u});
    }
    if (node.record || node.sample || node.hold) {
      TrajectoryRow row;
      row.t = t;
      row.x = x;
      row.z = z;
      row.w = w;
      row.u = u_hist.value_at(t);
      row.Vx = assm.V(x);
      row.Vz = assm.V(z);
      row.norm = composite(t);
      result.trajectory.rows.push_back(std::move(row));
    }
  };

  process_events(nodes.front());
  result.initial_norm = result.trajectory.rows.front().norm;

  Vector k1x, k1z, k1w, k2x, k2z, k2w, k3x, k3z, k3w, k4x, k4z, k4w;
  for (std::size_t idx = 1; idx < nodes.size(); ++idx) {
    const double t0 = nodes[idx - 1].t;
    const double t1 = nodes[idx].t;
    const auto steps = static_cast<long>(
        std::max(1.0, std::ceil((t1 - t0) / cfg.dt_max - 1e-9)));
    const double h = (t1 - t0) / static_cast<double>(steps);

    for (long s = 0; s < steps; ++s) {
      const double ta = t0 + static_cast<double>(s) * h;
      const double tb = s + 1 == steps ? t1 : t0 + static_cast<double>(s + 1) * h;
      const double dt = tb - ta;
      const double mid = ta + 0.5 * dt;
      const Vector& u_plant = u_hist.value_at(mid - tau);
      const Vector& u_obs = u_hist.value_at(mid - window);

      auto rhs = [&](const Vector& xs, const Vector& zs, const Vector& ws,
                     Vector& dx, Vector& dz, Vector& dw) {
        dx = plant.f(xs, u_plant);
        dz = observer_rhs(zs, ws, u_obs, plant, assm, fn);
        dw = isp_rhs(zs, u_obs, plant);
      };
      rhs(x, z, w, k1x, k1z, k1w);
      rhs(x + 0.5 * dt * k1x, z + 0.5 * dt * k1z, w + 0.5 * dt * k1w, k2x, k2z,
          k2w);
      rhs(x + 0.5 * dt * k2x, z + 0.5 * dt * k2z, w + 0.5 * dt * k2w, k3x, k3z,
          k3w);
      rhs(x + dt * k3x, z + dt * k3z, w + dt * k3w, k4x, k4z, k4w);
      x += (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      z += (dt / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
      w += (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);

      if (!detail::all_finite(x) || !detail::all_finite(z) ||
          !detail::all_finite(w)) {
        throw std::runtime_error("simulate: non-finite state at t = " +
                                 detail::fmt_time(tb));
      }
      x_hist.push(tb, x);
      result.max_Vx = std::max(result.max_Vx, assm.V(x));
      result.max_Vz = std::max(result.max_Vz, assm.V(z));
    }

    process_events(nodes[idx]);
    x_hist.discard_before(t1 - r);
    u_hist.discard_before(t1 - window);
  }

  result.terminal_norm = result.trajectory.rows.back().norm;
  return result;
}

// ---------------------------------------------------------------------------
// Post-processing
// ---------------------------------------------------------------------------

/// ||x_t|| + |z(t)| + ||u~_t|| reconstructed from recorded rows. Rows must
/// reach back to t - r - tau; the input sup uses the row active at the start
/// of the open window and every row inside it (rows exist at every hold).
inline double composite_norm(const Trajectory& traj, double t, double r,
                             double tau) {
  const auto& rows = traj.rows;
  if (rows.empty() || t > rows.back().t || t - r - tau < rows.front().t) {
    throw CoverageError("composite_norm: t = " + detail::fmt_time(t) +
                        " not covered by the trajectory");
  }
  auto state_at = [&](double s, auto member) -> Vector {
    auto it = std::lower_bound(
        rows.begin(), rows.end(), s,
        [](const TrajectoryRow& row, double value) { return row.t < value; });
    if (it->t == s || it == rows.begin()) return (*it).*member;
    const auto& hi = *it;
    const auto& lo = *std::prev(it);
    const double theta = (s - lo.t) / (hi.t - lo.t);
    return lo.*member + theta * (hi.*member - lo.*member);
  };

  double x_sup = std::max(state_at(t - r, &TrajectoryRow::x).norm(),
                          state_at(t, &TrajectoryRow::x).norm());
  for (const auto& row : rows) {
    if (row.t > t - r && row.t < t) x_sup = std::max(x_sup, row.x.norm());
  }
  const double z_now = state_at(t, &TrajectoryRow::z).norm();

  double u_sup = 0.0;
  const double u_start = t - r - tau;
  if (r + tau > 0.0) {
    for (std::size_t i = 0; i < rows.size() && rows[i].t < t; ++i) {
      const bool inside = rows[i].t >= u_start;
      const bool active_at_start =
          rows[i].t < u_start && (i + 1 == rows.size() || rows[i + 1].t > u_start);
      if (inside || active_at_start) u_sup = std::max(u_sup, rows[i].u.norm());
    }
  }
  return x_sup + z_now + u_sup;
}

struct DecayFit {
  double sigma_hat = 0.0;
  double r2 = 0.0;
  std::size_t rows_used = 0;
};

/// Least-squares fit of ln(norm) against t on [t_start, t_end]; sigma_hat is
/// minus the slope. Rows with norm below 1e-300 are dropped.
inline DecayFit fit_decay_rate(const Trajectory& traj, double t_start,
                               double t_end) {
  constexpr double kFloor = 1e-300;
  std::vector<double> ts;
  std::vector<double> ys;
  for (const auto& row : traj.rows) {
    if (row.t >= t_start && row.t <= t_end && row.norm >= kFloor) {
      ts.push_back(row.t);
      ys.push_back(std::log(row.norm));
    }
  }
  if (ts.size() < 3) {
    throw InsufficientDataError("fit_decay_rate: fewer than 3 usable rows");
  }
  const double count = static_cast<double>(ts.size());
  double t_mean = 0.0;
  double y_mean = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    t_mean += ts[i];
    y_mean += ys[i];
  }
  t_mean /= count;
  y_mean /= count;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double dt = ts[i] - t_mean;
    const double dy = ys[i] - y_mean;
    sxx += dt * dt;
    sxy += dt * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) {
    throw InsufficientDataError("fit_decay_rate: rows share a single time");
  }
  DecayFit fit;
  const double slope = sxy / sxx;
  fit.sigma_hat = -slope;
  fit.rows_used = ts.size();
  if (syy > 0.0) {
    const double ss_res = std::max(0.0, syy - slope * sxy);
    fit.r2 = 1.0 - ss_res / syy;
  } else {
    fit.r2 = 1.0;
  }
  return fit;
}

/// Terminal composite norm must fall below this fraction of the initial one.
inline constexpr double kDecayRatio = 1e-3;

struct RunSummary {
  double sigma_hat = 0.0;
  double r2 = 0.0;
  double terminal_norm = 0.0;
  double initial_norm = 0.0;
  double max_Vx = 0.0;
  double max_Vz = 0.0;
  std::uint64_t partition_seed = 0;

  bool decay_ok() const {
    return sigma_hat > 0.0 && terminal_norm < kDecayRatio * initial_norm;
  }
};

inline RunSummary summarize(const SimResult& result, double fit_start,
                            double fit_end, std::uint64_t partition_seed) {
  RunSummary s;
  const DecayFit fit = fit_decay_rate(result.trajectory, fit_start, fit_end);
  s.sigma_hat = fit.sigma_hat;
  s.r2 = fit.r2;
  s.terminal_norm = result.terminal_norm;
  s.initial_norm = result.initial_norm;
  s.max_Vx = result.max_Vx;
  s.max_Vz = result.max_Vz;
  s.partition_seed = partition_seed;
  return s;
}

// ---------------------------------------------------------------------------
// Pilot tuning
// ---------------------------------------------------------------------------

struct TuneGrid {
  std::vector<double> T_s;
  std::vector<double> T_H;
  std::vector<int> N;
  SimConfig base;            // horizon, dt_max, record_dt, seed
  double min_frac = 0.5;
  double fit_start = 20.0;   // decay fit window [fit_start, base.horizon]
};

struct TuneAttempt {
  double T_s = 0.0;
  double T_H = 0.0;
  int N = 0;
  bool success = false;
  RunSummary summary;
  std::string failure;  // empty on success
};

struct TuneResult {
  std::optional<TuneAttempt> best;
  std::vector<TuneAttempt> attempts;
};

/// Tries grid points in order of increasing N, then decreasing T_s, then
/// decreasing T_H, and stops at the first one whose fixed-seed run meets the
/// decay criterion. No success is reported through TuneResult::best.
inline TuneResult pilot_tune(const PlantModel& plant,
                             const AssumptionData& assm, const BlendingFn& fn,
                             const InitialData& init, const TuneGrid& grid) {
  if (grid.T_s.empty() || grid.T_H.empty() || grid.N.empty()) {
    throw ConfigError("tune: search grid is empty");
  }
  std::vector<int> Ns = grid.N;
  std::vector<double> Tss = grid.T_s;
  std::vector<double> THs = grid.T_H;
  std::sort(Ns.begin(), Ns.end());
  std::sort(Tss.rbegin(), Tss.rend());
  std::sort(THs.rbegin(), THs.rend());

  TuneResult out;
  for (int N : Ns) {
    for (double T_s : Tss) {
      for (double T_H : THs) {
        TuneAttempt attempt;
        attempt.T_s = T_s;
        attempt.T_H = T_H;
        attempt.N = N;
        try {
          SimConfig cfg = grid.base;
          cfg.T_H = T_H;
          cfg.N = N;
          cfg.dt_max = std::min(cfg.dt_max, T_H);
          const SamplingPartition part =
              generate_partition(T_s, cfg.horizon, cfg.seed, grid.min_frac);
          const SimResult run =
              simulate_closed_loop(plant, assm, fn, part, cfg, init);
          attempt.summary = summarize(run, grid.fit_start, cfg.horizon, cfg.seed);
          attempt.success = attempt.summary.decay_ok();
          if (!attempt.success) {
            attempt.failure = attempt.summary.sigma_hat > 0.0
                                  ? "terminal norm above decay threshold"
                                  : "no decay (sigma_hat <= 0)";
          }
        } catch (const ConfigError&) {
          throw;
        } catch (const std::exception& e) {
          attempt.failure = e.what();
        }
        out.attempts.push_back(attempt);
        if (attempt.success) {
          out.best = attempt;
          return out;
        }
      }
    }
  }
  return out;
}

}  // namespace absorb
