#pragma once

// CSV trajectory export and JSON encodings of run summaries, check reports
// and tuning results.

#include <cstdio>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "absorb/core.hpp"
#include "absorb/simulator.hpp"
#include "absorb/verification.hpp"

namespace absorb {

/// Shortest "%.17g" rendering; round-trips every double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trajectory_csv_header(const Trajectory& traj) {
  std::string out = "t";
  auto block = [&](const char* prefix, int count) {
    for (int i = 1; i <= count; ++i) out += "," + std::string(prefix) + std::to_string(i);
  };
  block("x", traj.n);
  block("z", traj.n);
  block("w", traj.k_out);
  block("u", traj.m);
  out += ",Vx,Vz,norm";
  return out;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << trajectory_csv_header(traj) << '\n';
  for (const auto& row : traj.rows) {
    os << format_double(row.t);
    for (const Vector* v : {&row.x, &row.z, &row.w, &row.u}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) os << ',' << format_double((*v)(i));
    }
    os << ',' << format_double(row.Vx) << ',' << format_double(row.Vz) << ','
       << format_double(row.norm) << '\n';
  }
}

inline nlohmann::json vector_json(const Vector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline nlohmann::json summary_json(const RunSummary& s,
                                   const nlohmann::json& config) {
  return {{"sigma_hat", s.sigma_hat},         {"r2", s.r2},
          {"terminal_norm", s.terminal_norm}, {"initial_norm", s.initial_norm},
          {"max_Vx", s.max_Vx},               {"max_Vz", s.max_Vz},
          {"partition_seed", s.partition_seed}, {"config", config}};
}

inline nlohmann::json report_json(const CheckReport& rep) {
  return {{"name", rep.name},
          {"points_tested", rep.points_tested},
          {"skipped", rep.skipped},
          {"worst_margin", rep.worst_margin},
          {"worst_point", vector_json(rep.worst_point)},
          {"pass", rep.pass},
          {"tolerance", rep.tolerance},
          {"seed", rep.seed}};
}

inline nlohmann::json tune_json(const TuneResult& res) {
  auto attempt = [](const TuneAttempt& a) {
    return nlohmann::json{{"T_s", a.T_s},
                          {"T_H", a.T_H},
                          {"N", a.N},
                          {"success", a.success},
                          {"sigma_hat", a.summary.sigma_hat},
                          {"r2", a.summary.r2},
                          {"terminal_norm", a.summary.terminal_norm},
                          {"initial_norm", a.summary.initial_norm},
                          {"failure", a.failure}};
  };
  nlohmann::json out;
  out["found"] = res.best.has_value();
  out["best"] = res.best ? attempt(*res.best) : nlohmann::json(nullptr);
  out["attempts"] = nlohmann::json::array();
  for (const auto& a : res.attempts) out["attempts"].push_back(attempt(a));
  return out;
}

}  // namespace absorb
