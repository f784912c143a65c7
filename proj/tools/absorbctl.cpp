// absorbctl: command-line driver for closed-loop simulation, assumption
// verification, predictor convergence studies, partition sweeps and pilot
// tuning.
//
// Exit codes: 0 success / all checks pass, 1 a check or criterion failed,
// 2 configuration error, 3 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "absorb/absorb.hpp"

namespace {

namespace fs = std::filesystem;
using namespace absorb;

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

int cmd_simulate(const RunConfig& cfg, const fs::path& out_dir) {
  const planar::Example ex = make_model(cfg);
  SimResult result;
  const RunSummary summary = run_seeded(ex, cfg, cfg.seed, &result);
  std::ofstream csv(out_dir / "trajectory.csv", std::ios::binary);
  write_trajectory_csv(csv, result.trajectory);
  write_json(out_dir / "summary.json", summary_json(summary, config_json(cfg)));
  std::cout << "sigma_hat " << format_double(summary.sigma_hat) << "  r2 "
            << format_double(summary.r2) << "  terminal/initial "
            << format_double(summary.terminal_norm / summary.initial_norm) << '\n';
  return kExitOk;
}

int cmd_verify(const RunConfig& cfg, const fs::path& out_dir) {
  constexpr std::size_t kSamples = 10000;
  const planar::Example ex = make_model(cfg);
  const VerifySuiteResult suite = run_verify_suite(ex, kSamples, cfg.seed);

  nlohmann::json doc;
  doc["reports"] = nlohmann::json::array();
  for (const auto& rep : suite.reports) {
    nlohmann::json j = report_json(rep);
    if (rep.name == "H4") j["vacuous"] = suite.h4_vacuous;
    doc["reports"].push_back(j);
    std::cout << (rep.pass ? "pass " : "FAIL ") << rep.name << "  tested "
              << rep.points_tested << "  skipped " << rep.skipped
              << "  worst " << format_double(rep.worst_margin) << '\n';
  }
  doc["zeta_bound"] = {{"zeta", ex.zeta}, {"pass", suite.zeta_bound_ok}};
  doc["all_pass"] = suite.all_pass();
  write_json(out_dir / "verify.json", doc);
  return suite.all_pass() ? kExitOk : kExitFailed;
}

int cmd_predictor_study(const RunConfig& cfg, const fs::path& out_dir) {
  const planar::Example ex = make_model(cfg);
  if (ex.plant.delay_window() == 0.0) {
    throw ConfigError("predictor-study needs r + tau > 0");
  }
  if (static_cast<int>(cfg.x0.size()) != ex.plant.n) {
    throw ConfigError("config: x0 must have dimension 2");
  }
  const InputHistory hist = make_u0_history(cfg, ex.plant);
  const auto study =
      predictor_convergence_study(ex.plant, to_vector(cfg.x0), hist, {8, 16, 32, 64});
  std::string csv = "N,error\n";
  for (const auto& p : study) {
    csv += std::to_string(p.N) + "," + format_double(p.error) + "\n";
  }
  write_text(out_dir / "predictor_study.csv", csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, const fs::path& out_dir, int count) {
  if (count < 1) throw ConfigError("--count must be >= 1");
  const planar::Example ex = make_model(cfg);
  nlohmann::json runs = nlohmann::json::array();
  bool all_ok = true;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    const RunSummary s = run_seeded(ex, cfg, seed);
    nlohmann::json j = summary_json(s, nlohmann::json::object());
    j.erase("config");
    j["decay_ok"] = s.decay_ok();
    runs.push_back(j);
    all_ok = all_ok && s.decay_ok();
    std::cout << "seed " << seed << (s.decay_ok() ? "  ok" : "  FAIL")
              << "  sigma_hat " << format_double(s.sigma_hat) << "  terminal/initial "
              << format_double(s.terminal_norm / s.initial_norm) << '\n';
  }
  write_json(out_dir / "sweep.json",
             {{"config", config_json(cfg)}, {"runs", runs}, {"all_pass", all_ok}});
  return all_ok ? kExitOk : kExitFailed;
}

int cmd_tune(const RunConfig& cfg, const fs::path& out_dir) {
  const planar::Example ex = make_model(cfg);
  const InitialData init = make_initial_data(cfg, ex.plant);
  const TuneResult res =
      pilot_tune(ex.plant, ex.assm, ex.blend, init, default_tune_grid(cfg));
  write_json(out_dir / "tune.json", tune_json(res));
  if (res.best) {
    std::cout << "found T_s " << res.best->T_s << "  T_H " << res.best->T_H
              << "  N " << res.best->N << '\n';
    return kExitOk;
  }
  std::cout << "no grid point met the decay criterion ("
            << res.attempts.size() << " attempts)\n";
  return kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampled-data stabilization with delay compensation"};
  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
  int count = 20;
  app.add_option("command", command, "simulate | verify | predictor-study | sweep | tune")
      ->required()
      ->check(CLI::IsMember(
          {"simulate", "verify", "predictor-study", "sweep", "tune"}));
  app.add_option("--config", config_path, "run configuration file")->required();
  app.add_option("--set", overrides, "override key=value (repeatable)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--count", count, "number of partition seeds for sweep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    RunConfig cfg = load_config(config_path);
    for (const auto& kv : overrides) apply_override(cfg, kv);
    validate(cfg);
    fs::create_directories(out_dir);
    const fs::path out{out_dir};
    if (command == "simulate") return cmd_simulate(cfg, out);
    if (command == "verify") return cmd_verify(cfg, out);
    if (command == "predictor-study") return cmd_predictor_study(cfg, out);
    if (command == "sweep") return cmd_sweep(cfg, out, count);
    return cmd_tune(cfg, out);
  } catch (const ConfigError& e) {
    std::cerr << "absorbctl: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "absorbctl: runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
