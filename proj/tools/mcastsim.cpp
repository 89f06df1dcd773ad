#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mcast/engine.hpp"
#include "mcast/report.hpp"
#include "mcast/scenario_io.hpp"

namespace fs = std::filesystem;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("MCASTSIM_OUT");
  return env && *env ? env : ".";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw mcast::IoError("cannot create output directory " + dir + ": " + ec.message());
}

mcast::Scenario load(const std::string& path, std::optional<std::uint64_t> seed,
                     std::optional<std::string> method, std::optional<std::string> optimizer) {
  mcast::Scenario s = mcast::parse_scenario(path);
  if (seed) {
    s.seed = *seed;
    s.has_seed = true;
  }
  if (method) {
    if (*method == "traditional") s.method = mcast::Method::traditional;
    else if (*method == "proposed") s.method = mcast::Method::proposed;
    else throw mcast::ConfigError("--method must be traditional or proposed");
  }
  if (optimizer) {
    if (*optimizer == "greedy") s.optimizer = mcast::OptimizerKind::greedy;
    else if (*optimizer == "ga") s.optimizer = mcast::OptimizerKind::ga;
    else if (*optimizer == "sa") s.optimizer = mcast::OptimizerKind::sa;
    else throw mcast::ConfigError("--optimizer must be greedy, ga or sa");
  }
  return mcast::validate(std::move(s));
}

int cmd_run(const std::string& scenario_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> method, std::optional<std::string> optimizer,
            const std::string& out_dir, bool timeseries) {
  mcast::Scenario s = load(scenario_path, seed, method, optimizer);
  mcast::RunResult r = mcast::run(s, timeseries);
  ensure_dir(out_dir);
  mcast::write_summary_json(r.summary, s, out_dir + "/summary.json");
  if (timeseries) {
    mcast::write_timeseries_csv(r.link_series, out_dir + "/timeseries.csv");
    mcast::write_clients_csv(r.client_series, out_dir + "/clients.csv");
  }
  std::cout << "scenario " << s.name << " method " << mcast::to_string(s.method)
            << " seed " << s.seed << ": qoe_mean " << r.summary.mean_qoe
            << ", utilization " << r.summary.utilization_pct << "%\n";
  std::cout << "wrote " << out_dir << "/summary.json\n";
  return 0;
}

int cmd_compare(const std::string& scenario_path, std::optional<std::uint64_t> seed,
                const std::string& out_dir) {
  mcast::Scenario base = load(scenario_path, seed, std::nullopt, std::nullopt);

  mcast::Scenario trad = base;
  trad.method = mcast::Method::traditional;
  mcast::Scenario prop = base;
  prop.method = mcast::Method::proposed;

  mcast::RunResult rt = mcast::run(trad);
  mcast::RunResult rp = mcast::run(prop);
  const std::vector<mcast::ComparisonRow> rows = mcast::compare(rt.summary, rp.summary);

  ensure_dir(out_dir);
  mcast::write_summary_json(rt.summary, trad, out_dir + "/summary_traditional.json");
  mcast::write_summary_json(rp.summary, prop, out_dir + "/summary_proposed.json");
  mcast::write_comparison_csv(base.name, rows, out_dir + "/comparison.csv");
  std::cout << mcast::render_comparison_table(base.name, rows);
  std::cout << "wrote " << out_dir << "/comparison.csv\n";
  return 0;
}

int cmd_validate(const std::string& scenario_path) {
  mcast::Scenario s = mcast::parse_scenario(scenario_path);
  std::cout << "OK: " << scenario_path << " (scenario \"" << s.name << "\", demand "
            << s.demand << ", " << s.groups.size() << " groups, " << s.schedule.size()
            << " events, duration " << s.duration_s << " s)\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic multicast short-video streaming simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::string> optimizer;
  std::string out_dir = default_out_dir();
  bool timeseries = false;

  CLI::App* run_cmd = app.add_subcommand("run", "Run one scenario and write summary.json");
  run_cmd->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  run_cmd->add_option("--seed", seed, "Override the scenario seed");
  run_cmd->add_option("--method", method, "traditional or proposed");
  run_cmd->add_option("--optimizer", optimizer, "greedy, ga or sa");
  run_cmd->add_option("--out", out_dir, "Output directory (default $MCASTSIM_OUT or .)");
  run_cmd->add_flag("--timeseries", timeseries, "Also write timeseries.csv and clients.csv");

  CLI::App* cmp_cmd = app.add_subcommand(
      "compare", "Run traditional vs proposed on the same seed and compare");
  cmp_cmd->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  cmp_cmd->add_option("--seed", seed, "Override the scenario seed");
  cmp_cmd->add_option("--out", out_dir, "Output directory (default $MCASTSIM_OUT or .)");

  CLI::App* val_cmd = app.add_subcommand("validate", "Parse and validate a scenario file");
  val_cmd->add_option("--scenario", scenario_path, "Scenario JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed())
      return cmd_run(scenario_path, seed, method, optimizer, out_dir, timeseries);
    if (cmp_cmd->parsed()) return cmd_compare(scenario_path, seed, out_dir);
    if (val_cmd->parsed()) return cmd_validate(scenario_path);
  } catch (const mcast::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
