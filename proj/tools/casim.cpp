// Command-line front end: run one scenario, sweep seeds, print the
// cross-protocol cost table, or re-check a stored trace.
//
// Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 bad usage or config.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "casim/harness.hpp"

namespace {

using casim::Json;

void print_verdicts(const Json& report) {
  std::cout << "scenario " << report.at("scenario").get<std::string>() << " ("
            << report.at("protocol").get<std::string>() << " n="
            << report.at("n").get<int>() << " f=" << report.at("f").get<int>()
            << " k=" << report.at("k").get<int>();
  if (report.contains("delta")) std::cout << " delta=" << report.at("delta").get<int>();
  std::cout << " seed=" << report.at("seed").get<std::uint64_t>() << ")\n";
  std::cout << "  events: " << report.at("events").get<std::uint64_t>()
            << "  halt: " << report.at("halt").get<std::string>() << "\n";
  const auto& atom = report.at("atomicity");
  std::cout << "  atomicity: " << (atom.at("atomic").get<bool>() ? "ok" : "VIOLATED")
            << "\n";
  for (const auto& v : atom.at("violations"))
    std::cout << "    " << v.get<std::string>() << "\n";
  const auto& live = report.at("liveness");
  std::cout << "  liveness: " << (live.at("live").get<bool>() ? "ok" : "FAILED");
  if (!live.at("stalled").empty()) {
    std::cout << "  stalled:";
    for (const auto& op : live.at("stalled")) std::cout << " " << op.get<std::string>();
  }
  if (live.at("budget_exhausted").get<bool>()) std::cout << "  (budget exhausted)";
  std::cout << "\n";
  if (report.contains("storage_bound")) {
    const auto& bound = report.at("storage_bound");
    std::cout << "  storage_bound: " << (bound.at("ok").get<bool>() ? "ok" : "VIOLATED")
              << " (" << bound.at("checked_points").get<int>() << " quiescent points)\n";
    for (const auto& v : bound.at("violations"))
      std::cout << "    " << v.get<std::string>() << "\n";
  }
  const auto& costs = report.at("costs");
  std::cout << "  write_max: " << costs.at("write_max").get<std::string>()
            << "  read_max: " << costs.at("read_max").get<std::string>()
            << "  storage_max: " << costs.at("storage_max").get<std::string>() << "\n";
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const std::optional<std::uint64_t>& seed) {
  casim::ScenarioConfig cfg = casim::load_config(config_path);
  if (seed) cfg.scheduler.seed = *seed;
  const casim::RunResult result = casim::run_scenario(cfg, out_dir);
  print_verdicts(result.report);
  std::cout << "  trace: " << result.trace_path << "\n";
  std::cout << "  report: " << result.report_path << "\n";
  return result.ok ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const std::string& seed_range,
              const std::string& out_dir) {
  const auto dots = seed_range.find("..");
  if (dots == std::string::npos)
    throw casim::ConfigError("--seeds wants A..B, got: " + seed_range);
  const std::uint64_t lo = std::stoull(seed_range.substr(0, dots));
  const std::uint64_t hi = std::stoull(seed_range.substr(dots + 2));

  casim::ScenarioConfig cfg = casim::load_config(config_path);
  const Json agg = casim::sweep(cfg, lo, hi);

  std::filesystem::create_directories(out_dir);
  const auto path =
      std::filesystem::path(out_dir) / (cfg.id + ".sweep.json");
  std::ofstream os(path, std::ios::binary);
  os << agg.dump(2) << "\n";

  std::cout << agg.dump(2) << "\n";
  std::cout << "sweep report: " << path.string() << "\n";
  return agg.at("ok").get<bool>() ? 0 : 1;
}

int cmd_table(const std::string& grid_spec, const std::string& out_file) {
  const std::string csv = casim::cost_table(casim::parse_grid(grid_spec));
  if (out_file.empty()) {
    std::cout << csv;
  } else {
    std::ofstream os(out_file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + out_file);
    os << csv;
    std::cout << "cost table: " << out_file << "\n";
  }
  return 0;
}

int cmd_check(const std::string& trace_path) {
  const Json report = casim::check_trace(trace_path);
  print_verdicts(report);
  const auto& structure = report.at("structure");
  std::cout << "  structure: " << (structure.at("ok").get<bool>() ? "ok" : "BROKEN")
            << "\n";
  for (const auto& p : structure.at("problems"))
    std::cout << "    " << p.get<std::string>() << "\n";
  return report.at("ok").get<bool>() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coded atomic storage simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run one scenario, write trace and report");
  run->add_option("config", config_path, "scenario config (json)")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "override the scheduler seed");

  std::string sweep_config;
  std::string sweep_out = "out";
  std::string seed_range;
  auto* sw = app.add_subcommand("sweep", "run a scenario across a seed range");
  sw->add_option("config", sweep_config, "scenario config (json)")->required();
  sw->add_option("--seeds", seed_range, "seed range A..B")->required();
  sw->add_option("--out", sweep_out, "output directory");

  std::string grid = "n=5..7,f=1..2";
  std::string table_out;
  auto* table = app.add_subcommand("table", "print the cross-protocol cost table");
  table->add_option("--grid", grid, "grid such as n=5..9,f=1..2");
  table->add_option("--out", table_out, "write CSV here instead of stdout");

  std::string trace_path;
  auto* check = app.add_subcommand("check", "re-run checkers on a stored trace");
  check->add_option("trace", trace_path, "trace file (jsonl)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed);
    if (sw->parsed()) return cmd_sweep(sweep_config, seed_range, sweep_out);
    if (table->parsed()) return cmd_table(grid, table_out);
    if (check->parsed()) return cmd_check(trace_path);
  } catch (const casim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
