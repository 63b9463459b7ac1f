#pragma once

// Glue between configs and the simulator: instantiate the right node set for
// a scenario, run it, write trace and report files, aggregate seed sweeps,
// and render the cross-protocol cost table.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "casim/analysis.hpp"
#include "casim/protocol_baselines.hpp"
#include "casim/protocol_cas.hpp"
#include "casim/protocol_casgc.hpp"
#include "casim/protocol_ccoas.hpp"
#include "casim/quorum.hpp"
#include "casim/report.hpp"
#include "casim/scenario.hpp"
#include "casim/sim_net.hpp"
#include "casim/trace.hpp"

namespace casim {

inline ProtocolInstance make_protocol(const ScenarioConfig& cfg) {
  ProtocolInstance inst;
  const Bytes v0 = cfg.initial_value();
  const auto ids = cfg.server_ids();

  switch (cfg.protocol) {
    case Protocol::cas:
    case Protocol::casgc: {
      const CodecParams codec{cfg.n, cfg.codec_k()};
      const QuorumSystem quorums = cas_quorums(cfg.n, codec.k);
      for (int i = 0; i < cfg.n; ++i) {
        const auto& id = ids[static_cast<std::size_t>(i)];
        if (cfg.protocol == Protocol::cas)
          inst.servers.emplace_back(
              id, std::make_unique<CasServer>(id, i, ids, codec, v0));
        else
          inst.servers.emplace_back(
              id, std::make_unique<CasGcServer>(id, i, ids, codec, v0, cfg.delta));
      }
      for (const auto& c : cfg.clients)
        inst.clients[c] =
            std::make_unique<CasClient>(c, ids, codec, quorums, cfg.value_length);
      break;
    }
    case Protocol::ccoas: {
      const CodecParams codec{cfg.n, cfg.codec_k()};
      const QuorumSystem quorums = ccoas_quorums(cfg.n, cfg.f);
      for (int i = 0; i < cfg.n; ++i) {
        const auto& id = ids[static_cast<std::size_t>(i)];
        inst.servers.emplace_back(
            id, std::make_unique<CcoasServer>(id, i, ids, codec, v0));
      }
      for (const auto& c : cfg.clients)
        inst.clients[c] =
            std::make_unique<CasClient>(c, ids, codec, quorums, cfg.value_length);
      break;
    }
    case Protocol::abd: {
      for (const auto& id : ids)
        inst.servers.emplace_back(id, std::make_unique<AbdServer>(id, v0));
      for (const auto& c : cfg.clients)
        inst.clients[c] = std::make_unique<AbdClient>(c, ids);
      break;
    }
    case Protocol::ldr: {
      std::vector<std::string> dirs(ids.begin(),
                                    ids.begin() + cfg.directory_count);
      std::vector<std::string> reps(ids.begin() + cfg.directory_count, ids.end());
      for (const auto& id : dirs)
        inst.servers.emplace_back(id, std::make_unique<LdrDirectory>(id, reps, cfg.f));
      for (const auto& id : reps)
        inst.servers.emplace_back(id, std::make_unique<LdrReplica>(id, v0));
      for (const auto& c : cfg.clients)
        inst.clients[c] = std::make_unique<LdrClient>(c, dirs, reps, cfg.f);
      break;
    }
  }
  return inst;
}

inline ExecutionTrace run_config(const ScenarioConfig& cfg) {
  validate_scenario(cfg);
  Simulator sim(cfg, make_protocol(cfg));
  return sim.run();
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  Json j;
  in >> j;
  ScenarioConfig cfg = j.get<ScenarioConfig>();
  validate_scenario(cfg);
  return cfg;
}

struct RunResult {
  ExecutionTrace trace;
  Json report;
  std::string trace_path;
  std::string report_path;
  bool ok = false;
};

inline RunResult run_scenario(const ScenarioConfig& cfg, const std::string& out_dir) {
  RunResult result;
  result.trace = run_config(cfg);

  std::filesystem::create_directories(out_dir);
  const std::string trace_file = cfg.id + ".trace.jsonl";
  result.trace_path = (std::filesystem::path(out_dir) / trace_file).string();
  result.report_path =
      (std::filesystem::path(out_dir) / (cfg.id + ".report.json")).string();

  {
    std::ofstream os(result.trace_path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + result.trace_path);
    write_trace(result.trace, os);
  }
  result.report = make_report(result.trace, trace_file);
  {
    std::ofstream os(result.report_path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + result.report_path);
    os << render_report(result.report);
  }
  result.ok = result.report.at("ok").get<bool>();
  return result;
}

struct TheoryCosts {
  Rational write{0};
  Rational read{0};
  std::optional<Rational> storage;  // protocols with a flat bound
};

inline TheoryCosts theory_costs(const ScenarioConfig& cfg) {
  switch (cfg.protocol) {
    case Protocol::cas:
    case Protocol::casgc:
      return {Rational(cfg.n, cfg.codec_k()), Rational(cfg.n, cfg.codec_k()), {}};
    case Protocol::ccoas:
      return {Rational(cfg.n, cfg.n - cfg.f), Rational(cfg.n, cfg.n - cfg.f), {}};
    case Protocol::abd:
      return {Rational(cfg.n), Rational(2 * cfg.n), Rational(cfg.n)};
    case Protocol::ldr:
      return {Rational(2 * cfg.f + 1), Rational(cfg.f + 1), {}};
  }
  throw std::logic_error("bad protocol");
}

// Run the same scenario across a seed range with the randomized scheduler
// and aggregate verdicts and cost maxima.
inline Json sweep(ScenarioConfig cfg, std::uint64_t seed_lo, std::uint64_t seed_hi) {
  if (seed_hi < seed_lo) throw ConfigError("empty seed range");
  cfg.scheduler.mode = SchedulerMode::seeded_random;

  int atomicity_failures = 0;
  int liveness_failures = 0;
  int storage_bound_failures = 0;
  std::vector<std::uint64_t> failing_seeds;
  CostLedger maxima;
  int max_concurrency = 0;
  bool write_theory_attained = false;
  bool read_theory_attained = false;
  const TheoryCosts theory = theory_costs(cfg);

  for (std::uint64_t seed = seed_lo; seed <= seed_hi; ++seed) {
    cfg.scheduler.seed = seed;
    const ExecutionTrace trace = run_config(cfg);

    bool failed = false;
    if (!check_atomicity(trace).atomic) {
      ++atomicity_failures;
      failed = true;
    }
    if (!check_liveness(trace).live) {
      ++liveness_failures;
      failed = true;
    }
    if (cfg.protocol == Protocol::casgc &&
        !check_storage_bound(trace, cfg.delta).ok) {
      ++storage_bound_failures;
      failed = true;
    }
    if (failed && failing_seeds.size() < 20) failing_seeds.push_back(seed);

    const CostLedger ledger = cost_ledger(trace);
    if (maxima.write_cost_max < ledger.write_cost_max)
      maxima.write_cost_max = ledger.write_cost_max;
    if (maxima.read_cost_max < ledger.read_cost_max)
      maxima.read_cost_max = ledger.read_cost_max;
    if (maxima.storage_max < ledger.storage_max)
      maxima.storage_max = ledger.storage_max;
    if (ledger.write_cost_max == theory.write) write_theory_attained = true;
    if (ledger.read_cost_max == theory.read) read_theory_attained = true;

    const ConcurrencyProfile conc = concurrency_profile(trace);
    max_concurrency =
        std::max(max_concurrency, conc.max_writes_concurrent_with_read);
  }

  const std::uint64_t runs = seed_hi - seed_lo + 1;
  Json agg = Json::object();
  agg["scenario"] = cfg.id;
  agg["protocol"] = to_string(cfg.protocol);
  agg["seeds"] = std::to_string(seed_lo) + ".." + std::to_string(seed_hi);
  agg["runs"] = runs;
  agg["atomicity_failures"] = atomicity_failures;
  agg["liveness_failures"] = liveness_failures;
  if (cfg.protocol == Protocol::casgc)
    agg["storage_bound_failures"] = storage_bound_failures;
  agg["failing_seeds"] = failing_seeds;
  agg["max_write_cost"] = to_string(maxima.write_cost_max);
  agg["max_read_cost"] = to_string(maxima.read_cost_max);
  agg["max_storage"] = to_string(maxima.storage_max);
  agg["max_writes_concurrent_with_read"] = max_concurrency;
  agg["theory"] = Json{{"write", to_string(theory.write)},
                       {"read", to_string(theory.read)}};
  agg["cost_within_theory"] = !(theory.write < maxima.write_cost_max) &&
                              !(theory.read < maxima.read_cost_max);
  agg["write_theory_attained"] = write_theory_attained;
  agg["read_theory_attained"] = read_theory_attained;
  agg["ok"] = atomicity_failures == 0 && liveness_failures == 0 &&
              storage_bound_failures == 0 &&
              agg["cost_within_theory"].get<bool>();
  return agg;
}

// One writer, then one reader, fair FIFO delivery: the canonical run whose
// ledger should land exactly on the closed-form costs.
inline ScenarioConfig table_scenario(Protocol p, int n, int f) {
  ScenarioConfig cfg;
  cfg.id = std::string(to_string(p)) + "_n" + std::to_string(n) + "_f" +
           std::to_string(f);
  cfg.protocol = p;
  cfg.n = n;
  cfg.f = f;
  if (p == Protocol::casgc) cfg.delta = 1;
  if (p == Protocol::ldr) {
    // n replicas keep the storage population comparable across rows; the
    // directory group is the smallest that still tolerates f crashes.
    cfg.n = 0;
    cfg.directory_count = 2 * f + 1;
    cfg.replica_count = n;
  }
  cfg.value_length = 24;
  cfg.clients = {"w1", "r1"};
  OpSpec write;
  write.client = "w1";
  write.kind = OpKind::write;
  write.value = Bytes(cfg.value_length, std::uint8_t{0xa5});
  OpSpec read;
  read.client = "r1";
  read.kind = OpKind::read;
  read.start.type = Condition::Type::responded;
  read.start.client = "w1";
  read.start.op_index = 0;
  cfg.ops = {write, read};
  cfg.scheduler.mode = SchedulerMode::fair_round_robin;
  return cfg;
}

struct GridSpec {
  std::vector<int> ns;
  std::vector<int> fs;
};

// Grid strings look like "n=5..9,f=1..2" or "n=5,f=1".
inline GridSpec parse_grid(const std::string& spec) {
  GridSpec grid;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw ConfigError("grid entries need key=value, got: " + part);
    const std::string key = part.substr(0, eq);
    std::string range = part.substr(eq + 1);
    int lo = 0;
    int hi = 0;
    const auto dots = range.find("..");
    try {
      if (dots == std::string::npos) {
        lo = hi = std::stoi(range);
      } else {
        lo = std::stoi(range.substr(0, dots));
        hi = std::stoi(range.substr(dots + 2));
      }
    } catch (const std::exception&) {
      throw ConfigError("bad grid range: " + part);
    }
    if (hi < lo) throw ConfigError("bad grid range: " + part);
    std::vector<int>* target = nullptr;
    if (key == "n") target = &grid.ns;
    else if (key == "f") target = &grid.fs;
    else throw ConfigError("unknown grid key: " + key);
    for (int v = lo; v <= hi; ++v) target->push_back(v);
  }
  if (grid.ns.empty() || grid.fs.empty())
    throw ConfigError("grid needs both n and f");
  return grid;
}

inline std::string cost_table(const GridSpec& grid) {
  std::ostringstream csv;
  csv << "protocol,n,f,k,delta,write_theory,write_sim,read_theory,read_sim,"
         "storage_sup\n";
  const Protocol order[] = {Protocol::abd, Protocol::ldr, Protocol::cas,
                            Protocol::casgc, Protocol::ccoas};
  for (const int n : grid.ns) {
    for (const int f : grid.fs) {
      if (n <= 2 * f) continue;
      for (const Protocol p : order) {
        ScenarioConfig cfg = table_scenario(p, n, f);
        const ExecutionTrace trace = run_config(cfg);
        const CostLedger ledger = cost_ledger(trace);
        const TheoryCosts theory = theory_costs(cfg);
        csv << to_string(p) << ',' << n << ',' << f << ',' << cfg.codec_k()
            << ',';
        if (p == Protocol::casgc) csv << cfg.delta;
        csv << ',' << to_string(theory.write) << ','
            << to_string(ledger.write_cost_max) << ',' << to_string(theory.read)
            << ',' << to_string(ledger.read_cost_max) << ','
            << to_string(ledger.storage_max) << '\n';
      }
    }
  }
  return csv.str();
}

// Reload a stored trace and re-run every checker on it.
inline Json check_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace: " + path);
  ExecutionTrace trace = read_trace(in);

  Json report = make_report(trace, std::filesystem::path(path).filename().string());
  const TraceCheck structure = check_structure(trace);
  report["structure"] =
      Json{{"ok", structure.ok}, {"problems", structure.problems}};
  report["ok"] = report["ok"].get<bool>() && structure.ok;
  return report;
}

}  // namespace casim
