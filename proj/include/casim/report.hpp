#pragma once

// Canonical JSON report for one finished trace. Everything here must be a
// pure function of the trace so a rerun with the same seed reproduces the
// report byte for byte: ordered maps, rational strings, no timestamps.

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "casim/analysis.hpp"
#include "casim/core_types.hpp"
#include "casim/rational.hpp"
#include "casim/trace.hpp"

namespace casim {

inline std::string op_label(const OperationId& op) {
  return op.client + "#" + std::to_string(op.index);
}

inline Json make_report(const ExecutionTrace& trace, const std::string& trace_file) {
  const ScenarioConfig& cfg = trace.config;
  Json report = Json::object();
  report["scenario"] = cfg.id;
  report["protocol"] = to_string(cfg.protocol);
  report["n"] = cfg.n;
  report["f"] = cfg.f;
  report["k"] = cfg.codec_k();
  if (cfg.protocol == Protocol::casgc) report["delta"] = cfg.delta;
  report["seed"] = cfg.scheduler.seed;
  report["trace"] = trace_file;
  report["events"] = trace.events.size();
  report["halt"] = trace.budget_exhausted ? "budget_exhausted" : "quiescent";

  const AtomicityResult atom = check_atomicity(trace);
  report["atomicity"] = Json{{"atomic", atom.atomic}, {"violations", atom.violations}};

  const LivenessResult live = check_liveness(trace);
  Json stalled = Json::array();
  for (const auto& op : live.stalled) stalled.push_back(op_label(op));
  report["liveness"] = Json{{"live", live.live},
                            {"stalled", stalled},
                            {"uninvoked", live.uninvoked},
                            {"budget_exhausted", live.budget_exhausted}};

  const CostLedger ledger = cost_ledger(trace);
  Json per_op = Json::object();
  for (const auto& [op, cost] : ledger.op_cost) per_op[op_label(op)] = to_string(cost);
  report["costs"] = Json{{"per_op", per_op},
                         {"write_max", to_string(ledger.write_cost_max)},
                         {"read_max", to_string(ledger.read_cost_max)},
                         {"storage_max", to_string(ledger.storage_max)},
                         {"total", to_string(ledger.total_communication)}};

  const ConcurrencyProfile conc = concurrency_profile(trace);
  Json per_read = Json::object();
  for (const auto& [op, n] : conc.writes_concurrent_with_read) per_read[op_label(op)] = n;
  report["concurrency"] = Json{
      {"per_read", per_read},
      {"max_writes_concurrent_with_read", conc.max_writes_concurrent_with_read}};

  if (cfg.protocol == Protocol::casgc) {
    const SupersessionProfile prof = supersession_profile(trace);
    Json writes = Json::array();
    for (const auto& w : prof.writes) {
      Json entry = Json::object();
      entry["tag"] = w.tag;
      entry["op"] = w.op ? Json(op_label(*w.op)) : Json(nullptr);
      entry["query_complete"] = w.query_complete;
      entry["full_delivery"] = w.full_delivery ? Json(*w.full_delivery) : Json(nullptr);
      writes.push_back(std::move(entry));
    }
    report["supersession"] = std::move(writes);

    const StorageBoundResult bound = check_storage_bound(trace, cfg.delta);
    report["storage_bound"] = Json{{"ok", bound.ok},
                                   {"checked_points", bound.checked_points},
                                   {"violations", bound.violations}};
  }

  bool ok = atom.atomic && live.live;
  if (cfg.protocol == Protocol::casgc)
    ok = ok && report["storage_bound"]["ok"].get<bool>();
  report["ok"] = ok;
  return report;
}

inline std::string render_report(const Json& report) { return report.dump(2) + "\n"; }

}  // namespace casim
