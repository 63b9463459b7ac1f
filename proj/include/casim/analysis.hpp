#pragma once

// Offline checks over finished traces: linearizability via the tag order,
// termination bookkeeping, exact communication and storage ledgers, and the
// concurrency and supersession profiles the garbage-collected protocol's
// guarantees are phrased in.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "casim/core_types.hpp"
#include "casim/protocol_casgc.hpp"
#include "casim/rational.hpp"
#include "casim/scenario.hpp"
#include "casim/trace.hpp"

namespace casim {

struct OperationRecord {
  OperationId op;
  OpKind kind = OpKind::write;
  std::uint64_t invoke_seq = 0;
  std::optional<std::uint64_t> respond_seq;
  std::optional<Tag> tag;                  // committed tag, if the op got that far
  std::optional<std::uint64_t> tag_seq;    // when the query phase completed
  std::optional<Bytes> value;   // written value, or the value a read returned
  bool client_crashed = false;  // client failed at or after the invocation
};

inline std::vector<OperationRecord> extract_operations(const ExecutionTrace& trace) {
  std::map<OperationId, OperationRecord> by_op;
  std::map<std::string, std::uint64_t> client_crash;
  for (const auto& e : trace.events) {
    switch (e.kind) {
      case EventKind::invoke: {
        OperationRecord& r = by_op[*e.op];
        r.op = *e.op;
        r.kind = op_kind_from_string(e.detail.at("op_kind").get<std::string>());
        r.invoke_seq = e.seq;
        if (e.detail.contains("value"))
          r.value = from_hex(e.detail.at("value").get<std::string>());
        break;
      }
      case EventKind::respond: {
        OperationRecord& r = by_op[*e.op];
        r.respond_seq = e.seq;
        if (e.detail.contains("value") && !e.detail.at("value").is_null())
          r.value = from_hex(e.detail.at("value").get<std::string>());
        if (!r.tag) r.tag = e.detail.at("tag").get<Tag>();
        break;
      }
      case EventKind::internal:
        if (e.op && e.detail.value("note", "") == "tag_committed") {
          by_op[*e.op].tag = e.detail.at("tag").get<Tag>();
          by_op[*e.op].tag_seq = e.seq;
        }
        break;
      case EventKind::crash:
        client_crash[e.node] = e.seq;
        break;
      default: break;
    }
  }
  std::vector<OperationRecord> records;
  for (auto& [op, r] : by_op) {
    auto it = client_crash.find(op.client);
    r.client_crashed = it != client_crash.end() && it->second >= r.invoke_seq;
    records.push_back(std::move(r));
  }
  return records;
}

struct AtomicityResult {
  bool atomic = true;
  std::vector<std::string> violations;
};

// The witness order: operations sorted by tag, writes before reads on equal
// tags. The checks below are exactly what makes that order a legal
// serialization: unique write tags, reads returning the value the tag names,
// and no pair ordered against real time.
inline AtomicityResult check_atomicity(const ExecutionTrace& trace) {
  AtomicityResult res;
  auto fail = [&](const std::string& msg) {
    res.atomic = false;
    res.violations.push_back(msg);
  };
  auto name = [](const OperationRecord& r) {
    std::ostringstream os;
    os << (r.kind == OpKind::write ? "write " : "read ") << r.op.client << "#"
       << r.op.index;
    return os.str();
  };

  const std::vector<OperationRecord> records = extract_operations(trace);

  // Values by committed tag. Writes that never responded still count: a
  // concurrent read may legitimately have returned their value.
  std::map<Tag, Bytes> value_of;
  value_of[kInitialTag] = trace.config.initial_value();
  std::map<Tag, const OperationRecord*> writer_of;
  for (const auto& r : records) {
    if (r.kind != OpKind::write || !r.tag) continue;
    auto [it, fresh] = writer_of.emplace(*r.tag, &r);
    if (!fresh) {
      fail("writes " + name(*it->second) + " and " + name(r) +
           " committed the same tag");
      continue;
    }
    if (r.value) value_of[*r.tag] = *r.value;
  }

  std::vector<const OperationRecord*> completed;
  for (const auto& r : records) {
    if (!r.respond_seq) continue;
    completed.push_back(&r);
    if (!r.tag) {
      fail(name(r) + " responded without committing a tag");
      continue;
    }
    if (r.kind == OpKind::read) {
      if (!r.value) {
        fail(name(r) + " returned no value");
        continue;
      }
      auto it = value_of.find(*r.tag);
      if (it == value_of.end())
        fail(name(r) + " returned a tag no write committed");
      else if (it->second != *r.value)
        fail(name(r) + " returned a value that does not match its tag");
    }
  }

  // precedes(a, b): a before b in the witness order.
  auto precedes = [](const OperationRecord& a, const OperationRecord& b) {
    if (*a.tag != *b.tag) return *a.tag < *b.tag;
    return a.kind == OpKind::write && b.kind == OpKind::read;
  };
  for (const auto* a : completed) {
    if (!a->tag) continue;
    for (const auto* b : completed) {
      if (a == b || !b->tag) continue;
      if (*a->respond_seq < b->invoke_seq && precedes(*b, *a))
        fail(name(*b) + " is ordered before " + name(*a) +
             " despite starting after it finished");
    }
  }
  return res;
}

struct LivenessResult {
  bool live = true;
  std::vector<OperationId> stalled;  // invoked by live clients, never responded
  int uninvoked = 0;                 // never started although the client is alive
  bool budget_exhausted = false;
};

inline LivenessResult check_liveness(const ExecutionTrace& trace) {
  LivenessResult res;
  res.budget_exhausted = trace.budget_exhausted;
  res.stalled = trace.stalled_ops;

  std::set<std::string> crashed_clients;
  std::set<std::string> servers;
  for (const auto& s : trace.config.server_ids()) servers.insert(s);
  for (const auto& e : trace.events)
    if (e.kind == EventKind::crash && !servers.count(e.node))
      crashed_clients.insert(e.node);

  std::set<OperationId> invoked;
  for (const auto& e : trace.events)
    if (e.kind == EventKind::invoke) invoked.insert(*e.op);
  std::map<std::string, int> per_client;
  for (const auto& op : trace.config.ops) {
    const int index = per_client[op.client]++;
    if (crashed_clients.count(op.client)) continue;
    if (!invoked.count(OperationId{op.client, index})) ++res.uninvoked;
  }

  res.live = !res.budget_exhausted && res.stalled.empty() && res.uninvoked == 0;
  return res;
}

struct CostLedger {
  std::map<OperationId, Rational> op_cost;  // communication attributed per op
  Rational write_cost_max{0};
  Rational read_cost_max{0};
  Rational storage_max{0};  // peak total storage over the whole execution
  Rational total_communication{0};
};

inline CostLedger cost_ledger(const ExecutionTrace& trace) {
  CostLedger ledger;
  std::map<OperationId, OpKind> kind_of;
  for (const auto& e : trace.events)
    if (e.kind == EventKind::invoke)
      kind_of[*e.op] = op_kind_from_string(e.detail.at("op_kind").get<std::string>());

  ledger.storage_max = trace.initial_storage;
  for (const auto& e : trace.events) {
    for (const auto& m : e.sends) {
      ledger.op_cost[m.op] += m.cost;
      ledger.total_communication += m.cost;
    }
    if (ledger.storage_max < e.storage) ledger.storage_max = e.storage;
  }
  for (const auto& [op, cost] : ledger.op_cost) {
    auto it = kind_of.find(op);
    if (it == kind_of.end()) continue;
    Rational& best = it->second == OpKind::write ? ledger.write_cost_max
                                                 : ledger.read_cost_max;
    if (best < cost) best = cost;
  }
  return ledger;
}

struct ConcurrencyProfile {
  // Per read, how many writes were concurrent with it: neither operation's
  // end point preceded the other's invocation.
  std::map<OperationId, int> writes_concurrent_with_read;
  int max_writes_concurrent_with_read = 0;
};

inline ConcurrencyProfile concurrency_profile(const ExecutionTrace& trace) {
  ConcurrencyProfile profile;
  const EndPointIndex index(trace);
  const auto records = extract_operations(trace);
  for (const auto& r : records) {
    if (r.kind != OpKind::read) continue;
    int concurrent = 0;
    for (const auto& w : records)
      if (w.kind == OpKind::write && index.concurrent(r.op, w.op)) ++concurrent;
    profile.writes_concurrent_with_read[r.op] = concurrent;
    profile.max_writes_concurrent_with_read =
        std::max(profile.max_writes_concurrent_with_read, concurrent);
  }
  return profile;
}

struct SupersessionProfile {
  // Writes with a committed tag, in tag order, with the point by which every
  // message attributed to them had been handed to its recipient (absent if
  // the write never terminated or some message stayed in flight). The
  // initial value behaves like a write that fully delivered before the run.
  struct WriteInfo {
    Tag tag;
    std::optional<OperationId> op;  // empty for the initial value
    std::uint64_t query_complete = 0;
    std::optional<std::uint64_t> full_delivery;
  };
  std::vector<WriteInfo> writes;

  // Writes that finished their query phase by the given point and are not
  // yet superseded there; a write is superseded once delta+1 higher-tagged
  // writes have fully delivered. Only such writes can occupy storage.
  int not_superseded(std::uint64_t seq, int delta) const {
    int alive = 0;
    for (const auto& w : writes) {
      if (w.query_complete > seq) continue;
      int above = 0;
      for (const auto& x : writes)
        if (w.tag < x.tag && x.full_delivery && *x.full_delivery <= seq) ++above;
      if (above < delta + 1) ++alive;
    }
    return alive;
  }
};

inline SupersessionProfile supersession_profile(const ExecutionTrace& trace) {
  SupersessionProfile profile;
  profile.writes.push_back({kInitialTag, std::nullopt, 0, 0});

  const auto records = extract_operations(trace);
  std::map<OperationId, const OperationRecord*> write_records;
  for (const auto& r : records)
    if (r.kind == OpKind::write && r.tag) write_records[r.op] = &r;

  // Attribution-based delivery tracking. Gossip triggered by an operation
  // carries that operation's id, so the closure below covers relays too. A
  // message discarded by its recipient's crash counts as handed over: it can
  // never influence a live server.
  std::map<std::uint64_t, OperationId> op_of_msg;
  std::map<OperationId, std::uint64_t> last_delivery;
  std::map<OperationId, int> in_flight;
  auto handed_over = [&](std::uint64_t msg_id, std::uint64_t seq) {
    const OperationId& op = op_of_msg.at(msg_id);
    --in_flight[op];
    auto [it, fresh] = last_delivery.emplace(op, seq);
    if (!fresh && it->second < seq) it->second = seq;
  };
  for (const auto& e : trace.events) {
    for (const auto& m : e.sends) {
      op_of_msg[m.id] = m.op;
      ++in_flight[m.op];
    }
    if (e.kind == EventKind::deliver && e.msg_id) handed_over(*e.msg_id, e.seq);
    if (e.kind == EventKind::crash && e.detail.contains("discarded"))
      for (const auto& id : e.detail.at("discarded"))
        handed_over(id.get<std::uint64_t>(), e.seq);
  }

  for (const auto& [op, rec] : write_records) {
    SupersessionProfile::WriteInfo info;
    info.tag = *rec->tag;
    info.op = op;
    info.query_complete = rec->tag_seq.value_or(rec->invoke_seq);
    if (rec->respond_seq && in_flight[op] == 0) {
      auto it = last_delivery.find(op);
      info.full_delivery = it == last_delivery.end() ? rec->invoke_seq : it->second;
    }
    profile.writes.push_back(std::move(info));
  }
  std::sort(profile.writes.begin(), profile.writes.end(),
            [](const auto& a, const auto& b) { return a.tag < b.tag; });
  return profile;
}

struct StorageBoundResult {
  bool ok = true;
  int checked_points = 0;
  std::vector<std::string> violations;
};

// At every quiescent point (no message in flight), total storage must stay
// within (not yet superseded writes) * n/k value-units.
inline StorageBoundResult check_storage_bound(const ExecutionTrace& trace, int delta) {
  StorageBoundResult res;
  const SupersessionProfile profile = supersession_profile(trace);
  const int n = trace.config.n;
  const int k = trace.config.codec_k();

  std::set<std::uint64_t> in_flight;
  for (const auto& e : trace.events) {
    for (const auto& m : e.sends) in_flight.insert(m.id);
    if (e.kind == EventKind::deliver && e.msg_id) in_flight.erase(*e.msg_id);
    if (e.kind == EventKind::crash && e.detail.contains("discarded"))
      for (const auto& id : e.detail.at("discarded"))
        in_flight.erase(id.get<std::uint64_t>());
    if (!in_flight.empty()) continue;
    ++res.checked_points;
    const int w = profile.not_superseded(e.seq, delta);
    const Rational bound(static_cast<std::int64_t>(w) * n, k);
    if (bound < e.storage) {
      res.ok = false;
      std::ostringstream os;
      os << "storage " << to_string(e.storage) << " exceeds " << w << "*" << n
         << "/" << k << " at seq " << e.seq;
      res.violations.push_back(os.str());
    }
  }
  return res;
}

// Which tags still have a stored payload at each server once the run ends.
// Every payload-bearing node starts out holding the initial tag's data;
// directories carry metadata only.
inline std::map<std::string, std::set<Tag>> final_elements(const ExecutionTrace& trace) {
  std::map<std::string, std::set<Tag>> held;
  std::set<std::string> servers;
  for (const auto& s : trace.config.server_ids()) servers.insert(s);
  for (const auto& s : servers)
    if (trace.config.protocol != Protocol::ldr || s.rfind("rep", 0) == 0)
      held[s].insert(kInitialTag);
  for (const auto& e : trace.events) {
    if (e.kind == EventKind::crash && servers.count(e.node)) {
      held.erase(e.node);
      continue;
    }
    if (!servers.count(e.node)) continue;
    for (const auto& t : e.effects.payload_added) held[e.node].insert(t);
    for (const auto& t : e.effects.payload_removed) held[e.node].erase(t);
  }
  return held;
}

}  // namespace casim
