#pragma once

// Deterministic discrete-event simulation of protocol nodes exchanging
// messages over reliable asynchronous point-to-point channels, with crash
// failures, scripted scheduling, and a step budget. One event is processed
// per sequence number; a rerun with the same config and seed reproduces the
// trace byte for byte.
//
// Each iteration fires, in priority order: a satisfied crash trigger, then
// an eligible client invocation, then one message delivery chosen by the
// scheduler policy. At quiescence (nothing deliverable, nothing eligible)
// the simulator first releases hold rules waiting for quiescence, then
// force-satisfies the earliest pending seq-based trigger, and finally halts.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "casim/core_types.hpp"
#include "casim/scenario.hpp"
#include "casim/trace.hpp"

namespace casim {

struct Response {
  OperationId op;
  OpKind kind = OpKind::write;
  std::optional<Bytes> value;  // reads return a value
  Tag tag;                     // the operation's tag
};

// Everything a node may produce while reacting to one event.
struct Outbox {
  int k = 1;  // share ratio used to stamp message costs
  std::vector<Message> sends;
  std::optional<Response> response;
  std::optional<Tag> tag_committed;
  Effects effects;

  void send(std::string from, std::string to, OperationId op, MessageKind kind,
            std::optional<Tag> tag = std::nullopt, Payload payload = {},
            bool reader = false) {
    Message m;
    m.sender = std::move(from);
    m.recipient = std::move(to);
    m.op = std::move(op);
    m.kind = kind;
    m.tag = std::move(tag);
    m.cost = payload_cost(payload, k);
    m.payload = std::move(payload);
    m.reader = reader;
    sends.push_back(std::move(m));
  }
};

class ServerNode {
 public:
  virtual ~ServerNode() = default;
  virtual void handle(const Message& m, Outbox& out) = 0;
  virtual Rational storage_units() const = 0;
};

class ClientNode {
 public:
  virtual ~ClientNode() = default;
  virtual void invoke(const OperationId& op, OpKind kind, const Bytes& value,
                      Outbox& out) = 0;
  virtual void handle(const Message& m, Outbox& out) = 0;
};

struct ProtocolInstance {
  // Servers kept in id order for deterministic iteration.
  std::vector<std::pair<std::string, std::unique_ptr<ServerNode>>> servers;
  std::map<std::string, std::unique_ptr<ClientNode>> clients;
};

class Simulator {
 public:
  Simulator(ScenarioConfig cfg, ProtocolInstance nodes)
      : cfg_(std::move(cfg)), nodes_(std::move(nodes)), rng_(cfg_.scheduler.seed) {
    for (const auto& [id, server] : nodes_.servers) {
      storage_[id] = server->storage_units();
      storage_total_ += storage_[id];
    }
    int pos = 0;
    std::map<std::string, int> per_client;
    for (const auto& op : cfg_.ops) {
      op_states_.push_back({pos, OperationId{op.client, per_client[op.client]++},
                            CondState{op.start}, false});
      ++pos;
    }
    for (const auto& [node, cond] : cfg_.failures.server_crashes)
      crash_states_.push_back({node, CondState{cond}, false});
    for (const auto& [node, cond] : cfg_.failures.client_crashes)
      crash_states_.push_back({node, CondState{cond}, false});
    for (const auto& rule : cfg_.scheduler.holds)
      hold_states_.push_back({rule, CondState{rule.until}, false});
  }

  ExecutionTrace run() {
    trace_.config = cfg_;
    trace_.initial_storage = storage_total_;
    while (true) {
      if (next_seq_ > cfg_.step_budget) {
        budget_exhausted_ = true;
        break;
      }
      if (fire_one_crash()) continue;
      if (fire_one_invocation()) continue;
      refresh_holds();
      auto ids = deliverable_ids();
      if (!ids.empty()) {
        deliver(pick(ids));
        continue;
      }
      if (release_one_quiescent_hold()) continue;
      if (force_earliest_at_seq()) continue;
      break;
    }
    finish();
    return std::move(trace_);
  }

 private:
  struct CondState {
    Condition cond;
    int delivered_count = 0;
    bool forced = false;
    std::vector<CondState> children;

    CondState() = default;
    explicit CondState(Condition c) : cond(std::move(c)) {
      for (const auto& child : cond.children) children.emplace_back(child);
    }

    void note_delivery(const Message& m) {
      if (cond.type == Condition::Type::delivered && cond.match.matches(m))
        ++delivered_count;
      for (auto& child : children) child.note_delivery(m);
    }

    bool satisfied(const Simulator& sim) const {
      switch (cond.type) {
        case Condition::Type::always: return true;
        case Condition::Type::at_seq: return forced || sim.next_seq_ >= cond.seq;
        case Condition::Type::responded:
          return sim.responded_.count({cond.client, cond.op_index}) > 0;
        case Condition::Type::delivered: return delivered_count >= cond.count;
        case Condition::Type::quiescent: return forced;
        case Condition::Type::never: return false;
        case Condition::Type::all_of:
          for (const auto& child : children)
            if (!child.satisfied(sim)) return false;
          return true;
      }
      return false;
    }
  };

  struct OpState {
    int pos = 0;  // position in cfg_.ops
    OperationId id;
    CondState start;
    bool invoked = false;
  };

  struct CrashState {
    std::string node;
    CondState when;
    bool fired = false;
  };

  struct HoldState {
    HoldRule rule;
    CondState until;
    bool released = false;
  };

  bool is_server(const std::string& id) const {
    for (const auto& [sid, _] : nodes_.servers)
      if (sid == id) return true;
    return false;
  }

  ServerNode* server(const std::string& id) {
    for (auto& [sid, node] : nodes_.servers)
      if (sid == id) return node.get();
    return nullptr;
  }

  bool fire_one_crash() {
    for (auto& c : crash_states_) {
      if (c.fired || !c.when.satisfied(*this)) continue;
      c.fired = true;
      if (crashed_.count(c.node)) continue;  // already down; nothing to do
      Event ev;
      ev.seq = next_seq_++;
      ev.kind = EventKind::crash;
      ev.node = c.node;
      crashed_.insert(c.node);
      std::vector<std::uint64_t> discarded;
      for (auto it = pending_.begin(); it != pending_.end();) {
        if (it->second.recipient == c.node) {
          discarded.push_back(it->first);
          it = pending_.erase(it);
        } else {
          ++it;
        }
      }
      if (!discarded.empty()) ev.detail["discarded"] = discarded;
      if (is_server(c.node)) {
        storage_total_ -= storage_[c.node];
        storage_[c.node] = Rational(0);
      }
      ev.storage = storage_total_;
      trace_.events.push_back(std::move(ev));
      return true;
    }
    return false;
  }

  bool fire_one_invocation() {
    for (auto& op : op_states_) {
      if (op.invoked) continue;
      const auto& spec = cfg_.ops[op.pos];
      if (crashed_.count(spec.client)) continue;
      if (in_flight_.count(spec.client)) continue;
      if (op.id.index != invoked_count_[spec.client]) continue;  // not next for client
      if (!op.start.satisfied(*this)) continue;

      op.invoked = true;
      ++invoked_count_[spec.client];
      in_flight_[spec.client] = op.id;

      Event ev;
      ev.seq = next_seq_++;
      ev.kind = EventKind::invoke;
      ev.node = spec.client;
      ev.op = op.id;
      ev.detail["op_kind"] = to_string(spec.kind);
      if (spec.kind == OpKind::write) ev.detail["value"] = to_hex(spec.value);

      Outbox out;
      out.k = cfg_.codec_k();
      nodes_.clients.at(spec.client)->invoke(op.id, spec.kind, spec.value, out);
      process_reaction(spec.client, std::move(out), std::move(ev));
      return true;
    }
    return false;
  }

  void refresh_holds() {
    for (auto& h : hold_states_)
      if (!h.released && h.until.satisfied(*this)) h.released = true;
  }

  bool held(const Message& m) const {
    for (const auto& h : hold_states_)
      if (!h.released && h.rule.match.matches(m)) return true;
    return false;
  }

  std::vector<std::uint64_t> deliverable_ids() const {
    std::vector<std::uint64_t> ids;
    for (const auto& [id, m] : pending_)
      if (!held(m)) ids.push_back(id);
    return ids;
  }

  std::uint64_t pick(const std::vector<std::uint64_t>& ids) {
    if (cfg_.scheduler.mode == SchedulerMode::seeded_random)
      return ids[rng_() % ids.size()];
    return ids.front();  // scripted and fair_round_robin deliver oldest first
  }

  void deliver(std::uint64_t id) {
    Message m = pending_.at(id);
    pending_.erase(id);
    Event ev;
    ev.seq = next_seq_++;
    ev.kind = EventKind::deliver;
    ev.node = m.recipient;
    ev.op = m.op;
    ev.msg_id = id;
    if (crashed_.count(m.recipient)) {
      ev.dropped = true;
      ev.storage = storage_total_;
      trace_.events.push_back(std::move(ev));
      return;
    }
    for (auto& st : op_states_) st.start.note_delivery(m);
    for (auto& st : crash_states_) st.when.note_delivery(m);
    for (auto& st : hold_states_) st.until.note_delivery(m);

    Outbox out;
    out.k = cfg_.codec_k();
    if (ServerNode* s = server(m.recipient)) {
      s->handle(m, out);
    } else {
      nodes_.clients.at(m.recipient)->handle(m, out);
    }
    process_reaction(m.recipient, std::move(out), std::move(ev));
  }

  void process_reaction(const std::string& node, Outbox&& out, Event&& ev) {
    for (auto& m : out.sends) {
      m.id = next_msg_id_++;
      m.sent_seq = ev.seq;
      pending_[m.id] = m;
      ev.sends.push_back(std::move(m));
    }
    ev.effects = std::move(out.effects);
    if (ServerNode* s = server(node)) {
      if (!crashed_.count(node)) {
        Rational now = s->storage_units();
        storage_total_ += now - storage_[node];
        storage_[node] = now;
      }
    }
    ev.storage = storage_total_;
    const OperationId ev_op = ev.op ? *ev.op : OperationId{};
    trace_.events.push_back(std::move(ev));

    if (out.tag_committed) {
      Event tev;
      tev.seq = next_seq_++;
      tev.kind = EventKind::internal;
      tev.node = node;
      auto it = in_flight_.find(node);
      if (it != in_flight_.end()) tev.op = it->second;
      else tev.op = ev_op;
      tev.detail["note"] = "tag_committed";
      tev.detail["tag"] = *out.tag_committed;
      tev.storage = storage_total_;
      trace_.events.push_back(std::move(tev));
    }
    if (out.response) {
      const Response& r = *out.response;
      Event rev;
      rev.seq = next_seq_++;
      rev.kind = EventKind::respond;
      rev.node = node;
      rev.op = r.op;
      rev.detail["op_kind"] = to_string(r.kind);
      rev.detail["value"] = r.value ? Json(to_hex(*r.value)) : Json(nullptr);
      rev.detail["tag"] = r.tag;
      rev.storage = storage_total_;
      trace_.events.push_back(std::move(rev));
      responded_.insert({r.op.client, r.op.index});
      in_flight_.erase(r.op.client);
    }
  }

  bool release_one_quiescent_hold() {
    for (auto& h : hold_states_) {
      if (!h.released && h.until.cond.type == Condition::Type::quiescent) {
        h.released = true;
        return true;
      }
    }
    return false;
  }

  // Unsatisfied seq triggers reachable inside a condition, including the
  // legs of a conjunction.
  static void collect_forceable(CondState& c, std::vector<CondState*>& out) {
    if (c.cond.type == Condition::Type::at_seq && !c.forced) out.push_back(&c);
    for (auto& child : c.children) collect_forceable(child, out);
  }

  // With nothing deliverable and nothing eligible, logical time may jump:
  // satisfy the earliest pending seq trigger (crashes win ties) and retry.
  bool force_earliest_at_seq() {
    CondState* best = nullptr;
    std::uint64_t best_seq = 0;
    auto consider = [&](CondState& root) {
      if (root.satisfied(*this)) return;
      std::vector<CondState*> targets;
      collect_forceable(root, targets);
      for (CondState* t : targets) {
        if (!best || t->cond.seq < best_seq) {
          best = t;
          best_seq = t->cond.seq;
        }
      }
    };
    // Crashes are scanned first; on equal target seq the crash fires first
    // because later candidates need a strictly smaller seq to win.
    for (auto& c : crash_states_) {
      if (c.fired) continue;
      consider(c.when);
    }
    for (auto& op : op_states_) {
      if (op.invoked) continue;
      const auto& spec = cfg_.ops[op.pos];
      if (crashed_.count(spec.client) || in_flight_.count(spec.client)) continue;
      if (op.id.index != invoked_count_[spec.client]) continue;
      consider(op.start);
    }
    for (auto& h : hold_states_) {
      if (h.released) continue;
      consider(h.until);
    }
    if (!best) return false;
    best->forced = true;
    return true;
  }

  void finish() {
    Event ev;
    ev.seq = next_seq_++;
    ev.kind = EventKind::internal;
    ev.node = "sim";
    ev.detail["halt"] = budget_exhausted_ ? "budget_exhausted" : "quiescent";
    std::vector<OperationId> stalled;
    for (const auto& [client, op] : in_flight_)
      if (!crashed_.count(client)) stalled.push_back(op);
    std::vector<std::uint64_t> undelivered;
    for (const auto& [id, m] : pending_) undelivered.push_back(id);
    ev.detail["stalled_ops"] = stalled;
    ev.detail["undelivered"] = undelivered;
    int uninvoked = 0;
    for (const auto& op : op_states_)
      if (!op.invoked) ++uninvoked;
    ev.detail["uninvoked"] = uninvoked;
    ev.storage = storage_total_;
    trace_.events.push_back(std::move(ev));
    trace_.budget_exhausted = budget_exhausted_;
    trace_.stalled_ops = std::move(stalled);
    trace_.undelivered = std::move(undelivered);
  }

  ScenarioConfig cfg_;
  ProtocolInstance nodes_;
  ExecutionTrace trace_;
  std::mt19937_64 rng_;

  std::map<std::uint64_t, Message> pending_;
  std::uint64_t next_msg_id_ = 1;
  std::uint64_t next_seq_ = 1;
  std::set<std::string> crashed_;
  std::map<std::string, Rational> storage_;
  Rational storage_total_{0};

  std::vector<OpState> op_states_;
  std::vector<CrashState> crash_states_;
  std::vector<HoldState> hold_states_;
  std::map<std::string, int> invoked_count_;
  std::map<std::string, OperationId> in_flight_;
  std::set<std::pair<std::string, int>> responded_;
  bool budget_exhausted_ = false;
};

}  // namespace casim
