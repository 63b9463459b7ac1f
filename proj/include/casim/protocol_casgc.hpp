#pragma once

// CAS with garbage collection: servers behave like CAS servers but, after
// every receipt, keep coded elements only for the delta+1 highest finalized
// tags. Everything below that cutoff loses its payload and gains a gc
// marker. A reader finalizing a collected tag gets no response; with more
// than delta writes concurrent with a read, the read may never terminate.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "casim/protocol_cas.hpp"
#include "casim/trace.hpp"

namespace casim {

class CasGcServer : public CasServer {
 public:
  CasGcServer(std::string id, int index, std::vector<std::string> server_ids,
              CodecParams codec, const Bytes& initial_value, int delta)
      : CasServer(std::move(id), index, std::move(server_ids), codec, initial_value),
        delta_(delta) {}

 protected:
  void post_receipt(Outbox& out) override { gc(out); }

  void on_finalize_read(const Message& m, Outbox& out) override {
    const Tag t = *m.tag;
    auto it = triples_.find(t);
    if (it != triples_.end() && it->second.data) {
      // The element is captured before the post-receipt collection runs;
      // finalizing this very tag may push it below the cutoff.
      if (it->second.label == Label::pre) {
        it->second.label = Label::fin;
        out.effects.fin_added.push_back(t);
      }
      out.send(id_, m.sender, m.op, MessageKind::finalize_read_resp, t,
               CodedElement{index_, *it->second.data});
    } else if (it != triples_.end() && it->second.gc) {
      // Already collected: record the finalize but stay silent.
      if (it->second.label == Label::pre) {
        it->second.label = Label::fin;
        out.effects.fin_added.push_back(t);
      }
    } else {
      apply_fin(t, out);
      out.send(id_, m.sender, m.op, MessageKind::finalize_read_resp, t);
    }
    gossip_item(t, m.op, out);
  }

 private:
  void gc(Outbox& out) {
    std::vector<Tag> fins;
    for (const auto& [tag, st] : triples_)
      if (st.label == Label::fin) fins.push_back(tag);
    if (static_cast<int>(fins.size()) <= delta_ + 1) return;
    const Tag cutoff = fins[fins.size() - static_cast<std::size_t>(delta_ + 1)];
    for (auto& [tag, st] : triples_) {
      if (!(tag < cutoff) || st.gc) continue;
      if (st.data) {
        st.data.reset();
        out.effects.payload_removed.push_back(tag);
      }
      st.gc = true;
    }
  }

  int delta_ = 0;
};

// End points of operations, reconstructed from a trace. A read ends when it
// responds (or at its client's crash). A write ends at the first point where
// a quorum of never-crashing servers all hold its tag finalized; if that
// never happens and the client crashed, it ends at the crash. Operations
// lacking an end point are concurrent with everything that does not end
// before their invocation.
class EndPointIndex {
 public:
  explicit EndPointIndex(const ExecutionTrace& trace) {
    const auto& cfg = trace.config;
    const bool coded = cfg.protocol == Protocol::cas ||
                       cfg.protocol == Protocol::casgc ||
                       cfg.protocol == Protocol::ccoas;
    std::set<std::string> servers;
    for (const auto& s : cfg.server_ids()) servers.insert(s);

    std::set<std::string> crashed;
    for (const auto& e : trace.events)
      if (e.kind == EventKind::crash) crashed.insert(e.node);

    // First finalization point of each tag at each never-crashing server.
    std::map<Tag, std::vector<std::uint64_t>> fin_points;
    for (const auto& e : trace.events) {
      if (!servers.count(e.node) || crashed.count(e.node)) continue;
      for (const auto& t : e.effects.fin_added) fin_points[t].push_back(e.seq);
    }

    for (const auto& e : trace.events) {
      switch (e.kind) {
        case EventKind::invoke: {
          OpInfo& info = ops_[*e.op];
          info.invoke = e.seq;
          info.kind = op_kind_from_string(e.detail.at("op_kind").get<std::string>());
          break;
        }
        case EventKind::respond:
          ops_[*e.op].respond = e.seq;
          break;
        case EventKind::internal:
          if (e.op && e.detail.contains("note") && e.detail.at("note") == "tag_committed")
            ops_[*e.op].tag = e.detail.at("tag").get<Tag>();
          break;
        case EventKind::crash:
          if (!servers.count(e.node)) client_crash_[e.node] = e.seq;
          break;
        default: break;
      }
    }

    const int threshold = cfg.quorum_threshold();
    for (auto& [op, info] : ops_) {
      if (info.kind == OpKind::read || !coded) {
        info.end = info.respond;
        if (!info.end) info.end = crash_after(op.client, info.invoke);
        continue;
      }
      if (info.tag) {
        // Count the initial finalization at every never-crashing server for
        // the reserved tag; real tags start from their fin events.
        auto it = fin_points.find(*info.tag);
        if (it != fin_points.end() &&
            static_cast<int>(it->second.size()) >= threshold) {
          std::vector<std::uint64_t> seqs = it->second;
          std::sort(seqs.begin(), seqs.end());
          info.end = seqs[static_cast<std::size_t>(threshold) - 1];
          continue;
        }
      }
      info.end = crash_after(op.client, info.invoke);
    }
  }

  std::optional<std::uint64_t> end_point(const OperationId& op) const {
    auto it = ops_.find(op);
    if (it == ops_.end()) return std::nullopt;
    return it->second.end;
  }

  std::optional<std::uint64_t> invoke_point(const OperationId& op) const {
    auto it = ops_.find(op);
    if (it == ops_.end()) return std::nullopt;
    return std::optional<std::uint64_t>(it->second.invoke);
  }

  // True when neither operation's end point precedes the other's invocation.
  bool concurrent(const OperationId& a, const OperationId& b) const {
    auto ia = ops_.find(a);
    auto ib = ops_.find(b);
    if (ia == ops_.end() || ib == ops_.end()) return false;
    if (ia->second.end && *ia->second.end < ib->second.invoke) return false;
    if (ib->second.end && *ib->second.end < ia->second.invoke) return false;
    return true;
  }

 private:
  struct OpInfo {
    OpKind kind = OpKind::write;
    std::uint64_t invoke = 0;
    std::optional<std::uint64_t> respond;
    std::optional<Tag> tag;
    std::optional<std::uint64_t> end;
  };

  std::optional<std::uint64_t> crash_after(const std::string& client,
                                           std::uint64_t invoke) const {
    auto it = client_crash_.find(client);
    if (it == client_crash_.end() || it->second < invoke) return std::nullopt;
    return it->second;
  }

  std::map<OperationId, OpInfo> ops_;
  std::map<std::string, std::uint64_t> client_crash_;
};

inline std::optional<std::uint64_t> end_point_of(const ExecutionTrace& trace,
                                                 const OperationId& op) {
  return EndPointIndex(trace).end_point(op);
}

}  // namespace casim
