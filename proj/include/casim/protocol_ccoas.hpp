#pragma once

// Communication-optimal variant: k is pinned to n - f, every quorum has size
// n - f, and a read needs an element from every member of its finalize
// quorum. A server that cannot serve an element yet registers the reader and
// answers later, when the matching pre-write arrives. That deferral is what
// makes the protocol sensitive to losing messages sent by crashed writers.
//
// Clients are plain CasClient instances: with threshold n - f and k = n - f,
// "a quorum of responses carrying at least k elements" collapses to "n - f
// element-bearing responses", and these servers never send an element-free
// read response.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "casim/protocol_cas.hpp"

namespace casim {

class CcoasServer : public CasServer {
 public:
  using CasServer::CasServer;

 protected:
  void on_pre_write(const Message& m, Outbox& out) override {
    const Tag t = *m.tag;
    const auto& elem = std::get<CodedElement>(m.payload);
    auto it = triples_.find(t);
    if (it == triples_.end()) {
      triples_[t] = Stored{elem.data, Label::pre, false};
      out.effects.payload_added.push_back(t);
    } else if (!it->second.data) {
      // A finalize overtook the pre-write; fill in the element and serve
      // every reader that was parked on this tag. Responses are attributed
      // to the read that is still waiting, not to the writer.
      it->second.data = elem.data;
      out.effects.payload_added.push_back(t);
      auto rit = registered_.find(t);
      if (rit != registered_.end()) {
        for (const auto& [reader, read_op] : rit->second)
          out.send(id_, reader, read_op, MessageKind::finalize_read_resp, t,
                   CodedElement{index_, elem.data});
        registered_.erase(rit);
      }
    }
    out.send(id_, m.sender, m.op, MessageKind::pre_write_ack, t);
  }

  // No gossip in this protocol, so finalize handlers only record and ack.
  void on_finalize_write(const Message& m, Outbox& out) override {
    apply_fin(*m.tag, out);
    out.send(id_, m.sender, m.op, MessageKind::finalize_write_ack, *m.tag);
  }

  void on_finalize_read(const Message& m, Outbox& out) override {
    const Tag t = *m.tag;
    auto it = triples_.find(t);
    if (it != triples_.end() && it->second.data) {
      if (it->second.label == Label::pre) {
        it->second.label = Label::fin;
        out.effects.fin_added.push_back(t);
      }
      out.send(id_, m.sender, m.op, MessageKind::finalize_read_resp, t,
               CodedElement{index_, *it->second.data});
    } else {
      // No element yet: finalize the tag and defer the response until the
      // pre-write shows up.
      apply_fin(t, out);
      registered_[t].emplace_back(m.sender, m.op);
    }
  }

 private:
  // Readers waiting for an element, per tag, with the operation each
  // response must be attributed to.
  std::map<Tag, std::vector<std::pair<std::string, OperationId>>> registered_;
};

}  // namespace casim
