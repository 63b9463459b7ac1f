#pragma once

// Coded atomic storage over an (n, k) MDS code. Writes run three phases
// (query, pre-write, finalize) and reads two (query, finalize); servers
// store (tag, element, label) triples, answer queries with their highest
// finalized tag, and propagate finalized tags to each other via one-shot
// gossip. Quorums are all server sets of size ceil((n+k)/2).

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "casim/core_types.hpp"
#include "casim/mds_codec.hpp"
#include "casim/quorum.hpp"
#include "casim/sim_net.hpp"

namespace casim {

class CasServer : public ServerNode {
 public:
  CasServer(std::string id, int index, std::vector<std::string> server_ids,
            CodecParams codec, const Bytes& initial_value)
      : id_(std::move(id)), index_(index), server_ids_(std::move(server_ids)), codec_(codec) {
    auto elements = encode(initial_value, codec_);
    triples_[kInitialTag] = Stored{elements[index_].data, Label::fin, false};
  }

  void handle(const Message& m, Outbox& out) override {
    switch (m.kind) {
      case MessageKind::query: on_query(m, out); break;
      case MessageKind::pre_write: on_pre_write(m, out); break;
      case MessageKind::finalize_write: on_finalize_write(m, out); break;
      case MessageKind::finalize_read: on_finalize_read(m, out); break;
      case MessageKind::gossip: on_gossip(m, out); break;
      default: break;  // not addressed to this protocol family
    }
    post_receipt(out);
  }

  Rational storage_units() const override {
    Rational total(0);
    for (const auto& [tag, st] : triples_)
      if (st.data) total += Rational(1, codec_.k);
    return total;
  }

 protected:
  struct Stored {
    std::optional<Bytes> data;
    Label label = Label::pre;
    bool gc = false;  // garbage-collection marker; unused by plain CAS
  };

  virtual void on_query(const Message& m, Outbox& out) {
    out.send(id_, m.sender, m.op, MessageKind::query_resp, highest_fin());
  }

  virtual void on_pre_write(const Message& m, Outbox& out) {
    const Tag t = *m.tag;
    if (!triples_.count(t)) {
      triples_[t] = Stored{std::get<CodedElement>(m.payload).data, Label::pre, false};
      out.effects.payload_added.push_back(t);
    }
    out.send(id_, m.sender, m.op, MessageKind::pre_write_ack, t);
  }

  virtual void on_finalize_write(const Message& m, Outbox& out) {
    apply_fin(*m.tag, out);
    out.send(id_, m.sender, m.op, MessageKind::finalize_write_ack, *m.tag);
    gossip_item(*m.tag, m.op, out);
  }

  virtual void on_finalize_read(const Message& m, Outbox& out) {
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
      apply_fin(t, out);
      out.send(id_, m.sender, m.op, MessageKind::finalize_read_resp, t);
    }
    gossip_item(t, m.op, out);
  }

  virtual void on_gossip(const Message& m, Outbox& out) {
    apply_fin(*m.tag, out);
    gossip_item(*m.tag, m.op, out);
  }

  // Hook invoked after each receipt; garbage collection plugs in here.
  virtual void post_receipt(Outbox&) {}

  // Record the tag as finalized, creating a payload-free triple if needed.
  void apply_fin(const Tag& t, Outbox& out) {
    auto it = triples_.find(t);
    if (it == triples_.end()) {
      triples_[t] = Stored{std::nullopt, Label::fin, false};
      out.effects.fin_added.push_back(t);
    } else if (it->second.label == Label::pre) {
      it->second.label = Label::fin;
      out.effects.fin_added.push_back(t);
    }
  }

  // Forward a finalized tag to every other server, at most once per tag,
  // regardless of whether it was learned from a client or another server.
  void gossip_item(const Tag& t, const OperationId& op, Outbox& out) {
    if (!gossiped_.insert(t).second) return;
    for (const auto& peer : server_ids_)
      if (peer != id_) out.send(id_, peer, op, MessageKind::gossip, t);
  }

  Tag highest_fin() const {
    Tag best = kInitialTag;
    for (const auto& [tag, st] : triples_)
      if (st.label == Label::fin && tag > best) best = tag;
    return best;
  }

  std::string id_;
  int index_ = 0;
  std::vector<std::string> server_ids_;
  CodecParams codec_;
  std::map<Tag, Stored> triples_;
  std::set<Tag> gossiped_;
};

// Client for the coded protocols. The CCOAS variant reuses this machine
// unchanged: with quorum threshold n - f and k = n - f, read finalize
// completes exactly when n - f element-bearing responses arrived, and CCOAS
// servers never send element-free read responses.
class CasClient : public ClientNode {
 public:
  CasClient(std::string id, std::vector<std::string> server_ids, CodecParams codec,
            QuorumSystem quorums, std::size_t value_length)
      : id_(std::move(id)), server_ids_(std::move(server_ids)), codec_(codec),
        quorums_(quorums), value_length_(value_length) {}

  void invoke(const OperationId& op, OpKind kind, const Bytes& value, Outbox& out) override {
    op_.emplace();
    op_->id = op;
    op_->kind = kind;
    op_->value = value;
    for (const auto& s : server_ids_) out.send(id_, s, op, MessageKind::query);
  }

  void handle(const Message& m, Outbox& out) override {
    if (!op_ || m.op != op_->id) return;  // stale response from a finished phase
    switch (op_->phase) {
      case Phase::query: on_query_resp(m, out); break;
      case Phase::pre_write: on_pre_write_ack(m, out); break;
      case Phase::finalize: on_finalize_resp(m, out); break;
    }
  }

 protected:
  enum class Phase { query, pre_write, finalize };

  struct PendingOp {
    OperationId id;
    OpKind kind = OpKind::write;
    Bytes value;
    Phase phase = Phase::query;
    std::set<std::string> responders;
    Tag best_tag = kInitialTag;
    Tag tag;
    std::map<int, Bytes> elements;  // read finalize: coordinate -> share
  };

  void on_query_resp(const Message& m, Outbox& out) {
    if (m.kind != MessageKind::query_resp) return;
    if (!op_->responders.insert(m.sender).second) return;
    if (*m.tag > op_->best_tag) op_->best_tag = *m.tag;
    if (!quorums_.is_quorum(op_->responders.size())) return;

    op_->responders.clear();
    if (op_->kind == OpKind::write) {
      op_->tag = Tag{op_->best_tag.z + 1, id_};
      out.tag_committed = op_->tag;
      auto elements = encode(op_->value, codec_);
      for (std::size_t i = 0; i < server_ids_.size(); ++i)
        out.send(id_, server_ids_[i], op_->id, MessageKind::pre_write, op_->tag,
                 elements[i]);
      op_->phase = Phase::pre_write;
    } else {
      op_->tag = op_->best_tag;
      out.tag_committed = op_->tag;
      for (const auto& s : server_ids_)
        out.send(id_, s, op_->id, MessageKind::finalize_read, op_->tag);
      op_->phase = Phase::finalize;
    }
  }

  void on_pre_write_ack(const Message& m, Outbox& out) {
    if (m.kind != MessageKind::pre_write_ack || !m.tag || *m.tag != op_->tag) return;
    if (!op_->responders.insert(m.sender).second) return;
    if (!quorums_.is_quorum(op_->responders.size())) return;

    op_->responders.clear();
    for (const auto& s : server_ids_)
      out.send(id_, s, op_->id, MessageKind::finalize_write, op_->tag);
    op_->phase = Phase::finalize;
  }

  void on_finalize_resp(const Message& m, Outbox& out) {
    if (op_->kind == OpKind::write) {
      if (m.kind != MessageKind::finalize_write_ack || !m.tag || *m.tag != op_->tag) return;
      if (!op_->responders.insert(m.sender).second) return;
      if (!quorums_.is_quorum(op_->responders.size())) return;
      out.response = Response{op_->id, OpKind::write, std::nullopt, op_->tag};
      op_.reset();
      return;
    }
    if (m.kind != MessageKind::finalize_read_resp || !m.tag || *m.tag != op_->tag) return;
    if (!op_->responders.insert(m.sender).second) return;
    if (const auto* elem = std::get_if<CodedElement>(&m.payload))
      op_->elements[elem->index] = elem->data;
    if (!quorums_.is_quorum(op_->responders.size())) return;
    if (static_cast<int>(op_->elements.size()) < codec_.k) return;  // await more shares

    std::vector<CodedElement> shares;
    for (const auto& [index, data] : op_->elements)
      shares.push_back(CodedElement{index, data});
    Bytes value = decode(shares, codec_, value_length_);
    out.response = Response{op_->id, OpKind::read, value, op_->tag};
    op_.reset();
  }

  std::string id_;
  std::vector<std::string> server_ids_;
  CodecParams codec_;
  QuorumSystem quorums_;
  std::size_t value_length_;
  std::optional<PendingOp> op_;
};

}  // namespace casim
