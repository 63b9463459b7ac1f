#pragma once

// Replication baselines the coded protocols are measured against.
//
// The first is the classic two-phase majority register: every server keeps
// one (tag, value) pair, writes install a higher tag at a majority, reads
// pick the highest pair from a majority and write it back before returning.
//
// The second splits metadata from data: directories track, per tag, which
// replicas hold the value; replicas keep every version they ever accepted.
// A write stores the value at the 2f+1 lowest replicas and registers the
// first f+1 acknowledgers with the directories, so a read only has to fetch
// from f+1 replicas known to hold the tag it picked.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "casim/core_types.hpp"
#include "casim/rational.hpp"
#include "casim/sim_net.hpp"

namespace casim {

class AbdServer : public ServerNode {
 public:
  AbdServer(std::string id, const Bytes& initial_value)
      : id_(std::move(id)), value_(initial_value) {}

  void handle(const Message& m, Outbox& out) override {
    switch (m.kind) {
      case MessageKind::get:
        // Only readers need the value; writers just learn the tag, which
        // keeps the write's first phase free.
        if (m.reader)
          out.send(id_, m.sender, m.op, MessageKind::get_resp, tag_, Value{value_});
        else
          out.send(id_, m.sender, m.op, MessageKind::get_resp, tag_);
        break;
      case MessageKind::put: {
        const Tag t = *m.tag;
        if (tag_ < t) {
          out.effects.payload_removed.push_back(tag_);
          out.effects.payload_added.push_back(t);
          tag_ = t;
          value_ = std::get<Value>(m.payload).data;
        }
        out.send(id_, m.sender, m.op, MessageKind::put_ack, t);
        break;
      }
      default: break;
    }
  }

  Rational storage_units() const override { return Rational(1); }

 private:
  std::string id_;
  Tag tag_ = kInitialTag;
  Bytes value_;
};

class AbdClient : public ClientNode {
 public:
  AbdClient(std::string id, std::vector<std::string> server_ids)
      : id_(std::move(id)),
        server_ids_(std::move(server_ids)),
        majority_(static_cast<int>(server_ids_.size()) / 2 + 1) {}

  void invoke(const OperationId& op, OpKind kind, const Bytes& value,
              Outbox& out) override {
    op_.emplace();
    op_->id = op;
    op_->kind = kind;
    op_->value = value;
    for (const auto& s : server_ids_)
      out.send(id_, s, op, MessageKind::get, std::nullopt, {},
               kind == OpKind::read);
  }

  void handle(const Message& m, Outbox& out) override {
    if (!op_ || m.op != op_->id) return;
    switch (m.kind) {
      case MessageKind::get_resp: on_get_resp(m, out); break;
      case MessageKind::put_ack: on_put_ack(m, out); break;
      default: break;
    }
  }

 private:
  struct PendingOp {
    OperationId id;
    OpKind kind = OpKind::write;
    Bytes value;  // value being written, or best value seen so far on a read
    enum class Phase { get, put } phase = Phase::get;
    std::set<std::string> responders;
    std::optional<Tag> best;
    Tag tag;
  };

  void on_get_resp(const Message& m, Outbox& out) {
    if (op_->phase != PendingOp::Phase::get) return;
    if (!op_->responders.insert(m.sender).second) return;
    if (!op_->best || *op_->best < *m.tag) {
      op_->best = *m.tag;
      if (op_->kind == OpKind::read) op_->value = std::get<Value>(m.payload).data;
    }
    if (static_cast<int>(op_->responders.size()) < majority_) return;

    op_->tag = op_->kind == OpKind::write ? Tag{op_->best->z + 1, id_} : *op_->best;
    out.tag_committed = op_->tag;
    op_->phase = PendingOp::Phase::put;
    op_->responders.clear();
    // Reads write the chosen pair back so later reads cannot observe an
    // older tag at a majority.
    for (const auto& s : server_ids_)
      out.send(id_, s, op_->id, MessageKind::put, op_->tag, Value{op_->value});
  }

  void on_put_ack(const Message& m, Outbox& out) {
    if (op_->phase != PendingOp::Phase::put || *m.tag != op_->tag) return;
    if (!op_->responders.insert(m.sender).second) return;
    if (static_cast<int>(op_->responders.size()) < majority_) return;

    Response r;
    r.op = op_->id;
    r.kind = op_->kind;
    r.tag = op_->tag;
    if (op_->kind == OpKind::read) r.value = op_->value;
    out.response = std::move(r);
    op_.reset();
  }

  std::string id_;
  std::vector<std::string> server_ids_;
  int majority_ = 0;
  std::optional<PendingOp> op_;
};

class LdrDirectory : public ServerNode {
 public:
  // A fresh directory lists every replica as holding the initial tag.
  LdrDirectory(std::string id, std::vector<std::string> replica_ids, int f)
      : id_(std::move(id)), locations_(std::move(replica_ids)), f_(f) {}

  void handle(const Message& m, Outbox& out) override {
    switch (m.kind) {
      case MessageKind::get_meta:
        out.send(id_, m.sender, m.op, MessageKind::get_meta_resp, tag_, locations_);
        break;
      case MessageKind::put_meta: {
        const Tag t = *m.tag;
        const auto& locs = std::get<LocationSet>(m.payload);
        if (t == tag_) {
          for (const auto& r : locs)
            if (std::find(locations_.begin(), locations_.end(), r) == locations_.end())
              locations_.push_back(r);
        } else if (tag_ < t && static_cast<int>(locs.size()) >= f_ + 1) {
          // Refuse to advance to a tag held by fewer than f+1 replicas, or
          // crashes could leave the listed copies unreachable.
          tag_ = t;
          locations_ = locs;
        }
        out.send(id_, m.sender, m.op, MessageKind::put_meta_ack, t);
        break;
      }
      default: break;
    }
  }

  Rational storage_units() const override { return Rational(0); }

 private:
  std::string id_;
  Tag tag_ = kInitialTag;
  LocationSet locations_;
  int f_ = 0;
};

class LdrReplica : public ServerNode {
 public:
  LdrReplica(std::string id, const Bytes& initial_value) : id_(std::move(id)) {
    store_[kInitialTag] = initial_value;
  }

  void handle(const Message& m, Outbox& out) override {
    switch (m.kind) {
      case MessageKind::put: {
        const Tag t = *m.tag;
        if (store_.emplace(t, std::get<Value>(m.payload).data).second)
          out.effects.payload_added.push_back(t);
        out.send(id_, m.sender, m.op, MessageKind::put_ack, t);
        break;
      }
      case MessageKind::get: {
        auto it = store_.find(*m.tag);
        if (it != store_.end())
          out.send(id_, m.sender, m.op, MessageKind::get_resp, it->first,
                   Value{it->second});
        // Unknown tags get no reply; readers only contact replicas the
        // directories recorded as holding the tag.
        break;
      }
      default: break;
    }
  }

  Rational storage_units() const override {
    return Rational(static_cast<std::int64_t>(store_.size()));
  }

 private:
  std::string id_;
  std::map<Tag, Bytes> store_;
};

class LdrClient : public ClientNode {
 public:
  LdrClient(std::string id, std::vector<std::string> directory_ids,
            std::vector<std::string> replica_ids, int f)
      : id_(std::move(id)),
        directory_ids_(std::move(directory_ids)),
        replica_ids_(std::move(replica_ids)),
        f_(f),
        dir_majority_(static_cast<int>(directory_ids_.size()) / 2 + 1) {}

  void invoke(const OperationId& op, OpKind kind, const Bytes& value,
              Outbox& out) override {
    op_.emplace();
    op_->id = op;
    op_->kind = kind;
    op_->value = value;
    for (const auto& d : directory_ids_)
      out.send(id_, d, op, MessageKind::get_meta);
  }

  void handle(const Message& m, Outbox& out) override {
    if (!op_ || m.op != op_->id) return;
    switch (m.kind) {
      case MessageKind::get_meta_resp: on_get_meta_resp(m, out); break;
      case MessageKind::put_ack: on_put_ack(m, out); break;
      case MessageKind::put_meta_ack: on_put_meta_ack(m, out); break;
      case MessageKind::get_resp: on_get_resp(m, out); break;
      default: break;
    }
  }

 private:
  struct PendingOp {
    OperationId id;
    OpKind kind = OpKind::write;
    Bytes value;
    enum class Phase { meta_get, data_put, meta_put, data_get } phase = Phase::meta_get;
    std::set<std::string> responders;
    std::vector<std::string> ackers;  // replica acks, in arrival order
    std::optional<Tag> best;
    LocationSet locations;
    Tag tag;
  };

  void on_get_meta_resp(const Message& m, Outbox& out) {
    if (op_->phase != PendingOp::Phase::meta_get) return;
    if (!op_->responders.insert(m.sender).second) return;
    if (!op_->best || *op_->best < *m.tag) {
      op_->best = *m.tag;
      op_->locations = std::get<LocationSet>(m.payload);
    }
    if (static_cast<int>(op_->responders.size()) < dir_majority_) return;
    op_->responders.clear();

    if (op_->kind == OpKind::write) {
      op_->tag = Tag{op_->best->z + 1, id_};
      out.tag_committed = op_->tag;
      op_->phase = PendingOp::Phase::data_put;
      for (int i = 0; i < 2 * f_ + 1; ++i)
        out.send(id_, replica_ids_[static_cast<std::size_t>(i)], op_->id,
                 MessageKind::put, op_->tag, Value{op_->value});
    } else {
      op_->tag = *op_->best;
      out.tag_committed = op_->tag;
      op_->phase = PendingOp::Phase::meta_put;
      for (const auto& d : directory_ids_)
        out.send(id_, d, op_->id, MessageKind::put_meta, op_->tag, op_->locations);
    }
  }

  void on_put_ack(const Message& m, Outbox& out) {
    if (op_->phase != PendingOp::Phase::data_put || *m.tag != op_->tag) return;
    if (std::find(op_->ackers.begin(), op_->ackers.end(), m.sender) != op_->ackers.end())
      return;
    op_->ackers.push_back(m.sender);
    if (static_cast<int>(op_->ackers.size()) < f_ + 1) return;

    // The first f+1 acknowledgers become the tag's recorded location set.
    op_->locations = LocationSet(op_->ackers.begin(), op_->ackers.end());
    op_->phase = PendingOp::Phase::meta_put;
    for (const auto& d : directory_ids_)
      out.send(id_, d, op_->id, MessageKind::put_meta, op_->tag, op_->locations);
  }

  void on_put_meta_ack(const Message& m, Outbox& out) {
    if (op_->phase != PendingOp::Phase::meta_put || *m.tag != op_->tag) return;
    if (!op_->responders.insert(m.sender).second) return;
    if (static_cast<int>(op_->responders.size()) < dir_majority_) return;

    if (op_->kind == OpKind::write) {
      Response r;
      r.op = op_->id;
      r.kind = OpKind::write;
      r.tag = op_->tag;
      out.response = std::move(r);
      op_.reset();
      return;
    }
    // Read: fetch from the f+1 lowest replicas recorded for the tag. Any
    // single copy settles it.
    op_->phase = PendingOp::Phase::data_get;
    for (const auto& r : lowest_locations(op_->locations))
      out.send(id_, r, op_->id, MessageKind::get, op_->tag);
  }

  void on_get_resp(const Message& m, Outbox& out) {
    if (op_->phase != PendingOp::Phase::data_get || *m.tag != op_->tag) return;
    Response r;
    r.op = op_->id;
    r.kind = OpKind::read;
    r.tag = op_->tag;
    r.value = std::get<Value>(m.payload).data;
    out.response = std::move(r);
    op_.reset();
  }

  // The f+1 members of the set that come first in replica order. Ordering
  // by position rather than by name keeps rep2 below rep10.
  std::vector<std::string> lowest_locations(const LocationSet& locs) const {
    std::vector<std::string> sorted(locs.begin(), locs.end());
    auto index_of = [this](const std::string& r) {
      return std::find(replica_ids_.begin(), replica_ids_.end(), r) -
             replica_ids_.begin();
    };
    std::sort(sorted.begin(), sorted.end(),
              [&](const std::string& a, const std::string& b) {
                return index_of(a) < index_of(b);
              });
    sorted.resize(static_cast<std::size_t>(f_ + 1));
    return sorted;
  }

  std::string id_;
  std::vector<std::string> directory_ids_;
  std::vector<std::string> replica_ids_;
  int f_ = 0;
  int dir_majority_ = 0;
  std::optional<PendingOp> op_;
};

}  // namespace casim
