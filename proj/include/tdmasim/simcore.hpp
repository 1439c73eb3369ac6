#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <variant>
#include <vector>

#include "tdmasim/rng.hpp"
#include "tdmasim/topology.hpp"
#include "tdmasim/types.hpp"

namespace tdmasim {

// ---- messages ------------------------------------------------------------------

enum class MsgKind { Req, Ind, Reject, Adv, Hello };

std::string to_string(MsgKind k);

// Slot-probability snapshot shared in dynamic mode; version is the owner's
// monotone change counter so relays can keep only the freshest copy.
struct ProbSnapshot {
    NodeId owner = kNoNode;
    std::uint64_t version = 0;
    std::vector<double> p;  // index 1..S, [0] unused
};

// REQ doubles as the grant/occupancy carrier: slot == 0 means no slot is being
// requested and the message only piggybacks gv/ov (and the P snapshot).
struct ReqPayload {
    SlotId slot = kNoSlot;
    std::vector<NodeId> gv;        // index 1..S; kNoNode = not granted
    std::vector<std::uint8_t> ov;  // index 1..S
    std::optional<ProbSnapshot> p;
};

struct IndPayload {
    SlotId slot = kNoSlot;         // the slot the sender scheduled itself on
    std::vector<NodeId> gv;
    std::vector<std::uint8_t> ov;
};

struct RejectPayload {
    SlotId slot = kNoSlot;
    NodeId target = kNoNode;       // addressed; others ignore the reject itself
    std::vector<NodeId> gv;
    std::vector<std::uint8_t> ov;
};

struct AdvPayload {
    ProbSnapshot own;
    std::vector<ProbSnapshot> relayed;  // freshest direct-neighbor snapshots
};

// DSLR four-frame round HELLO; exactly one field is meaningful per frame.
struct HelloPayload {
    int frame = 0;                                   // 1..4
    SlotId slot = kNoSlot;                           // frame 1
    std::vector<std::uint8_t> rv;                    // frame 2, index 1..F
    SlotId ff = kNoSlot;                             // frame 3
    std::vector<std::pair<SlotId, SlotId>> max_free; // frame 4: (first-free, max slot)
};

struct Message {
    MsgKind kind = MsgKind::Req;
    NodeId sender = kNoNode;
    Tick tx_time = 0;
    std::shared_ptr<const ReqPayload> req;
    std::shared_ptr<const IndPayload> ind;
    std::shared_ptr<const RejectPayload> reject;
    std::shared_ptr<const AdvPayload> adv;
    std::shared_ptr<const HelloPayload> hello;
};

Message make_req(NodeId sender, ReqPayload p);
Message make_ind(NodeId sender, IndPayload p);
Message make_reject(NodeId sender, RejectPayload p);
Message make_adv(NodeId sender, AdvPayload p);
Message make_hello(NodeId sender, HelloPayload p);

// ---- channel -------------------------------------------------------------------

struct ChannelConfig {
    double per = 0.0;               // packet error rate, i.i.d. per (message, receiver)
    bool collisions_enabled = true;
    std::uint64_t seed = 1;
};

struct TraceEntry {
    Tick tick = 0;               // transmission tick
    MsgKind kind = MsgKind::Req;
    NodeId sender = kNoNode;
    std::vector<NodeId> delivered;
    std::vector<NodeId> lost;

    std::string line() const;    // "tick kind sender delivered lost"
};

struct MessageCounts {
    long long req = 0;       // REQ with a slot request
    long long carrier = 0;   // REQ with no slot (grant/occupancy carrier)
    long long ind = 0;
    long long reject = 0;
    long long adv = 0;
    long long hello = 0;
    long long total() const { return req + carrier + ind + reject + adv + hello; }
};

// ---- engine ----------------------------------------------------------------------

// Deterministic single-threaded engine. Per tick: (1) deliver receptions from the
// previous tick's transmissions, (2) fire timers, (3) resolve this tick's
// transmissions against the loss/collision channel. All same-tick processing is
// ordered by (node id, schedule sequence) so reruns are identical.
class Engine {
public:
    struct Hooks {
        std::function<void(NodeId receiver, const Message&, Tick)> on_receive;
        std::function<void(NodeId node, int timer_id, std::uint64_t gen, Tick)> on_timer;
        std::function<bool(Tick)> on_tick_end;  // return true to stop the run
    };

    Engine(const Topology& topo, ChannelConfig cfg);

    void set_hooks(Hooks h) { hooks_ = std::move(h); }
    void enable_trace(bool on) { trace_enabled_ = on; }

    // Test hook: force-drop a (sender -> receiver) reception at a given tick.
    using DropFn = std::function<bool(Tick, NodeId sender, NodeId receiver)>;
    void set_drop_hook(DropFn fn) { drop_hook_ = std::move(fn); }

    Tick now() const { return now_; }

    void schedule_timer(Tick at, NodeId node, int timer_id, std::uint64_t gen = 0);
    void schedule_broadcast(Tick at, Message m);

    struct RunResult {
        Tick end_tick = 0;
        bool quiescent = false;   // queue drained
        bool stopped = false;     // stop predicate fired
        bool budget_hit = false;  // `until` reached with events pending
    };

    RunResult run(std::optional<Tick> until = std::nullopt);

    const std::vector<TraceEntry>& trace() const { return trace_; }
    const std::vector<MessageCounts>& counts() const { return counts_; }
    long long losses() const { return losses_; }
    long long deliveries() const { return deliveries_; }

private:
    struct TimerEv {
        Tick tick;
        NodeId node;
        int timer_id;
        std::uint64_t gen;
        std::uint64_t seq;
    };
    struct TxEv {
        Tick tick;
        Message msg;
        std::uint64_t seq;
    };

    void resolve_transmissions(Tick t);

    const Topology& topo_;
    ChannelConfig cfg_;
    Rng channel_rng_;
    Hooks hooks_;
    DropFn drop_hook_;
    Tick now_ = 0;
    std::uint64_t seq_ = 0;
    bool trace_enabled_ = false;

    // keyed (tick, node, seq) / (tick, sender, seq)
    std::map<std::tuple<Tick, NodeId, std::uint64_t>, TimerEv> timers_;
    std::map<std::tuple<Tick, NodeId, std::uint64_t>, TxEv> txs_;
    // receptions for the *next* tick, ordered (receiver, sender, seq)
    std::map<std::tuple<Tick, NodeId, NodeId, std::uint64_t>, Message> rxs_;

    std::vector<TraceEntry> trace_;
    std::vector<MessageCounts> counts_;
    long long losses_ = 0;
    long long deliveries_ = 0;
};

}  // namespace tdmasim
