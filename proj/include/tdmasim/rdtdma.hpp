#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tdmasim/rng.hpp"
#include "tdmasim/simcore.hpp"
#include "tdmasim/topology.hpp"
#include "tdmasim/types.hpp"

namespace tdmasim::rdtdma {

enum class State { CS, VS, SS, TS };

std::string to_string(State s);

struct Config {
    int S = 0;                        // frame length (slots); 0 = derive max|N2|+1
    double K = 0.25;                  // dynamic compensation constant, in [1/S, 1]
    int max_attempts = 3;             // REQ transmissions per slot before back to CS
    bool dynamic_probabilities = false;
    bool vs_wait_slot_index = false;  // literal "wait s time units" reading
    Tick tick_budget = 0;             // 0 = default (scales with S)
    std::uint64_t seed = 1;           // node sampling streams
};

// Slot-probability vector, 1-based. Maintains sum == 1 over the non-banned support.
struct ProbVector {
    std::vector<double> p;  // index 0 unused

    explicit ProbVector(int S = 0) : p(S + 1, S > 0 ? 1.0 / S : 0.0) {
        if (S > 0) p[0] = 0.0;
    }
    int S() const { return static_cast<int>(p.size()) - 1; }
    double sum() const;
    void normalize();                       // scale to sum 1; no-op if sum == 0
    void zero_and_redistribute(SlotId s);   // proportional redistribution of p[s]
    void restore_equal_share(SlotId s);     // give s an average share, renormalize
    void one_hot(SlotId s);
    bool is_one_hot(SlotId s) const;
};

// Deferred side effects of a node handler; the simulation flushes them to the engine.
struct Outbox {
    struct Tx {
        Tick at;
        Message msg;
    };
    struct TimerReq {
        Tick at;
        int timer_id;
        std::uint64_t gen;
    };
    std::vector<Tx> txs;
    std::vector<TimerReq> timers;
};

// Timer ids
inline constexpr int kTimerReqTx = 1;
inline constexpr int kTimerGrantTimeout = 2;
inline constexpr int kTimerIndTx = 3;
inline constexpr int kTimerAdvTx = 4;
inline constexpr int kTimerInfoTx = 5;
inline constexpr int kTimerRejectTx = 6;

// Per-node protocol state machine. Pure state transitions: handlers mutate local
// state and queue transmissions/timers on the Outbox; the engine drives them.
class Node {
public:
    Node(NodeId id, const Topology& topo, const Config& cfg);

    // protocol entry point: first contention round
    void start(Tick now, Outbox& out);

    void on_timer(int timer_id, std::uint64_t gen, Tick now, Outbox& out);
    void on_message(const Message& m, Tick now, Outbox& out);

    // Eq.-1 dynamic update from the currently known neighborhood snapshots.
    // Exposed for direct unit testing; called internally on snapshot ingestion.
    void update_probabilities();
    void ingest_snapshot(const ProbSnapshot& snap, bool relayable);

    // observers
    State state() const { return state_; }
    SlotId slot() const { return slot_; }
    SlotId pending_slot() const { return pending_slot_; }
    const ProbVector& probabilities() const { return p_; }
    const std::vector<NodeId>& grant_vector() const { return gv_; }
    const std::vector<std::uint8_t>& occupied_vector() const { return ov_; }
    const std::vector<std::uint8_t>& received_grants() const { return rgv_; }
    const std::vector<std::uint8_t>& ind_vector() const { return indv_; }
    int rounds() const { return rounds_; }
    Tick ss_tick() const { return ss_tick_; }
    const std::optional<std::string>& fault() const { return fault_; }

    // invariant audit (sum/bounds/one-hot/grant-implies-zero); throws SimError
    void check_invariants() const;

private:
    void enter_contention(Tick now, Outbox& out);
    void enter_scheduled(Tick now, Outbox& out);
    void maybe_terminate();
    void transmit(Outbox& out, Tick at, Message m);
    void send_req(Tick now, Outbox& out);
    void queue_reject(SlotId s, NodeId target, Tick now, Outbox& out);
    void ensure_info_flush(Tick now, Outbox& out);
    void ban_slot(SlotId s);
    void process_grant_vector(const std::vector<NodeId>& gv, NodeId sender, Tick now,
                              Outbox& out);
    void process_occupied_vector(const std::vector<std::uint8_t>& ov, NodeId sender);
    void handle_req(const ReqPayload& req, NodeId sender, Tick now, Outbox& out);
    ProbSnapshot own_snapshot() const;
    Tick uniform_wait();  // {0..S-1}

    NodeId id_;
    const Topology& topo_;
    const Config cfg_;
    const std::vector<NodeId>& nbrs_;
    std::vector<NodeId> n2_;
    Rng rng_;

    State state_ = State::CS;
    ProbVector p_;
    std::vector<std::uint8_t> perm_banned_;  // slots left permanently
    std::vector<NodeId> gv_;
    std::vector<std::uint8_t> ov_;
    std::vector<std::uint8_t> rgv_;
    std::vector<std::uint8_t> indv_;
    SlotId pending_slot_ = kNoSlot;
    SlotId slot_ = kNoSlot;
    int attempts_ = 0;
    int rounds_ = 0;
    Tick ss_tick_ = -1;
    Tick ind_interval_ = 0;  // doubles per retransmission, capped at 16*S
    std::optional<std::string> fault_;

    // piggyback freshness: gv/ov changes must be transmitted before TS
    std::uint64_t state_version_ = 0;
    std::uint64_t last_tx_version_ = 0;
    bool info_pending_ = false;
    std::deque<std::pair<SlotId, NodeId>> pending_rejects_;
    bool reject_timer_armed_ = false;

    // timer generations; stale fires are ignored
    std::uint64_t req_gen_ = 0, timeout_gen_ = 0, ind_gen_ = 0, adv_gen_ = 0, info_gen_ = 0,
                  reject_gen_ = 0;

    // dynamic mode: freshest known snapshots of N2 members
    std::uint64_t p_version_ = 0;
    std::map<NodeId, ProbSnapshot> known_;
    std::map<NodeId, ProbSnapshot> relayable_;  // direct neighbors' own snapshots
};

enum class StopMode { AllScheduled, Quiescence };

enum class Phase1Status { Converged, Timeout, Deadlock };

struct Phase1Result {
    Phase1Status status = Phase1Status::Converged;
    Schedule schedule;               // complete iff converged
    Tick convergence_tick = 0;       // when the last node entered SS
    Tick end_tick = 0;
    int rounds_max = 0;
    double rounds_mean = 0.0;
    std::vector<int> rounds_per_node;
    std::vector<State> final_states;
    MessageCounts totals;
    std::vector<MessageCounts> per_node;
    std::string error;
};

// Runs the full Phase-1 contention on a topology. Safety (no two N2 nodes scheduled
// on the same slot) is asserted at every SS entry by an omniscient checker.
class Phase1Sim {
public:
    Phase1Sim(const Topology& topo, Config cfg, ChannelConfig channel);

    Phase1Result run(StopMode stop = StopMode::AllScheduled);

    Engine& engine() { return engine_; }
    int S() const { return cfg_.S; }

private:
    void flush(Outbox& out, NodeId node);
    void assert_safety(NodeId node);

    const Topology& topo_;
    Config cfg_;
    Engine engine_;
    std::vector<Node> nodes_;
    std::optional<std::string> safety_violation_;
};

// Convenience wrapper used by the harness and bindings.
Phase1Result run_phase1(const Topology& topo, Config cfg, ChannelConfig channel,
                        StopMode stop = StopMode::AllScheduled);

}  // namespace tdmasim::rdtdma
