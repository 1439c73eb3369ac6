#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tdmasim/simcore.hpp"
#include "tdmasim/topology.hpp"
#include "tdmasim/types.hpp"

namespace tdmasim::dslr {

inline constexpr int kTimerHelloTx = 11;    // gen encodes the frame (1..4)
inline constexpr int kTimerRoundStart = 12; // controller boundary

// Slot occupancy status as exchanged in frame-2 HELLOs:
//   0 free for all of N_i, 1 occupied by a sender (blocks everyone),
//   2 occupied by a non-sender neighbor (blocks senders only), 3 unknown.
// Blocking strength: 1 > 3 > 2 > 0.
enum : std::uint8_t { kRvFree = 0, kRvSender = 1, kRvNonSender = 2, kRvUnknown = 3 };

struct Config {
    int rounds = 40;             // frame-exchange rounds to execute
    bool to_fixed_point = false; // stop once no node moved for diameter+1 lossless rounds
    int max_rounds = 2000;       // cap for fixed-point mode
    bool verify = true;          // per-round oracle checks (feasibility, freeness)
};

// Per-node round state. Handlers only read/write local fields; the exchange runs
// through the broadcast channel.
class Node {
public:
    Node(NodeId id, const Topology& topo, SlotId input_slot, int frame_len);

    // Round boundary: execute the pending move (if the guard and full-reception
    // gate allow it), snapshot sv into sv_old, and reset per-round state.
    // Returns true when the node moved.
    bool begin_round();

    // Frame payload construction at transmission time. Frame 4 is withheld when
    // any neighbor's frame-3 HELLO was missed (the aggregate would be misleading).
    std::optional<HelloPayload> build_hello(int frame);

    void on_hello(NodeId sender, const HelloPayload& p);

    // Frame preparation steps; exposed for unit tests.
    std::vector<std::uint8_t> compute_rv() const;
    SlotId compute_ff() const;
    std::vector<std::pair<SlotId, SlotId>> compute_max_free() const;

    SlotId slot() const { return slot_; }
    SlotId tx_slot() const { return tx_slot_; }
    SlotId ff() const { return ff_; }
    SlotId max_sv(SlotId s) const { return max_sv_[s]; }
    bool full_reception() const;

    // test hooks
    void force_sv(NodeId j, SlotId s);
    void force_sv_old(NodeId j, SlotId s);
    void force_nrv(NodeId j, std::vector<std::uint8_t> rv);
    void force_heard(int frame, NodeId j, bool heard);
    void force_ff(SlotId s) { ff_ = s; }
    void force_max_sv(SlotId s1, SlotId s2) { max_sv_[s1] = s2; }

private:
    NodeId id_;
    const Topology& topo_;
    const std::vector<NodeId>& nbrs_;
    int F_;

    SlotId slot_;     // logical slot, only ever decreases
    SlotId tx_slot_;  // physical transmission slot, fixed by the input schedule

    std::vector<SlotId> sv_, sv_old_;            // per neighbor (order index)
    std::vector<std::vector<std::uint8_t>> nrv_; // per neighbor, index 1..F
    std::vector<SlotId> ffv_;                    // per neighbor
    std::vector<SlotId> max_sv_;                 // index 1..F
    SlotId ff_ = kNoSlot;
    std::vector<std::uint8_t> heard_[5];         // frames 1..4, per neighbor
};

struct RoundStat {
    int round = 0;
    SlotId schedule_length = 0;
    int moves = 0;
    bool lossless = true;
    Schedule schedule;
};

struct Phase2Result {
    Schedule input;
    Schedule final_schedule;
    std::vector<RoundStat> trajectory;  // row 0 = input
    int rounds_run = 0;
    std::optional<int> fixed_point_round;  // set when the no-move streak was reached
    bool feasible_every_round = true;      // violations throw; kept for reporting
};

class Phase2Sim {
public:
    Phase2Sim(const Topology& topo, const Schedule& input, Config cfg, ChannelConfig channel);

    Phase2Result run();

    Engine& engine() { return engine_; }

private:
    void schedule_round_frames(int round_index, Tick base);
    void round_checks(int round, bool lossless);

    const Topology& topo_;
    Config cfg_;
    Engine engine_;
    InterferenceGraph ig_;
    std::vector<Node> nodes_;
    Schedule input_;
    int F_;
    int diameter_;
};

Phase2Result run_phase2(const Topology& topo, const Schedule& input, Config cfg,
                        ChannelConfig channel);

}  // namespace tdmasim::dslr
