#include "tdmasim/dslr.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "tdmasim/oracle.hpp"

namespace tdmasim::dslr {

namespace {

// blocking strength for merging multiple rules onto one slot
inline int severity(std::uint8_t v) {
    switch (v) {
        case kRvSender: return 3;
        case kRvUnknown: return 2;
        case kRvNonSender: return 1;
        default: return 0;
    }
}

inline void apply_status(std::vector<std::uint8_t>& rv, SlotId s, std::uint8_t v) {
    if (severity(v) > severity(rv[s])) rv[s] = v;
}

}  // namespace

Node::Node(NodeId id, const Topology& topo, SlotId input_slot, int frame_len)
    : id_(id),
      topo_(topo),
      nbrs_(topo.neighbors[id]),
      F_(frame_len),
      slot_(input_slot),
      tx_slot_(input_slot),
      sv_(nbrs_.size(), kNoSlot),
      sv_old_(nbrs_.size(), kNoSlot),
      nrv_(nbrs_.size()),
      ffv_(nbrs_.size(), kNoSlot),
      max_sv_(frame_len + 1, kNoSlot) {
    for (auto& h : heard_) h.assign(nbrs_.size(), 0);
}

bool Node::full_reception() const {
    for (int f = 1; f <= 4; ++f)
        for (std::uint8_t h : heard_[f])
            if (!h) return false;
    return true;
}

bool Node::begin_round() {
    bool moved = false;
    if (ff_ != kNoSlot && max_sv_[ff_] < slot_ && full_reception()) {
        slot_ = ff_;  // move to the first-free slot
        moved = true;
    }
    // keep the last known slot of neighbors that stayed silent this round
    for (std::size_t k = 0; k < nbrs_.size(); ++k)
        if (sv_[k] != kNoSlot) sv_old_[k] = sv_[k];
    std::fill(sv_.begin(), sv_.end(), kNoSlot);
    for (auto& row : nrv_) row.clear();
    std::fill(ffv_.begin(), ffv_.end(), kNoSlot);
    std::fill(max_sv_.begin(), max_sv_.end(), kNoSlot);
    ff_ = kNoSlot;
    for (auto& h : heard_) std::fill(h.begin(), h.end(), 0);
    return moved;
}

std::vector<std::uint8_t> Node::compute_rv() const {
    std::vector<std::uint8_t> rv(F_ + 1, kRvFree);
    // own slot: occupied for everyone within range (a neighbor taking it would
    // collide with this node's transmissions / block its reception)
    apply_status(rv, slot_, kRvSender);
    const auto& senders = topo_.senders[id_];
    for (std::size_t k = 0; k < nbrs_.size(); ++k) {
        NodeId j = nbrs_[k];
        bool is_sender = std::binary_search(senders.begin(), senders.end(), j);
        if (sv_[k] != kNoSlot) {
            apply_status(rv, sv_[k], is_sender ? kRvSender : kRvNonSender);
        } else {
            // silent this round: it may have moved anywhere below its last known
            // slot; with no last known slot, anywhere at all
            SlotId u = sv_old_[k] != kNoSlot ? sv_old_[k] : F_;
            for (SlotId s = 1; s <= u; ++s) apply_status(rv, s, kRvUnknown);
        }
    }
    return rv;
}

SlotId Node::compute_ff() const {
    const auto& receivers = topo_.receivers[id_];
    std::vector<std::uint8_t> all_ones(F_ + 1, 1);
    for (SlotId s = 1; s < slot_; ++s) {
        bool free = true;
        for (std::size_t k = 0; k < nbrs_.size() && free; ++k) {
            const auto& row = heard_[2][k] ? nrv_[k] : all_ones;
            std::uint8_t v = row.empty() ? std::uint8_t(1) : row[s];
            bool is_receiver = std::binary_search(receivers.begin(), receivers.end(), nbrs_[k]);
            if (is_receiver)
                free = v == kRvFree;
            else
                free = v == kRvFree || v == kRvNonSender;
        }
        if (free) return s;
    }
    return kNoSlot;
}

std::vector<std::pair<SlotId, SlotId>> Node::compute_max_free() const {
    std::map<SlotId, SlotId> agg;  // first-free slot -> max holder slot
    auto add = [&agg](SlotId s1, SlotId s2) {
        if (s1 == kNoSlot) return;
        auto [it, inserted] = agg.emplace(s1, s2);
        if (!inserted && s2 > it->second) it->second = s2;
    };
    for (std::size_t k = 0; k < nbrs_.size(); ++k)
        if (heard_[3][k]) add(ffv_[k], sv_[k] != kNoSlot ? sv_[k] : sv_old_[k]);
    add(ff_, slot_);  // own contribution completes the two-hop aggregate
    std::vector<std::pair<SlotId, SlotId>> out(agg.begin(), agg.end());
    return out;
}

std::optional<HelloPayload> Node::build_hello(int frame) {
    HelloPayload p;
    p.frame = frame;
    switch (frame) {
        case 1:
            p.slot = slot_;
            break;
        case 2:
            p.rv = compute_rv();
            break;
        case 3:
            ff_ = compute_ff();
            p.ff = ff_;
            break;
        case 4: {
            // an aggregate that silently omits a contender (missed frame-3 HELLO,
            // or a contender whose slot was never learned) could let two
            // conflicting nodes move together; stay silent instead
            for (std::size_t k = 0; k < heard_[3].size(); ++k) {
                if (!heard_[3][k]) return std::nullopt;
                if (ffv_[k] != kNoSlot && sv_[k] == kNoSlot && sv_old_[k] == kNoSlot)
                    return std::nullopt;
            }
            p.max_free = compute_max_free();
            break;
        }
        default:
            throw SimError("bad HELLO frame");
    }
    return p;
}

void Node::on_hello(NodeId sender, const HelloPayload& p) {
    int k = topo_.order_of(id_, sender);
    heard_[p.frame][k] = 1;
    switch (p.frame) {
        case 1:
            sv_[k] = p.slot;
            break;
        case 2:
            nrv_[k] = p.rv;
            break;
        case 3:
            ffv_[k] = p.ff;
            break;
        case 4:
            for (auto [s1, s2] : p.max_free) {
                if (s2 == slot_) continue;  // own echo (or a harmless equal-slot peer)
                if (s1 < s2 && max_sv_[s1] < s2) max_sv_[s1] = s2;
            }
            break;
        default:
            throw SimError("bad HELLO frame");
    }
}

void Node::force_sv(NodeId j, SlotId s) { sv_[topo_.order_of(id_, j)] = s; }
void Node::force_sv_old(NodeId j, SlotId s) { sv_old_[topo_.order_of(id_, j)] = s; }
void Node::force_nrv(NodeId j, std::vector<std::uint8_t> rv) {
    int k = topo_.order_of(id_, j);
    nrv_[k] = std::move(rv);
    heard_[2][k] = 1;
}
void Node::force_heard(int frame, NodeId j, bool heard) {
    heard_[frame][topo_.order_of(id_, j)] = heard ? 1 : 0;
}

// ---- Phase2Sim -------------------------------------------------------------------

Phase2Sim::Phase2Sim(const Topology& topo, const Schedule& input, Config cfg,
                     ChannelConfig channel)
    : topo_(topo),
      cfg_(cfg),
      engine_(topo, channel),
      ig_(interference_graph(topo)),
      input_(input),
      F_(input.length()),
      diameter_(topo.hop_diameter()) {
    if (input.n() != topo.n) throw SimError("phase2: schedule/topology size mismatch");
    auto rep = oracle::verify_feasible(input, ig_);
    if (!rep.ok) {
        std::ostringstream os;
        os << "phase2: input schedule infeasible;" << " first violation: ("
           << rep.violations[0].first << ',' << rep.violations[0].second << ')';
        throw SimError(os.str());
    }
    nodes_.reserve(topo.n);
    for (NodeId i = 0; i < topo.n; ++i) nodes_.emplace_back(i, topo, input.slot[i], F_);
}

void Phase2Sim::schedule_round_frames(int round_index, Tick base) {
    for (int frame = 1; frame <= 4; ++frame) {
        Tick frame_base = base + static_cast<Tick>(frame - 1) * F_;
        for (NodeId i = 0; i < topo_.n; ++i)
            engine_.schedule_timer(frame_base + nodes_[i].tx_slot() - 1, i, kTimerHelloTx,
                                   static_cast<std::uint64_t>(frame));
    }
    (void)round_index;
}

void Phase2Sim::round_checks(int round, bool lossless) {
    // computed first-free slots must be genuinely free (loss-safety), and on
    // lossless rounds must match the ground-truth scan exactly
    Schedule current(topo_.n);
    for (NodeId i = 0; i < topo_.n; ++i) current.slot[i] = nodes_[i].slot();
    for (NodeId i = 0; i < topo_.n; ++i) {
        SlotId ff = nodes_[i].ff();
        if (ff != kNoSlot && !oracle::slot_free_at(topo_, current, i, ff)) {
            std::ostringstream os;
            os << "round " << round << ": node " << i << " computed non-free FF " << ff;
            throw SimError(os.str());
        }
        if (lossless) {
            SlotId want = oracle::first_free_at(topo_, current, i);
            if (ff != want) {
                std::ostringstream os;
                os << "round " << round << ": node " << i << " FF " << ff
                   << " != oracle first-free " << want;
                throw SimError(os.str());
            }
        }
    }
}

Phase2Result Phase2Sim::run() {
    Phase2Result result;
    result.input = input_;
    RoundStat row0;
    row0.round = 0;
    row0.schedule_length = input_.length();
    row0.schedule = input_;
    result.trajectory.push_back(std::move(row0));

    const int max_rounds = cfg_.to_fixed_point ? cfg_.max_rounds : cfg_.rounds;
    if (max_rounds == 0) {
        result.final_schedule = input_;
        return result;
    }

    Engine::Hooks hooks;
    hooks.on_receive = [this](NodeId receiver, const Message& m, Tick) {
        if (m.kind == MsgKind::Hello) nodes_[receiver].on_hello(m.sender, *m.hello);
    };
    hooks.on_timer = [this](NodeId node, int timer_id, std::uint64_t gen, Tick now) {
        if (timer_id != kTimerHelloTx) return;
        auto payload = nodes_[node].build_hello(static_cast<int>(gen));
        if (payload) engine_.schedule_broadcast(now, make_hello(node, std::move(*payload)));
    };
    engine_.set_hooks(std::move(hooks));

    const Tick round_ticks = static_cast<Tick>(4) * F_;
    long long losses_at_round_start = 0;
    int no_move_streak = 0;

    schedule_round_frames(0, 0);
    for (int r = 1; r <= max_rounds; ++r) {
        Tick boundary = static_cast<Tick>(r) * round_ticks;
        auto res = engine_.run(boundary);  // runs frames and the boundary deliveries
        (void)res;
        bool lossless = engine_.losses() == losses_at_round_start;
        losses_at_round_start = engine_.losses();

        if (cfg_.verify) round_checks(r, lossless);

        // execute moves; each node's decision reads only its own state
        int moves = 0;
        std::vector<std::pair<NodeId, SlotId>> movers;
        for (NodeId i = 0; i < topo_.n; ++i) {
            SlotId before = nodes_[i].slot();
            if (nodes_[i].begin_round()) {
                ++moves;
                movers.emplace_back(i, nodes_[i].slot());
                if (nodes_[i].slot() >= before)
                    throw SimError("phase2: node moved to a non-smaller slot");
            }
        }
        // no two conflicting nodes may move to the same slot in one round
        for (std::size_t a = 0; a < movers.size(); ++a)
            for (std::size_t b = a + 1; b < movers.size(); ++b)
                if (movers[a].second == movers[b].second &&
                    ig_.has_edge(movers[a].first, movers[b].first)) {
                    std::ostringstream os;
                    os << "round " << r << ": conflicting nodes " << movers[a].first << " and "
                       << movers[b].first << " both moved to slot " << movers[a].second;
                    throw SimError(os.str());
                }

        RoundStat row;
        row.round = r;
        row.moves = moves;
        row.lossless = lossless;
        row.schedule = Schedule(topo_.n);
        for (NodeId i = 0; i < topo_.n; ++i) row.schedule.slot[i] = nodes_[i].slot();
        row.schedule_length = row.schedule.length();

        if (cfg_.verify) {
            auto rep = oracle::verify_feasible(row.schedule, ig_);
            if (!rep.ok) {
                std::ostringstream os;
                os << "round " << r << ": schedule infeasible after moves; first violation ("
                   << rep.violations[0].first << ',' << rep.violations[0].second << ')';
                throw SimError(os.str());
            }
            if (row.schedule_length > result.trajectory.back().schedule_length)
                throw SimError("phase2: schedule length increased");
        }
        result.trajectory.push_back(row);
        result.rounds_run = r;

        if (moves == 0 && lossless)
            ++no_move_streak;
        else
            no_move_streak = 0;
        if (!result.fixed_point_round && no_move_streak >= diameter_ + 1)
            result.fixed_point_round = r;
        if (cfg_.to_fixed_point && result.fixed_point_round) break;

        if (r < max_rounds) schedule_round_frames(r, boundary);
    }

    result.final_schedule = result.trajectory.back().schedule;
    return result;
}

Phase2Result run_phase2(const Topology& topo, const Schedule& input, Config cfg,
                        ChannelConfig channel) {
    Phase2Sim sim(topo, input, cfg, channel);
    return sim.run();
}

}  // namespace tdmasim::dslr
