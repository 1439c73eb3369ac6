#include "tdmasim/rdtdma.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tdmasim::rdtdma {

namespace {
constexpr double kOneHotEps = 1e-12;
constexpr double kSumTol = 1e-9;
}  // namespace

std::string to_string(State s) {
    switch (s) {
        case State::CS: return "CS";
        case State::VS: return "VS";
        case State::SS: return "SS";
        case State::TS: return "TS";
    }
    return "?";
}

// ---- ProbVector -----------------------------------------------------------------

double ProbVector::sum() const {
    double t = 0.0;
    for (int s = 1; s <= S(); ++s) t += p[s];
    return t;
}

void ProbVector::normalize() {
    double t = sum();
    if (t <= 0.0) return;
    for (int s = 1; s <= S(); ++s) p[s] /= t;
}

void ProbVector::zero_and_redistribute(SlotId s) {
    if (p[s] == 0.0) return;
    p[s] = 0.0;
    normalize();  // proportional redistribution over the remaining support
}

void ProbVector::restore_equal_share(SlotId s) {
    int nonzero = 0;
    for (int u = 1; u <= S(); ++u)
        if (p[u] > 0.0) ++nonzero;
    p[s] = 1.0 / (nonzero + 1);
    normalize();
}

void ProbVector::one_hot(SlotId s) {
    std::fill(p.begin(), p.end(), 0.0);
    p[s] = 1.0;
}

bool ProbVector::is_one_hot(SlotId s) const {
    if (std::fabs(p[s] - 1.0) > kOneHotEps) return false;
    for (int u = 1; u <= S(); ++u)
        if (u != s && p[u] != 0.0) return false;
    return true;
}

// ---- Node -------------------------------------------------------------------------

Node::Node(NodeId id, const Topology& topo, const Config& cfg)
    : id_(id),
      topo_(topo),
      cfg_(cfg),
      nbrs_(topo.neighbors[id]),
      n2_(topo.two_hop(id)),
      rng_(derive_seed(cfg.seed, "node", static_cast<std::uint64_t>(id))),
      p_(cfg.S),
      perm_banned_(cfg.S + 1, 0),
      gv_(cfg.S + 1, kNoNode),
      ov_(cfg.S + 1, 0),
      rgv_(nbrs_.size(), 0),
      indv_(nbrs_.size(), 0) {}

Tick Node::uniform_wait() { return static_cast<Tick>(rng_.below(cfg_.S)); }

void Node::transmit(Outbox& out, Tick at, Message m) {
    out.txs.push_back({at, std::move(m)});
}

void Node::start(Tick now, Outbox& out) {
    if (cfg_.dynamic_probabilities) {
        adv_gen_++;
        out.timers.push_back({now + 1 + uniform_wait(), kTimerAdvTx, adv_gen_});
    }
    enter_contention(now, out);
    check_invariants();
}

void Node::enter_contention(Tick now, Outbox& out) {
    state_ = State::CS;
    pending_slot_ = kNoSlot;
    attempts_ = 0;
    std::fill(rgv_.begin(), rgv_.end(), 0);

    // slot selection per the current probability distribution (t_CS = 0 ticks)
    int idx = rng_.categorical(p_.p);
    if (idx <= 0) {
        fault_ = "no selectable slot left (S too small for this neighborhood)";
        return;
    }
    ++rounds_;
    pending_slot_ = idx;
    state_ = State::VS;
    Tick wait = cfg_.vs_wait_slot_index ? static_cast<Tick>(pending_slot_) : uniform_wait();
    ++req_gen_;
    out.timers.push_back({now + wait, kTimerReqTx, req_gen_});
}

void Node::send_req(Tick now, Outbox& out) {
    ReqPayload req;
    req.slot = pending_slot_;
    req.gv = gv_;
    req.ov = ov_;
    if (cfg_.dynamic_probabilities) req.p = own_snapshot();
    ++attempts_;
    Message m = make_req(id_, std::move(req));
    last_tx_version_ = state_version_;
    transmit(out, now, std::move(m));
    if (nbrs_.empty()) {
        // vacuous grant set
        enter_scheduled(now, out);
        return;
    }
    ++timeout_gen_;
    out.timers.push_back({now + 1 + cfg_.S, kTimerGrantTimeout, timeout_gen_});
}

void Node::enter_scheduled(Tick now, Outbox& out) {
    state_ = State::SS;
    slot_ = pending_slot_;
    pending_slot_ = kNoSlot;
    ss_tick_ = now;
    p_.one_hot(slot_);
    ++p_version_;
    if (!ov_[slot_]) {
        ov_[slot_] = 1;  // own occupancy, piggybacked from now on
        ++state_version_;
    }
    // first indication goes out quickly; retransmissions back off exponentially so
    // steady-state announcement traffic cannot drown the remaining contention
    ind_interval_ = cfg_.S;
    ++ind_gen_;
    out.timers.push_back({now + uniform_wait(), kTimerIndTx, ind_gen_});
    ++adv_gen_;  // no more advertisements
    maybe_terminate();
}

void Node::maybe_terminate() {
    if (state_ != State::SS) return;
    for (std::uint8_t b : indv_)
        if (!b) return;
    if (last_tx_version_ != state_version_) return;  // piggyback state not yet flushed
    state_ = State::TS;
    // invalidate all pending transmissions/timers
    ++req_gen_;
    ++timeout_gen_;
    ++ind_gen_;
    ++adv_gen_;
    ++info_gen_;
    ++reject_gen_;
}

void Node::ensure_info_flush(Tick now, Outbox& out) {
    if (info_pending_ || state_ == State::TS) return;
    info_pending_ = true;
    ++info_gen_;
    out.timers.push_back({now + uniform_wait(), kTimerInfoTx, info_gen_});
}

void Node::ban_slot(SlotId s) {
    if (perm_banned_[s]) return;
    perm_banned_[s] = 1;
    if (state_ == State::SS || state_ == State::TS) return;  // p is one-hot already
    if (p_.p[s] > 0.0) {
        p_.zero_and_redistribute(s);
        ++p_version_;
    }
}

void Node::queue_reject(SlotId s, NodeId target, Tick now, Outbox& out) {
    pending_rejects_.emplace_back(s, target);
    if (!reject_timer_armed_) {
        reject_timer_armed_ = true;
        ++reject_gen_;
        out.timers.push_back({now + uniform_wait(), kTimerRejectTx, reject_gen_});
    }
}

ProbSnapshot Node::own_snapshot() const { return ProbSnapshot{id_, p_version_, p_.p}; }

void Node::ingest_snapshot(const ProbSnapshot& snap, bool relayable) {
    if (!cfg_.dynamic_probabilities || snap.owner == id_) return;
    bool in_n2 = std::binary_search(n2_.begin(), n2_.end(), snap.owner);
    if (relayable) {
        auto it = relayable_.find(snap.owner);
        if (it == relayable_.end() || it->second.version < snap.version)
            relayable_[snap.owner] = snap;
    }
    if (!in_n2) return;
    auto it = known_.find(snap.owner);
    if (it == known_.end() || it->second.version < snap.version) known_[snap.owner] = snap;
}

void Node::update_probabilities() {
    if (!cfg_.dynamic_probabilities) return;
    if (state_ == State::SS || state_ == State::TS) return;
    const int S = cfg_.S;
    const double uniform = 1.0 / S;

    // sum of known N2 slot-probabilities; unheard members count as uniform
    std::vector<double> nbr_sum(S + 1, 0.0);
    std::vector<std::uint8_t> taken(S + 1, 0);
    for (NodeId j : n2_) {
        auto it = known_.find(j);
        if (it == known_.end()) {
            for (int s = 1; s <= S; ++s) nbr_sum[s] += uniform;
            continue;
        }
        const auto& q = it->second.p;
        for (int s = 1; s <= S; ++s) {
            nbr_sum[s] += q[s];
            if (q[s] >= 1.0 - kOneHotEps) taken[s] = 1;
        }
    }

    ProbVector next = p_;
    for (int s = 1; s <= S; ++s) {
        if (perm_banned_[s] || gv_[s] != kNoNode || taken[s]) {
            next.p[s] = 0.0;
            continue;
        }
        double budget = 1.0 - (nbr_sum[s] + p_.p[s]);
        next.p[s] = std::clamp(p_.p[s] + cfg_.K * budget, 0.0, 1.0);
    }
    if (next.sum() <= 0.0) {
        // compensation drove everything to zero; fall back to uniform over the
        // still-eligible support rather than leaving the node stuck
        int eligible = 0;
        for (int s = 1; s <= S; ++s)
            if (!perm_banned_[s] && gv_[s] == kNoNode && !taken[s]) ++eligible;
        if (eligible == 0) return;  // surfaces as a deadlock fault at next CS entry
        for (int s = 1; s <= S; ++s)
            next.p[s] = (!perm_banned_[s] && gv_[s] == kNoNode && !taken[s])
                            ? 1.0 / eligible
                            : 0.0;
    }
    next.normalize();
    bool changed = false;
    for (int s = 1; s <= S; ++s)
        if (std::fabs(next.p[s] - p_.p[s]) > 1e-15) changed = true;
    if (changed) {
        p_ = next;
        ++p_version_;
    }
}

void Node::process_grant_vector(const std::vector<NodeId>& gv, NodeId sender, Tick now,
                                Outbox& out) {
    if (state_ != State::VS || pending_slot_ == kNoSlot) return;
    if (gv[pending_slot_] != id_) return;
    int k = topo_.order_of(id_, sender);
    if (rgv_[k]) return;
    rgv_[k] = 1;
    for (std::uint8_t b : rgv_)
        if (!b) return;
    enter_scheduled(now, out);  // grants complete
}

void Node::process_occupied_vector(const std::vector<std::uint8_t>& ov, NodeId sender) {
    for (int s = 1; s <= cfg_.S; ++s) {
        if (!ov[s]) continue;
        if (state_ == State::SS && s == slot_) {
            // the sender demonstrably knows our slot is taken
            indv_[topo_.order_of(id_, sender)] = 1;
            continue;
        }
        ban_slot(s);
    }
}

void Node::handle_req(const ReqPayload& req, NodeId sender, Tick now, Outbox& out) {
    const SlotId u = req.slot;

    // a request for u revokes any other slot previously granted to this sender
    for (int s = 1; s <= cfg_.S; ++s) {
        if (gv_[s] != sender || s == u) continue;
        gv_[s] = kNoNode;
        ++state_version_;
        if (!perm_banned_[s] && (state_ == State::CS || state_ == State::VS)) {
            p_.restore_equal_share(s);
            ++p_version_;
        }
    }
    if (u == kNoSlot) return;  // pure grant/occupancy carrier

    if (gv_[u] == sender) {
        // duplicate request for an already granted slot: ignored, but the grant
        // information evidently has not arrived, so flush it again
        ensure_info_flush(now, out);
        return;
    }
    const bool self_scheduled_on_u = (state_ == State::SS || state_ == State::TS) && slot_ == u;
    const bool contending_for_u = state_ == State::VS && pending_slot_ == u;
    if (self_scheduled_on_u || contending_for_u || gv_[u] != kNoNode) {
        queue_reject(u, sender, now, out);
        return;
    }
    // grant: record it, leave the slot temporarily, and make sure it gets delivered
    gv_[u] = sender;
    ++state_version_;
    if ((state_ == State::CS || state_ == State::VS) && p_.p[u] > 0.0) {
        p_.zero_and_redistribute(u);
        ++p_version_;
    }
    ensure_info_flush(now, out);
}

void Node::on_message(const Message& m, Tick now, Outbox& out) {
    if (state_ == State::TS) return;  // terminated nodes ignore (and send) nothing
    const NodeId sender = m.sender;
    bool snapshots_seen = false;

    switch (m.kind) {
        case MsgKind::Req: {
            const auto& req = *m.req;
            process_grant_vector(req.gv, sender, now, out);
            if (state_ == State::TS) break;
            process_occupied_vector(req.ov, sender);
            if (req.p) {
                ingest_snapshot(*req.p, true);
                snapshots_seen = true;
            }
            handle_req(req, sender, now, out);
            break;
        }
        case MsgKind::Ind: {
            const auto& ind = *m.ind;
            if (state_ == State::SS && ind.slot == slot_)
                throw SimError("protocol violation: IND received for own scheduled slot");
            process_grant_vector(ind.gv, sender, now, out);
            if (state_ == State::TS) break;
            if (!ov_[ind.slot]) {
                ov_[ind.slot] = 1;  // direct indication: occupancy is now relayable
                ++state_version_;
            }
            ban_slot(ind.slot);
            process_occupied_vector(ind.ov, sender);
            if (cfg_.dynamic_probabilities) {
                // an IND is a one-hot snapshot in disguise
                ProbSnapshot snap;
                snap.owner = sender;
                snap.version = UINT64_MAX;  // final state, never superseded
                snap.p.assign(cfg_.S + 1, 0.0);
                snap.p[ind.slot] = 1.0;
                ingest_snapshot(snap, true);
                snapshots_seen = true;
            }
            ensure_info_flush(now, out);
            break;
        }
        case MsgKind::Reject: {
            const auto& rej = *m.reject;
            process_grant_vector(rej.gv, sender, now, out);
            if (state_ == State::TS) break;
            process_occupied_vector(rej.ov, sender);
            if (rej.target == id_ && state_ == State::VS && rej.slot == pending_slot_)
                enter_contention(now, out);  // leave the slot, try again
            break;
        }
        case MsgKind::Adv: {
            const auto& adv = *m.adv;
            ingest_snapshot(adv.own, true);
            for (const auto& snap : adv.relayed) ingest_snapshot(snap, false);
            snapshots_seen = true;
            break;
        }
        case MsgKind::Hello:
            break;  // phase-2 traffic, not ours
    }

    if (snapshots_seen) update_probabilities();
    maybe_terminate();
    check_invariants();
}

void Node::on_timer(int timer_id, std::uint64_t gen, Tick now, Outbox& out) {
    switch (timer_id) {
        case kTimerReqTx:
            if (gen != req_gen_ || state_ != State::VS) return;
            send_req(now, out);
            break;
        case kTimerGrantTimeout: {
            if (gen != timeout_gen_ || state_ != State::VS) return;
#ifdef TDMASIM_DEBUG_TIMEOUTS
            {
                std::string missing;
                for (std::size_t k = 0; k < rgv_.size(); ++k)
                    if (!rgv_[k]) missing += " " + std::to_string(nbrs_[k]);
                std::fprintf(stderr, "t=%lld node %d timeout pending=%d attempt=%d missing:%s\n",
                             (long long)now, id_, pending_slot_, attempts_, missing.c_str());
            }
#endif
            // partial (or no) grants within the window
            if (attempts_ >= cfg_.max_attempts) {
                enter_contention(now, out);
            } else {
                ++req_gen_;
                out.timers.push_back({now + uniform_wait(), kTimerReqTx, req_gen_});
            }
            break;
        }
        case kTimerIndTx: {
            if (gen != ind_gen_ || state_ != State::SS) return;
            IndPayload ind;
            ind.slot = slot_;
            ind.gv = gv_;
            ind.ov = ov_;
            last_tx_version_ = state_version_;
            transmit(out, now, make_ind(id_, std::move(ind)));
            ++ind_gen_;
            out.timers.push_back({now + ind_interval_ + uniform_wait(), kTimerIndTx, ind_gen_});
            ind_interval_ = std::min<Tick>(ind_interval_ * 2, 16 * cfg_.S);
            maybe_terminate();
            break;
        }
        case kTimerAdvTx: {
            if (gen != adv_gen_) return;
            if (!cfg_.dynamic_probabilities || (state_ != State::CS && state_ != State::VS))
                return;
            AdvPayload adv;
            adv.own = own_snapshot();
            adv.relayed.reserve(relayable_.size());
            for (const auto& [owner, snap] : relayable_) adv.relayed.push_back(snap);
            transmit(out, now, make_adv(id_, std::move(adv)));
            out.timers.push_back({now + cfg_.S, kTimerAdvTx, adv_gen_});
            break;
        }
        case kTimerInfoTx: {
            if (gen != info_gen_) return;
            info_pending_ = false;
            if (state_ == State::TS) return;
            if (last_tx_version_ == state_version_) return;  // already conveyed
            ReqPayload req;  // carrier: no slot requested
            req.gv = gv_;
            req.ov = ov_;
            if (cfg_.dynamic_probabilities) req.p = own_snapshot();
            last_tx_version_ = state_version_;
            transmit(out, now, make_req(id_, std::move(req)));
            maybe_terminate();
            break;
        }
        case kTimerRejectTx: {
            if (gen != reject_gen_) return;
            reject_timer_armed_ = false;
            if (pending_rejects_.empty() || state_ == State::TS) return;
            auto [s, target] = pending_rejects_.front();
            pending_rejects_.pop_front();
            RejectPayload rej;
            rej.slot = s;
            rej.target = target;
            rej.gv = gv_;
            rej.ov = ov_;
            last_tx_version_ = state_version_;
            transmit(out, now, make_reject(id_, std::move(rej)));
            if (!pending_rejects_.empty()) {
                reject_timer_armed_ = true;
                ++reject_gen_;
                out.timers.push_back({now + 1 + uniform_wait(), kTimerRejectTx, reject_gen_});
            }
            maybe_terminate();
            break;
        }
        default:
            throw SimError("unknown timer id");
    }
    check_invariants();
}

void Node::check_invariants() const {
    if (fault_) return;
    const int S = cfg_.S;
    for (int s = 1; s <= S; ++s) {
        if (p_.p[s] < -kSumTol || p_.p[s] > 1.0 + kSumTol)
            throw SimError("probability out of [0,1]");
        if (gv_[s] != kNoNode && p_.p[s] != 0.0)
            throw SimError("granted slot must carry zero probability");
        if (perm_banned_[s] && p_.p[s] != 0.0 && !(state_ == State::SS || state_ == State::TS))
            throw SimError("banned slot must carry zero probability");
    }
    if (state_ == State::SS || state_ == State::TS) {
        if (slot_ == kNoSlot || !p_.is_one_hot(slot_))
            throw SimError("scheduled node must hold a one-hot probability vector");
        if (state_ == State::TS)
            for (std::uint8_t b : indv_)
                if (!b) throw SimError("TS requires a complete indV");
    } else {
        if (std::fabs(p_.sum() - 1.0) > kSumTol)
            throw SimError("slot probabilities must sum to 1");
    }
}

// ---- Phase1Sim ----------------------------------------------------------------------

Phase1Sim::Phase1Sim(const Topology& topo, Config cfg, ChannelConfig channel)
    : topo_(topo), cfg_(cfg), engine_(topo, channel) {
    if (cfg_.S <= 0) cfg_.S = topo.max_two_hop_degree() + 1;
    cfg_.K = std::clamp(cfg_.K, 1.0 / cfg_.S, 1.0);
    if (cfg_.max_attempts < 1) throw SimError("rdtdma: max_attempts must be >= 1");
    if (cfg_.tick_budget <= 0)
        cfg_.tick_budget = static_cast<Tick>(4000) * cfg_.S + 20000;
    nodes_.reserve(topo.n);
    for (NodeId i = 0; i < topo.n; ++i) nodes_.emplace_back(i, topo, cfg_);
}

void Phase1Sim::flush(Outbox& out, NodeId node) {
    for (auto& t : out.timers) engine_.schedule_timer(t.at, node, t.timer_id, t.gen);
    for (auto& tx : out.txs) engine_.schedule_broadcast(tx.at, std::move(tx.msg));
    out.timers.clear();
    out.txs.clear();
}

void Phase1Sim::assert_safety(NodeId node) {
    // Theorem-1 checker: freshly scheduled node conflicts with no scheduled N2 member
    if (nodes_[node].state() != State::SS) return;
    for (NodeId j : topo_.two_hop(node)) {
        const auto& other = nodes_[j];
        if ((other.state() == State::SS || other.state() == State::TS) &&
            other.slot() == nodes_[node].slot()) {
            std::ostringstream os;
            os << "safety violation: nodes " << node << " and " << j
               << " both scheduled on slot " << nodes_[node].slot();
            safety_violation_ = os.str();
        }
    }
}

Phase1Result Phase1Sim::run(StopMode stop) {
    Engine::Hooks hooks;
    hooks.on_receive = [this](NodeId receiver, const Message& m, Tick now) {
        Outbox out;
        State before = nodes_[receiver].state();
        nodes_[receiver].on_message(m, now, out);
        flush(out, receiver);
        if (before != State::SS && nodes_[receiver].state() == State::SS)
            assert_safety(receiver);
    };
    hooks.on_timer = [this](NodeId node, int timer_id, std::uint64_t gen, Tick now) {
        Outbox out;
        State before = nodes_[node].state();
        nodes_[node].on_timer(timer_id, gen, now, out);
        flush(out, node);
        if (before != State::SS && nodes_[node].state() == State::SS) assert_safety(node);
    };
    bool all_scheduled = false;
    hooks.on_tick_end = [this, stop, &all_scheduled](Tick) {
        if (safety_violation_) return true;
        bool done = true;
        bool fault = false;
        for (const auto& n : nodes_) {
            if (n.fault()) fault = true;
            if (n.state() != State::SS && n.state() != State::TS) done = false;
        }
        all_scheduled = done;
        if (fault) return true;
        return stop == StopMode::AllScheduled ? done : false;
    };
    engine_.set_hooks(std::move(hooks));

    Outbox out;
    for (NodeId i = 0; i < topo_.n; ++i) {
        nodes_[i].start(0, out);
        flush(out, i);
    }
    // a lone node can be scheduled before the first event fires
    auto res = engine_.run(cfg_.tick_budget);

    if (safety_violation_) throw SimError(*safety_violation_);

    Phase1Result r;
    r.end_tick = res.end_tick;
    r.schedule = Schedule(topo_.n);
    r.rounds_per_node.resize(topo_.n);
    r.final_states.resize(topo_.n);
    r.per_node = engine_.counts();
    double rounds_sum = 0.0;
    bool fault = false;
    std::string fault_msg;
    all_scheduled = true;
    for (NodeId i = 0; i < topo_.n; ++i) {
        const auto& n = nodes_[i];
        r.schedule.slot[i] = n.slot();
        r.rounds_per_node[i] = n.rounds();
        r.final_states[i] = n.state();
        r.rounds_max = std::max(r.rounds_max, n.rounds());
        rounds_sum += n.rounds();
        r.convergence_tick = std::max(r.convergence_tick, n.ss_tick());
        if (n.fault()) {
            fault = true;
            fault_msg = *n.fault();
        }
        if (n.state() != State::SS && n.state() != State::TS) all_scheduled = false;
        for (const auto& c : r.per_node) (void)c;
    }
    r.rounds_mean = topo_.n > 0 ? rounds_sum / topo_.n : 0.0;
    for (const auto& c : r.per_node) {
        r.totals.req += c.req;
        r.totals.carrier += c.carrier;
        r.totals.ind += c.ind;
        r.totals.reject += c.reject;
        r.totals.adv += c.adv;
        r.totals.hello += c.hello;
    }
    if (fault) {
        r.status = Phase1Status::Deadlock;
        r.error = fault_msg;
    } else if (!all_scheduled) {
        r.status = Phase1Status::Timeout;
        std::ostringstream os;
        os << "phase 1 did not converge within " << cfg_.tick_budget << " ticks;"
           << " unscheduled:";
        for (NodeId i = 0; i < topo_.n; ++i)
            if (r.final_states[i] != State::SS && r.final_states[i] != State::TS)
                os << ' ' << i << '(' << to_string(r.final_states[i]) << ')';
        r.error = os.str();
    } else {
        r.status = Phase1Status::Converged;
    }
    return r;
}

Phase1Result run_phase1(const Topology& topo, Config cfg, ChannelConfig channel,
                        StopMode stop) {
    Phase1Sim sim(topo, std::move(cfg), channel);
    return sim.run(stop);
}

}  // namespace tdmasim::rdtdma
