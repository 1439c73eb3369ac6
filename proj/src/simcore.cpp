#include "tdmasim/simcore.hpp"

#include <algorithm>
#include <sstream>

namespace tdmasim {

std::string to_string(MsgKind k) {
    switch (k) {
        case MsgKind::Req: return "REQ";
        case MsgKind::Ind: return "IND";
        case MsgKind::Reject: return "REJECT";
        case MsgKind::Adv: return "ADV";
        case MsgKind::Hello: return "HELLO";
    }
    return "?";
}

Message make_req(NodeId sender, ReqPayload p) {
    Message m;
    m.kind = MsgKind::Req;
    m.sender = sender;
    m.req = std::make_shared<const ReqPayload>(std::move(p));
    return m;
}
Message make_ind(NodeId sender, IndPayload p) {
    Message m;
    m.kind = MsgKind::Ind;
    m.sender = sender;
    m.ind = std::make_shared<const IndPayload>(std::move(p));
    return m;
}
Message make_reject(NodeId sender, RejectPayload p) {
    Message m;
    m.kind = MsgKind::Reject;
    m.sender = sender;
    m.reject = std::make_shared<const RejectPayload>(std::move(p));
    return m;
}
Message make_adv(NodeId sender, AdvPayload p) {
    Message m;
    m.kind = MsgKind::Adv;
    m.sender = sender;
    m.adv = std::make_shared<const AdvPayload>(std::move(p));
    return m;
}
Message make_hello(NodeId sender, HelloPayload p) {
    Message m;
    m.kind = MsgKind::Hello;
    m.sender = sender;
    m.hello = std::make_shared<const HelloPayload>(std::move(p));
    return m;
}

std::string TraceEntry::line() const {
    std::ostringstream os;
    os << tick << ' ' << to_string(kind) << ' ' << sender << ' ';
    auto join = [&os](const std::vector<NodeId>& v) {
        if (v.empty()) {
            os << '-';
            return;
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) os << ',';
            os << v[i];
        }
    };
    join(delivered);
    os << ' ';
    join(lost);
    return os.str();
}

Engine::Engine(const Topology& topo, ChannelConfig cfg)
    : topo_(topo), cfg_(cfg), channel_rng_(derive_seed(cfg.seed, "channel")) {
    if (cfg.per < 0.0 || cfg.per > 1.0) throw SimError("channel: per must be in [0,1]");
    counts_.resize(topo.n);
}

void Engine::schedule_timer(Tick at, NodeId node, int timer_id, std::uint64_t gen) {
    if (at < now_) throw SimError("schedule_timer: event in the past");
    timers_.emplace(std::make_tuple(at, node, seq_), TimerEv{at, node, timer_id, gen, seq_});
    ++seq_;
}

void Engine::schedule_broadcast(Tick at, Message m) {
    if (at < now_) throw SimError("schedule_broadcast: event in the past");
    if (m.sender < 0 || m.sender >= topo_.n) throw SimError("schedule_broadcast: bad sender");
    m.tx_time = at;
    txs_.emplace(std::make_tuple(at, m.sender, seq_), TxEv{at, std::move(m), seq_});
    ++seq_;
}

void Engine::resolve_transmissions(Tick t) {
    // gather this tick's transmissions in (sender, seq) order
    std::vector<TxEv> batch;
    auto it = txs_.begin();
    while (it != txs_.end() && std::get<0>(it->first) == t) {
        batch.push_back(it->second);
        it = txs_.erase(it);
    }
    if (batch.empty()) return;

    // count audible transmissions per receiver for the collision rule
    std::vector<int> audible(topo_.n, 0);
    if (cfg_.collisions_enabled)
        for (const auto& tx : batch)
            for (NodeId j : topo_.neighbors[tx.msg.sender]) ++audible[j];

    for (const auto& tx : batch) {
        TraceEntry entry;
        entry.tick = t;
        entry.kind = tx.msg.kind;
        entry.sender = tx.msg.sender;

        auto& cnt = counts_[tx.msg.sender];
        switch (tx.msg.kind) {
            case MsgKind::Req:
                (tx.msg.req->slot == kNoSlot ? cnt.carrier : cnt.req)++;
                break;
            case MsgKind::Ind: ++cnt.ind; break;
            case MsgKind::Reject: ++cnt.reject; break;
            case MsgKind::Adv: ++cnt.adv; break;
            case MsgKind::Hello: ++cnt.hello; break;
        }

        for (NodeId j : topo_.neighbors[tx.msg.sender]) {
            bool lost = false;
            if (cfg_.collisions_enabled && audible[j] >= 2) lost = true;
            if (!lost && drop_hook_ && drop_hook_(t, tx.msg.sender, j)) lost = true;
            if (!lost && channel_rng_.bernoulli(cfg_.per)) lost = true;
            if (lost) {
                ++losses_;
                entry.lost.push_back(j);
            } else {
                ++deliveries_;
                entry.delivered.push_back(j);
                rxs_.emplace(std::make_tuple(t + 1, j, tx.msg.sender, seq_), tx.msg);
                ++seq_;
            }
        }
        if (trace_enabled_) trace_.push_back(std::move(entry));
    }
}

Engine::RunResult Engine::run(std::optional<Tick> until) {
    RunResult res;
    while (true) {
        // next tick with anything pending
        Tick next = -1;
        if (!rxs_.empty()) next = std::get<0>(rxs_.begin()->first);
        auto consider = [&next](Tick t) {
            if (next < 0 || t < next) next = t;
        };
        if (!timers_.empty()) consider(std::get<0>(timers_.begin()->first));
        if (!txs_.empty()) consider(std::get<0>(txs_.begin()->first));
        if (next < 0) {
            res.quiescent = true;
            res.end_tick = now_;
            return res;
        }
        if (until && next > *until) {
            res.budget_hit = true;
            res.end_tick = *until;
            now_ = *until;
            return res;
        }
        now_ = next;

        // (1)+(2) receptions then timers; handlers may schedule more same-tick
        // timers (zero waits), so drain until this tick is clean
        bool more = true;
        while (more) {
            auto rit = rxs_.begin();
            while (rit != rxs_.end() && std::get<0>(rit->first) == now_) {
                NodeId receiver = std::get<1>(rit->first);
                Message msg = rit->second;
                rit = rxs_.erase(rit);
                if (hooks_.on_receive) hooks_.on_receive(receiver, msg, now_);
            }
            auto tit = timers_.begin();
            while (tit != timers_.end() && std::get<0>(tit->first) == now_) {
                TimerEv ev = tit->second;
                tit = timers_.erase(tit);
                if (hooks_.on_timer) hooks_.on_timer(ev.node, ev.timer_id, ev.gen, now_);
            }
            more = (!timers_.empty() && std::get<0>(timers_.begin()->first) == now_) ||
                   (!rxs_.empty() && std::get<0>(rxs_.begin()->first) == now_);
        }
        // (3) channel resolution for transmissions at this tick
        resolve_transmissions(now_);

        if (hooks_.on_tick_end && hooks_.on_tick_end(now_)) {
            res.stopped = true;
            res.end_tick = now_;
            return res;
        }
    }
}

}  // namespace tdmasim
