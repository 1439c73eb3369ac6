#include "doctest.h"

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "tdmasim/oracle.hpp"
#include "tdmasim/rdtdma.hpp"

using namespace tdmasim;
using namespace tdmasim::rdtdma;

namespace {

Config unit_cfg(int S, std::uint64_t seed = 1) {
    Config c;
    c.S = S;
    c.seed = seed;
    if (c.K < 1.0 / S) c.K = 1.0 / S;
    return c;
}

Message carrier_from(NodeId sender, int S, std::vector<std::pair<SlotId, NodeId>> grants,
                     std::vector<SlotId> occupied = {}) {
    ReqPayload p;
    p.gv.assign(S + 1, kNoNode);
    p.ov.assign(S + 1, 0);
    for (auto [s, who] : grants) p.gv[s] = who;
    for (SlotId s : occupied) p.ov[s] = 1;
    return make_req(sender, std::move(p));
}

Message req_from(NodeId sender, SlotId slot, int S) {
    ReqPayload p;
    p.slot = slot;
    p.gv.assign(S + 1, kNoNode);
    p.ov.assign(S + 1, 0);
    return make_req(sender, std::move(p));
}

Message ind_from(NodeId sender, SlotId slot, int S) {
    IndPayload p;
    p.slot = slot;
    p.gv.assign(S + 1, kNoNode);
    p.ov.assign(S + 1, 0);
    p.ov[slot] = 1;
    return make_ind(sender, std::move(p));
}

// run queued node timers matching an id once, in queue order
void fire(Node& n, Outbox& out, int timer_id, Tick now) {
    auto timers = out.timers;
    out.timers.clear();
    for (const auto& t : timers) {
        if (t.timer_id == timer_id)
            n.on_timer(t.timer_id, t.gen, now, out);
        else
            out.timers.push_back(t);
    }
}

}  // namespace

TEST_CASE("contention picks the only slot left with probability one") {
    auto topo = test::star5();
    auto cfg = unit_cfg(4);
    Node n(0, topo, cfg);
    Outbox out;
    // three of four slots are known occupied
    n.on_message(ind_from(1, 1, 4), 0, out);
    n.on_message(ind_from(2, 2, 4), 0, out);
    n.on_message(ind_from(3, 3, 4), 0, out);
    n.start(0, out);
    CHECK(n.state() == State::VS);
    CHECK(n.pending_slot() == 4);
}

TEST_CASE("one-hot probability vector always selects its slot") {
    auto topo = test::star5();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto cfg = unit_cfg(4, seed);
        Node n(0, topo, cfg);
        Outbox out;
        n.on_message(ind_from(1, 1, 4), 0, out);
        n.on_message(ind_from(2, 2, 4), 0, out);
        n.on_message(ind_from(4, 4, 4), 0, out);
        n.start(0, out);
        CHECK(n.pending_slot() == 3);
    }
}

TEST_CASE("uniform sampling passes a chi-squared test") {
    // the node's slot selection path is Rng::categorical over its vector
    Rng rng(2024);
    std::vector<double> w{0.25, 0.25, 0.25, 0.25};
    const int draws = 10000;
    std::vector<int> count(4, 0);
    for (int k = 0; k < draws; ++k) ++count[rng.categorical(w)];
    double chi2 = 0.0;
    for (int c : count) {
        double diff = c - draws / 4.0;
        chi2 += diff * diff / (draws / 4.0);
    }
    CHECK(chi2 < 16.27);  // df=3 at the 0.999 quantile
}

TEST_CASE("fresh receiver grants a request and leaves the slot") {
    auto topo = test::star5();
    auto cfg = unit_cfg(4);
    Node n(0, topo, cfg);
    Outbox out;
    n.on_message(req_from(1, 2, 4), 0, out);
    CHECK(n.grant_vector()[2] == 1);
    CHECK(n.probabilities().p[2] == 0.0);
    CHECK(n.probabilities().sum() == doctest::Approx(1.0));
    // the grant must be conveyed: a carrier transmission is pending
    bool info_armed = false;
    for (const auto& t : out.timers) info_armed |= t.timer_id == kTimerInfoTx;
    CHECK(info_armed);
}

TEST_CASE("receiver contending for the same slot rejects") {
    auto topo = test::star5();
    auto cfg = unit_cfg(4);
    Node n(0, topo, cfg);
    Outbox out;
    n.on_message(ind_from(1, 1, 4), 0, out);
    n.on_message(ind_from(2, 2, 4), 0, out);
    n.on_message(ind_from(3, 3, 4), 0, out);
    n.start(0, out);  // now in VS for slot 4
    REQUIRE(n.pending_slot() == 4);
    n.on_message(req_from(2, 4, 4), 1, out);
    CHECK(n.grant_vector()[4] == kNoNode);
    bool reject_armed = false;
    for (const auto& t : out.timers) reject_armed |= t.timer_id == kTimerRejectTx;
    CHECK(reject_armed);
    // firing the reject timer emits an addressed REJECT for slot 4
    fire(n, out, kTimerRejectTx, 2);
    REQUIRE(out.txs.size() >= 1);
    const auto& msg = out.txs.back().msg;
    CHECK(msg.kind == MsgKind::Reject);
    CHECK(msg.reject->slot == 4);
    CHECK(msg.reject->target == 2);
}

TEST_CASE("a stale grant is revoked when the holder asks for another slot") {
    auto topo = test::star5();
    auto cfg = unit_cfg(4);
    Node n(0, topo, cfg);
    Outbox out;
    n.on_message(req_from(1, 2, 4), 0, out);
    REQUIRE(n.grant_vector()[2] == 1);
    // holder moves on to slot 3: slot 2 is revocable again
    n.on_message(req_from(1, 3, 4), 1, out);
    CHECK(n.grant_vector()[2] == kNoNode);
    CHECK(n.grant_vector()[3] == 1);
    CHECK(n.probabilities().p[2] > 0.0);  // probability restored
    CHECK(n.probabilities().sum() == doctest::Approx(1.0));
    // now another node can get slot 2
    n.on_message(req_from(2, 2, 4), 2, out);
    CHECK(n.grant_vector()[2] == 2);
}

TEST_CASE("duplicate request for an already granted slot is ignored") {
    auto topo = test::star5();
    auto cfg = unit_cfg(4);
    Node n(0, topo, cfg);
    Outbox out;
    n.on_message(req_from(1, 2, 4), 0, out);
    auto gv_before = n.grant_vector();
    n.on_message(req_from(1, 2, 4), 1, out);
    CHECK(n.grant_vector() == gv_before);
    bool reject_armed = false;
    for (const auto& t : out.timers) reject_armed |= t.timer_id == kTimerRejectTx;
    CHECK(!reject_armed);
}

TEST_CASE("request granted to someone else is rejected") {
    auto topo = test::star5();
    auto cfg = unit_cfg(4);
    Node n(0, topo, cfg);
    Outbox out;
    n.on_message(req_from(1, 2, 4), 0, out);
    n.on_message(req_from(2, 2, 4), 1, out);
    CHECK(n.grant_vector()[2] == 1);  // unchanged
    bool reject_armed = false;
    for (const auto& t : out.timers) reject_armed |= t.timer_id == kTimerRejectTx;
    CHECK(reject_armed);
}

TEST_CASE("a scheduled node refuses requests for its own slot") {
    auto topo = test::chain3();
    auto cfg = unit_cfg(4);
    Node n(1, topo, cfg);  // neighbors 0 and 2
    Outbox out;
    n.start(0, out);
    SlotId s = n.pending_slot();
    n.on_message(carrier_from(0, 4, {{s, 1}}), 1, out);
    n.on_message(carrier_from(2, 4, {{s, 1}}), 1, out);
    REQUIRE(n.state() == State::SS);
    n.on_message(req_from(0, s, 4), 2, out);
    CHECK(n.grant_vector()[s] == kNoNode);
    bool reject_armed = false;
    for (const auto& t : out.timers) reject_armed |= t.timer_id == kTimerRejectTx;
    CHECK(reject_armed);
}

TEST_CASE("a node with no neighbors is scheduled on its first attempt") {
    auto topo = Topology::from_edges(1, {}, TxMode::Broadcast);
    auto cfg = unit_cfg(3);
    Node n(0, topo, cfg);
    Outbox out;
    n.start(0, out);
    CHECK(n.state() == State::VS);
    fire(n, out, kTimerReqTx, 1);
    CHECK(n.state() == State::SS);
    CHECK(n.rounds() == 1);
}

TEST_CASE("grant from every neighbor moves the node to SS with a one-hot vector") {
    auto topo = test::chain3();  // node 0 has a single neighbor, node 1
    auto cfg = unit_cfg(4);
    Node n(0, topo, cfg);
    Outbox out;
    n.start(0, out);
    SlotId s = n.pending_slot();
    REQUIRE(s != kNoSlot);
    n.on_message(carrier_from(1, 4, {{s, 0}}), 1, out);
    CHECK(n.state() == State::SS);
    CHECK(n.slot() == s);
    CHECK(n.probabilities().is_one_hot(s));
    CHECK(n.occupied_vector()[s] == 1);
}

TEST_CASE("reject sends the node back to contention") {
    auto topo = test::chain3();
    auto cfg = unit_cfg(4);
    Node n(0, topo, cfg);
    Outbox out;
    n.start(0, out);
    SlotId s = n.pending_slot();
    RejectPayload rj;
    rj.slot = s;
    rj.target = 0;
    rj.gv.assign(5, kNoNode);
    rj.ov.assign(5, 0);
    n.on_message(make_reject(1, std::move(rj)), 1, out);
    CHECK(n.rounds() == 2);  // re-entered contention
    CHECK(n.state() == State::VS);
}

TEST_CASE("lost grants cause retransmissions, then a fresh contention round") {
    auto topo = test::chain3();
    auto cfg = unit_cfg(4);
    cfg.max_attempts = 3;
    Node n(0, topo, cfg);
    Outbox out;
    n.start(0, out);
    for (std::size_t attempt = 1; attempt <= 3; ++attempt) {
        fire(n, out, kTimerReqTx, static_cast<Tick>(attempt) * 10);
        CHECK(out.txs.size() == attempt);  // one REQ per attempt
        CHECK(n.state() == State::VS);
        fire(n, out, kTimerGrantTimeout, static_cast<Tick>(attempt) * 10 + 5);
    }
    CHECK(n.rounds() == 2);  // attempts exhausted, back through CS
}

TEST_CASE("scripted grant loss: completion on the second request") {
    // star center needs grants from all four leaves; one grant arrives late
    auto topo = test::star5();
    auto cfg = unit_cfg(6);
    Node n(0, topo, cfg);
    Outbox out;
    n.start(0, out);
    SlotId s = n.pending_slot();
    fire(n, out, kTimerReqTx, 1);
    for (NodeId leaf : {1, 2, 3}) n.on_message(carrier_from(leaf, 6, {{s, 0}}), 2, out);
    CHECK(n.state() == State::VS);  // leaf 4's grant was lost
    fire(n, out, kTimerGrantTimeout, 8);
    CHECK(n.state() == State::VS);
    CHECK(n.pending_slot() == s);  // same slot, retransmission scheduled
    fire(n, out, kTimerReqTx, 9);
    n.on_message(carrier_from(4, 6, {{s, 0}}), 10, out);
    CHECK(n.state() == State::SS);
    CHECK(n.rounds() == 1);
}

TEST_CASE("indication zeroes the slot and redistributes the mass") {
    auto topo = test::star5();
    auto cfg = unit_cfg(4);
    Node n(0, topo, cfg);
    Outbox out;
    CHECK(n.probabilities().p[2] == doctest::Approx(0.25));
    n.on_message(ind_from(1, 2, 4), 0, out);
    CHECK(n.probabilities().p[2] == 0.0);
    for (SlotId s : {1, 3, 4})
        CHECK(n.probabilities().p[s] == doctest::Approx(1.0 / 3.0));
    CHECK(n.occupied_vector()[2] == 1);
}

TEST_CASE("relayed occupancy bans the slot without becoming relayable") {
    auto topo = test::star5();
    auto cfg = unit_cfg(4);
    Node n(0, topo, cfg);
    Outbox out;
    n.on_message(carrier_from(1, 4, {}, {3}), 0, out);
    CHECK(n.probabilities().p[3] == 0.0);
    CHECK(n.occupied_vector()[3] == 0);  // only direct INDs make occupancy relayable
}

TEST_CASE("occupancy echo fills indV and completes termination") {
    auto topo = test::star5();
    auto cfg = unit_cfg(6);
    Node n(0, topo, cfg);
    Outbox out;
    n.start(0, out);
    SlotId s = n.pending_slot();
    fire(n, out, kTimerReqTx, 1);
    for (NodeId leaf : {1, 2, 3, 4}) n.on_message(carrier_from(leaf, 6, {{s, 0}}), 2, out);
    REQUIRE(n.state() == State::SS);

    n.on_message(carrier_from(1, 6, {}, {s}), 3, out);
    CHECK(n.ind_vector()[0] == 1);
    CHECK(n.state() == State::SS);  // piggyback state not flushed yet

    fire(n, out, kTimerIndTx, 4);  // IND carries the occupied vector
    for (NodeId leaf : {2, 3, 4}) n.on_message(carrier_from(leaf, 6, {}, {s}), 5, out);
    CHECK(n.state() == State::TS);

    // terminated: timers produce no further transmissions
    auto txs_before = out.txs.size();
    fire(n, out, kTimerIndTx, 6);
    fire(n, out, kTimerInfoTx, 7);
    CHECK(out.txs.size() == txs_before);
}

TEST_CASE("an indication for the node's own scheduled slot is a protocol violation") {
    auto topo = test::chain3();
    auto cfg = unit_cfg(4);
    Node n(0, topo, cfg);
    Outbox out;
    n.start(0, out);
    SlotId s = n.pending_slot();
    n.on_message(carrier_from(1, 4, {{s, 0}}), 1, out);
    REQUIRE(n.state() == State::SS);
    CHECK_THROWS_AS(n.on_message(ind_from(1, s, 4), 2, out), SimError);
}

TEST_CASE("probability updates: balanced neighborhood is a fixed point") {
    auto topo = test::star5();
    auto cfg = unit_cfg(5);
    cfg.dynamic_probabilities = true;
    Node n(0, topo, cfg);  // |N2| = 4 = S-1
    for (NodeId leaf : {1, 2, 3, 4}) {
        ProbSnapshot snap{leaf, 1, {0.0, 0.2, 0.2, 0.2, 0.2, 0.2}};
        n.ingest_snapshot(snap, true);
    }
    n.update_probabilities();
    for (SlotId s = 1; s <= 5; ++s) CHECK(n.probabilities().p[s] == doctest::Approx(0.2));
}

TEST_CASE("probability updates: a scheduled two-hop neighbor forces zero") {
    auto topo = test::star5();
    auto cfg = unit_cfg(5);
    cfg.dynamic_probabilities = true;
    Node n(0, topo, cfg);
    ProbSnapshot snap{1, 1, {0.0, 0.0, 1.0, 0.0, 0.0, 0.0}};
    n.ingest_snapshot(snap, true);
    n.update_probabilities();
    CHECK(n.probabilities().p[2] == 0.0);
    CHECK(n.probabilities().sum() == doctest::Approx(1.0));
}

TEST_CASE("worked two-slot compensation example") {
    auto topo = Topology::from_edges(2, {{0, 1}}, TxMode::Broadcast);
    Config cfg;
    cfg.S = 2;
    cfg.K = 0.5;
    cfg.dynamic_probabilities = true;
    Node n(0, topo, cfg);
    ProbSnapshot snap{1, 1, {0.0, 1.0, 0.0}};
    n.ingest_snapshot(snap, true);
    n.update_probabilities();
    CHECK(n.probabilities().p[1] == 0.0);
    CHECK(n.probabilities().p[2] == doctest::Approx(1.0));
}

// ---- full phase-1 runs -------------------------------------------------------------

TEST_CASE("phase 1 on a single node") {
    auto topo = Topology::from_edges(1, {}, TxMode::Broadcast);
    auto res = run_phase1(topo, Config{}, {0.0, true, 1});
    CHECK(res.status == Phase1Status::Converged);
    CHECK(res.schedule.length() == 1);
    CHECK(res.rounds_max == 1);
}

TEST_CASE("phase 1 on the star yields five distinct slots") {
    auto topo = test::star5();
    Config cfg;
    cfg.seed = 3;
    auto res = run_phase1(topo, cfg, {0.0, true, 3});
    REQUIRE(res.status == Phase1Status::Converged);
    auto rep = oracle::verify_feasible(res.schedule, interference_graph(topo));
    CHECK(rep.ok);
    std::set<SlotId> used(res.schedule.slot.begin(), res.schedule.slot.end());
    CHECK(used.size() == 5);
}

TEST_CASE("phase 1 converges and stays safe across seeds and loss rates") {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto topo = Topology::generate_random(25, 250, 250, 70, seed, TxMode::Broadcast);
        for (double per : {0.0, 0.2}) {
            Config cfg;
            cfg.seed = seed * 17 + 1;
            auto res = run_phase1(topo, cfg, {per, true, seed + 5});
            REQUIRE(res.status == Phase1Status::Converged);
            CHECK(oracle::verify_feasible(res.schedule, interference_graph(topo)).ok);
        }
    }
}

TEST_CASE("phase 1 is deterministic for a fixed seed") {
    auto topo = Topology::generate_random(20, 250, 250, 70, 9, TxMode::Broadcast);
    Config cfg;
    cfg.seed = 4;
    auto a = run_phase1(topo, cfg, {0.1, true, 11});
    auto b = run_phase1(topo, cfg, {0.1, true, 11});
    CHECK(a.schedule.slot == b.schedule.slot);
    CHECK(a.convergence_tick == b.convergence_tick);
    CHECK(a.totals.total() == b.totals.total());
}

TEST_CASE("lossless runs drain to global termination") {
    auto topo = Topology::generate_random(12, 100, 100, 45, 2, TxMode::Broadcast);
    Config cfg;
    cfg.seed = 8;
    auto res = run_phase1(topo, cfg, {0.0, true, 21}, StopMode::Quiescence);
    REQUIRE(res.status == Phase1Status::Converged);
    for (auto st : res.final_states) CHECK(st == State::TS);
}

TEST_CASE("an undersized frame surfaces as a deadlock fault") {
    auto topo = Topology::from_edges(2, {{0, 1}}, TxMode::Broadcast);
    Config cfg;
    cfg.S = 1;
    cfg.K = 1.0;
    auto res = run_phase1(topo, cfg, {0.0, true, 1});
    CHECK(res.status == Phase1Status::Deadlock);
    CHECK(!res.error.empty());
}

TEST_CASE("dynamic probability mode converges with invariants enforced") {
    auto topo = Topology::generate_random(20, 250, 250, 80, 6, TxMode::Broadcast);
    Config cfg;
    cfg.dynamic_probabilities = true;
    cfg.seed = 10;
    auto res = run_phase1(topo, cfg, {0.0, true, 12});
    REQUIRE(res.status == Phase1Status::Converged);
    CHECK(oracle::verify_feasible(res.schedule, interference_graph(topo)).ok);
}

TEST_CASE("vs-wait flag: literal slot-index waiting still converges") {
    auto topo = test::star5();
    Config cfg;
    cfg.vs_wait_slot_index = true;
    cfg.seed = 5;
    auto res = run_phase1(topo, cfg, {0.0, true, 5});
    CHECK(res.status == Phase1Status::Converged);
}
