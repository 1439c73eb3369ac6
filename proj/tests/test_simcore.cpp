#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "tdmasim/simcore.hpp"

using namespace tdmasim;

namespace {

Message dummy_req(NodeId sender, SlotId slot, int S) {
    ReqPayload p;
    p.slot = slot;
    p.gv.assign(S + 1, kNoNode);
    p.ov.assign(S + 1, 0);
    return make_req(sender, std::move(p));
}

}  // namespace

TEST_CASE("empty queue quiesces at t=0") {
    auto t = test::star5();
    Engine e(t, {0.0, true, 1});
    auto res = e.run();
    CHECK(res.quiescent);
    CHECK(res.end_tick == 0);
}

TEST_CASE("lossless broadcast reaches every one-hop neighbor") {
    auto t = test::star5();
    Engine e(t, {0.0, true, 1});
    e.enable_trace(true);
    std::vector<std::pair<NodeId, NodeId>> got;
    Engine::Hooks h;
    h.on_receive = [&](NodeId r, const Message& m, Tick) { got.emplace_back(m.sender, r); };
    e.set_hooks(std::move(h));
    e.schedule_broadcast(5, dummy_req(0, 1, 4));
    auto res = e.run();
    CHECK(res.quiescent);
    CHECK(got.size() == 4);
    REQUIRE(e.trace().size() == 1);
    CHECK(e.trace()[0].tick == 5);
    CHECK(e.trace()[0].delivered.size() == 4);
    CHECK(e.trace()[0].line() == "5 REQ 0 1,2,3,4 -");
}

TEST_CASE("per=1 loses every reception") {
    auto t = test::star5();
    Engine e(t, {1.0, true, 1});
    int received = 0;
    Engine::Hooks h;
    h.on_receive = [&](NodeId, const Message&, Tick) { ++received; };
    e.set_hooks(std::move(h));
    e.schedule_broadcast(0, dummy_req(0, 1, 4));
    e.run();
    CHECK(received == 0);
    CHECK(e.losses() == 4);
}

TEST_CASE("same-tick transmissions collide at shared neighbors only") {
    // 0-1, 1-2, 2-3: senders 0 and 2 share neighbor 1; node 3 hears only 2
    auto t = Topology::from_edges(4, {{0, 1}, {1, 2}, {2, 3}}, TxMode::Broadcast);
    Engine e(t, {0.0, true, 1});
    std::vector<std::pair<NodeId, NodeId>> got;
    Engine::Hooks h;
    h.on_receive = [&](NodeId r, const Message& m, Tick) { got.emplace_back(m.sender, r); };
    e.set_hooks(std::move(h));
    e.schedule_broadcast(3, dummy_req(0, 1, 4));
    e.schedule_broadcast(3, dummy_req(2, 2, 4));
    e.run();
    // node 1 hears neither; 0's message dies entirely; 2 still reaches 3
    REQUIRE(got.size() == 1);
    CHECK(got[0] == std::pair<NodeId, NodeId>{2, 3});

    SUBCASE("collisions can be disabled") {
        Engine e2(t, {0.0, false, 1});
        int received = 0;
        Engine::Hooks h2;
        h2.on_receive = [&](NodeId, const Message&, Tick) { ++received; };
        e2.set_hooks(std::move(h2));
        e2.schedule_broadcast(3, dummy_req(0, 1, 4));
        e2.schedule_broadcast(3, dummy_req(2, 2, 4));
        e2.run();
        CHECK(received == 3);  // 0->1, 2->1, 2->3
    }
}

TEST_CASE("per-reception losses are independent at the configured rate") {
    auto t = Topology::from_edges(2, {{0, 1}}, TxMode::Broadcast);
    const double per = 0.2;
    Engine e(t, {per, true, 77});
    long long received = 0;
    Engine::Hooks h;
    h.on_receive = [&](NodeId, const Message&, Tick) { ++received; };
    e.set_hooks(std::move(h));
    const long long total = 20000;
    for (long long k = 0; k < total; ++k)
        e.schedule_broadcast(k, dummy_req(0, 1, 4));
    e.run();
    double loss_frac = 1.0 - static_cast<double>(received) / total;
    CHECK(std::fabs(loss_frac - per) < 3 * tdmasim::test::binom_sigma(per, total));
}

TEST_CASE("reruns with the same seed produce identical traces") {
    auto t = Topology::generate_random(12, 100, 100, 40, 3, TxMode::Broadcast);
    auto run_once = [&t]() {
        Engine e(t, {0.3, true, 5});
        e.enable_trace(true);
        Engine::Hooks h;
        // a deterministic little storm: every reception triggers a reply for a while
        h.on_receive = [&e](NodeId r, const Message& m, Tick now) {
            if (now < 40 && m.req->slot == 1) e.schedule_broadcast(now + 1, dummy_req(r, 1, 4));
        };
        e.set_hooks(std::move(h));
        e.schedule_broadcast(0, dummy_req(0, 1, 4));
        e.run(std::optional<Tick>{200});
        std::string out;
        for (const auto& entry : e.trace()) out += entry.line() + "\n";
        return out;
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("scheduling into the past is a fatal error") {
    auto t = test::star5();
    Engine e(t, {0.0, true, 1});
    Engine::Hooks h;
    h.on_timer = [&e](NodeId, int, std::uint64_t, Tick now) {
        CHECK_THROWS_AS(e.schedule_timer(now - 1, 0, 1), SimError);
    };
    e.set_hooks(std::move(h));
    e.schedule_timer(5, 0, 1);
    e.run();
}

TEST_CASE("single scheduled message yields one delivery set") {
    auto t = test::chain3();
    Engine e(t, {0.0, true, 1});
    e.enable_trace(true);
    e.schedule_broadcast(5, dummy_req(1, 2, 4));
    auto res = e.run();
    CHECK(res.quiescent);
    REQUIRE(e.trace().size() == 1);
    CHECK(e.trace()[0].delivered == std::vector<NodeId>{0, 2});
    CHECK(e.counts()[1].req == 1);
}

TEST_CASE("stop predicate halts the run") {
    auto t = test::chain3();
    Engine e(t, {0.0, true, 1});
    Engine::Hooks h;
    h.on_tick_end = [](Tick now) { return now >= 3; };
    e.set_hooks(std::move(h));
    for (Tick k = 0; k < 10; ++k) e.schedule_timer(k, 0, 1);
    auto res = e.run();
    CHECK(res.stopped);
    CHECK(res.end_tick == 3);
}
