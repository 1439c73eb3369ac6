#include "doctest.h"

#include <algorithm>

#include "helpers.hpp"
#include "tdmasim/topology.hpp"

using namespace tdmasim;

TEST_CASE("two mutually reachable nodes") {
    auto t = Topology::generate_random(2, 10, 10, 100, 7, TxMode::Broadcast);
    CHECK(t.adjacent(0, 1));
    CHECK(t.receivers[0] == std::vector<NodeId>{1});
    CHECK(t.two_hop(0) == std::vector<NodeId>{1});
}

TEST_CASE("star fixture two-hop sets") {
    auto t = test::star5();
    CHECK(t.two_hop(1) == std::vector<NodeId>{0, 2, 3, 4});
    CHECK(t.two_hop(0) == std::vector<NodeId>{1, 2, 3, 4});
}

TEST_CASE("chain two-hop via union formula") {
    auto t = test::chain3();
    CHECK(t.two_hop(0) == std::vector<NodeId>{1, 2});
    CHECK(t.two_hop(1) == std::vector<NodeId>{0, 2});
}

TEST_CASE("isolated node has empty two-hop set") {
    auto t = Topology::from_edges(3, {{0, 1}}, TxMode::Broadcast);
    CHECK(t.two_hop(2).empty());
}

TEST_CASE("two-hop symmetry on a random topology") {
    auto t = Topology::generate_random(40, 250, 250, 70, 11, TxMode::Broadcast);
    for (NodeId i = 0; i < t.n; ++i)
        for (NodeId j : t.two_hop(i)) {
            auto n2j = t.two_hop(j);
            CHECK(std::binary_search(n2j.begin(), n2j.end(), i));
        }
}

TEST_CASE("star interference graph is complete in broadcast mode") {
    auto g = interference_graph(test::star5());
    CHECK(g.delta == 4);
    CHECK(g.edges().size() == 10);  // K5
}

TEST_CASE("single node: empty interference graph") {
    auto g = interference_graph(Topology::from_edges(1, {}, TxMode::Broadcast));
    CHECK(g.delta == 0);
    CHECK(g.edges().empty());
}

TEST_CASE("unicast chain conflict via the receiver predicate") {
    // R_a={b}, R_b={c}, R_c={b}: (a,c) conflict because N_c ∩ R_a = {b}
    auto t = test::chain3(TxMode::Unicast, {1, 2, 1});
    auto g = interference_graph(t);
    CHECK(g.has_edge(0, 2));
    CHECK(g.has_edge(0, 1));
    CHECK(g.has_edge(1, 2));
}

TEST_CASE("broadcast interference equals the two-hop relation") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        auto t = Topology::generate_random(35, 250, 250, 60, seed, TxMode::Broadcast);
        auto g = interference_graph(t);
        for (NodeId i = 0; i < t.n; ++i) {
            auto n2 = t.two_hop(i);
            CHECK(g.adj[i] == n2);
        }
    }
}

TEST_CASE("unicast interference edges are a subset of broadcast edges") {
    for (std::uint64_t seed : {3, 9, 27}) {
        auto tu = Topology::generate_random(30, 250, 250, 65, seed, TxMode::Unicast);
        auto tb = Topology::generate_random(30, 250, 250, 65, seed, TxMode::Broadcast);
        auto gu = interference_graph(tu);
        auto gb = interference_graph(tb);
        for (auto [i, j] : gu.edges()) CHECK(gb.has_edge(i, j));
    }
}

TEST_CASE("generation is deterministic and serialization byte-identical") {
    auto a = Topology::generate_random(25, 250, 250, 55, 42, TxMode::Unicast);
    auto b = Topology::generate_random(25, 250, 250, 55, 42, TxMode::Unicast);
    CHECK(a.to_json() == b.to_json());
    auto c = Topology::generate_random(25, 250, 250, 55, 43, TxMode::Unicast);
    CHECK(a.to_json() != c.to_json());
}

TEST_CASE("topology round-trips through its file format") {
    auto t = Topology::generate_random(20, 250, 250, 70, 5, TxMode::Unicast);
    auto back = Topology::from_json(t.to_json());
    CHECK(back.neighbors == t.neighbors);
    CHECK(back.receivers == t.receivers);
    CHECK(back.to_json() == t.to_json());
}

TEST_CASE("isolated unicast node is reported and gets an empty receiver set") {
    auto t = Topology::generate_random(2, 1000, 1000, 0.001, 9, TxMode::Unicast);
    CHECK(t.isolated_unicast.size() == 2);
    CHECK(t.receivers[0].empty());
}

TEST_CASE("bad generation inputs are rejected") {
    CHECK_THROWS_AS(Topology::generate_random(0, 10, 10, 5, 1, TxMode::Broadcast), SimError);
    CHECK_THROWS_AS(Topology::generate_random(3, 10, 10, 0, 1, TxMode::Broadcast), SimError);
}
