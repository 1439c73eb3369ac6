#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "helpers.hpp"
#include "tdmasim/harness.hpp"
#include "tdmasim/oracle.hpp"

using namespace tdmasim;
namespace hn = tdmasim::harness;

TEST_CASE("pipeline on a single node") {
    hn::ExperimentConfig cfg;
    cfg.topo.n = 1;
    cfg.topo.range = 10;
    auto m = hn::run_pipeline(cfg);
    CHECK(m.status == "ok");
    CHECK(m.final_sl == 1);
    CHECK(m.phase2_moves == 0);
}

TEST_CASE("pipeline produces consistent metrics") {
    hn::ExperimentConfig cfg;
    cfg.topo.n = 25;
    cfg.topo.range = 70;
    cfg.topo.seed = 3;
    cfg.per = 0.1;
    cfg.phase2_rounds = 20;
    cfg.seed = 11;
    auto m = hn::run_pipeline(cfg);
    REQUIRE(m.status == "ok");
    CHECK(m.S == m.density_max + 1);
    CHECK(m.input_sl <= m.S);
    CHECK(m.final_sl <= m.input_sl);
    CHECK(m.feasible_every_round);
    CHECK(m.greedy_sl <= m.delta_plus_1);
    CHECK(m.trajectory.size() == static_cast<std::size_t>(m.phase2_rounds_run) + 1);
}

TEST_CASE("undersized S is refused without the unsafe flag") {
    hn::ExperimentConfig cfg;
    cfg.topo.n = 10;
    cfg.topo.range = 120;
    cfg.S = 2;
    CHECK_THROWS_AS(hn::run_pipeline(cfg), SimError);
    cfg.unsafe_S = true;  // allowed, surfaces as a protocol outcome instead
    CHECK_NOTHROW((void)hn::run_pipeline(cfg));
}

TEST_CASE("sweep layout: rows per seed plus two aggregate lines per cell") {
    hn::ExperimentConfig base;
    base.topo.n = 10;
    base.topo.range = 80;
    base.phase2_rounds = 5;
    std::vector<hn::SweepCell> cells(2);
    cells[0] = {"cell-a", base, {1, 2, 3}};
    base.per = 0.1;
    cells[1] = {"cell-b", base, {4, 5, 6}};
    auto res = hn::sweep(cells, 2);
    CHECK(res.rows.size() == 6);
    auto csv = res.to_csv();
    std::size_t lines = std::count(csv.begin(), csv.end(), '\n');
    CHECK(lines == 1 + 6 + 4);  // header + rows + (median, iqr) per cell
}

TEST_CASE("sweep output is byte-identical regardless of scheduling") {
    hn::ExperimentConfig base;
    base.topo.n = 12;
    base.topo.range = 75;
    base.phase2_rounds = 8;
    base.per = 0.15;
    std::vector<hn::SweepCell> cells{{"c0", base, {7, 8}}, {"c1", base, {9, 10}}};
    auto serial = hn::sweep(cells, 1).to_csv();
    auto parallel = hn::sweep(cells, 4).to_csv();
    CHECK(serial == parallel);
    CHECK(serial == hn::sweep(cells, 4).to_csv());
}

TEST_CASE("failures are recorded per row and the sweep continues") {
    hn::ExperimentConfig bad;
    bad.topo.n = 6;
    bad.topo.range = 200;  // dense: S=1 cannot work
    bad.S = 1;
    bad.unsafe_S = true;
    bad.K = 1.0;
    hn::ExperimentConfig good;
    good.topo.n = 6;
    good.topo.range = 60;
    good.phase2_rounds = 3;
    auto res = hn::sweep({{"bad", bad, {1, 2}}, {"good", good, {3}}}, 1);
    REQUIRE(res.rows.size() == 3);
    CHECK(res.rows[0].status == "deadlock");
    CHECK(res.rows[1].status == "deadlock");
    CHECK(res.rows[2].status == "ok");
    CHECK(res.to_csv().find("deadlock") != std::string::npos);
}

TEST_CASE("config json round trip with overrides") {
    hn::ExperimentConfig cfg;
    cfg.topo.n = 33;
    cfg.topo.mode = TxMode::Unicast;
    cfg.per = 0.2;
    cfg.dynamic_probabilities = true;
    cfg.phase2_rounds = 17;
    auto text = hn::config_to_json(cfg);
    auto back = hn::config_from_json(text);
    CHECK(back.topo.n == 33);
    CHECK(back.topo.mode == TxMode::Unicast);
    CHECK(back.per == doctest::Approx(0.2));
    CHECK(back.dynamic_probabilities);
    CHECK(back.phase2_rounds == 17);
    // partial documents keep defaults elsewhere
    auto partial = hn::config_from_json(R"({"n": 5})");
    CHECK(partial.topo.n == 5);
    CHECK(partial.per == 0.0);
    CHECK(partial.phase2_rounds == 40);
}

TEST_CASE("schedule files round trip") {
    Schedule s(4);
    s.slot = {3, 1, 2, 1};
    auto text = hn::schedule_to_text(s);
    CHECK(text == "0,3\n1,1\n2,2\n3,1\n");
    auto back = hn::schedule_from_text(text);
    CHECK(back.slot == s.slot);
}

TEST_CASE("trajectory CSV carries the documented header") {
    hn::ExperimentConfig cfg;
    cfg.topo.n = 8;
    cfg.topo.range = 90;
    cfg.phase2_rounds = 4;
    auto m = hn::run_pipeline(cfg);
    auto csv = hn::trajectory_to_csv(m.trajectory);
    CHECK(csv.rfind("round,schedule_length,moves_this_round\n", 0) == 0);
}

TEST_CASE("range bisection hits a density target") {
    double range = hn::bisect_range_for_density(50, 250, 250, 20.0, 5);
    auto t = Topology::generate_random(50, 250, 250, range, 5, TxMode::Broadcast);
    CHECK(t.mean_two_hop_degree() == doctest::Approx(20.0).epsilon(0.15));
}

TEST_CASE("topology files load through the spec") {
    auto t = Topology::generate_random(9, 100, 100, 40, 2, TxMode::Unicast);
    const char* path = "tdmasim_test_topology.json";
    {
        std::ofstream out(path);
        out << t.to_json();
    }
    hn::TopologySpec spec;
    spec.topology_file = path;
    auto back = hn::build_topology(spec);
    CHECK(back.neighbors == t.neighbors);
    CHECK(back.receivers == t.receivers);
    std::remove(path);
}

TEST_CASE("pipeline runs are reproducible byte for byte") {
    hn::ExperimentConfig cfg;
    cfg.topo.n = 20;
    cfg.topo.range = 70;
    cfg.per = 0.1;
    cfg.phase2_rounds = 10;
    cfg.seed = 42;
    std::vector<hn::SweepCell> cells{{"repro", cfg, {42, 43, 44}}};
    CHECK(hn::sweep(cells, 3).to_csv() == hn::sweep(cells, 1).to_csv());
}
