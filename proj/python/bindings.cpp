#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tdmasim/dslr.hpp"
#include "tdmasim/harness.hpp"
#include "tdmasim/oracle.hpp"
#include "tdmasim/rdtdma.hpp"
#include "tdmasim/topology.hpp"

namespace py = pybind11;
using namespace tdmasim;

namespace {

TxMode mode_arg(const std::string& m) { return tx_mode_from_string(m); }

Schedule schedule_arg(const std::vector<SlotId>& slots) {
    Schedule s(slots.size());
    s.slot = slots;
    return s;
}

py::dict phase1_dict(const rdtdma::Phase1Result& r) {
    py::dict d;
    d["status"] = r.status == rdtdma::Phase1Status::Converged  ? "ok"
                  : r.status == rdtdma::Phase1Status::Timeout ? "timeout"
                                                              : "deadlock";
    d["schedule"] = r.schedule.slot;
    d["schedule_length"] = r.schedule.length();
    d["convergence_tick"] = r.convergence_tick;
    d["rounds_max"] = r.rounds_max;
    d["rounds_mean"] = r.rounds_mean;
    d["rounds_per_node"] = r.rounds_per_node;
    d["messages_total"] = r.totals.total();
    d["error"] = r.error;
    return d;
}

py::dict phase2_dict(const dslr::Phase2Result& r) {
    py::dict d;
    d["final_schedule"] = r.final_schedule.slot;
    d["final_length"] = r.final_schedule.length();
    d["rounds_run"] = r.rounds_run;
    py::list traj;
    for (const auto& row : r.trajectory) {
        py::dict e;
        e["round"] = row.round;
        e["schedule_length"] = row.schedule_length;
        e["moves"] = row.moves;
        e["lossless"] = row.lossless;
        e["schedule"] = row.schedule.slot;
        traj.append(e);
    }
    d["trajectory"] = traj;
    if (r.fixed_point_round)
        d["fixed_point_round"] = *r.fixed_point_round;
    else
        d["fixed_point_round"] = py::none();
    return d;
}

py::dict metrics_dict(const harness::RunMetrics& m) {
    py::dict d;
    d["seed"] = m.seed;
    d["status"] = m.status;
    d["n"] = m.n;
    d["mode"] = to_string(m.mode);
    d["density_mean"] = m.density_mean;
    d["density_max"] = m.density_max;
    d["S"] = m.S;
    d["delta_plus_1"] = m.delta_plus_1;
    d["per"] = m.per;
    d["dynamic"] = m.dynamic;
    d["phase1_ticks"] = m.phase1_ticks;
    d["phase1_rounds_max"] = m.phase1_rounds_max;
    d["msgs_per_node"] = m.msgs_per_node;
    d["input_sl"] = m.input_sl;
    d["phase2_rounds"] = m.phase2_rounds_run;
    d["phase2_moves"] = m.phase2_moves;
    d["final_sl"] = m.final_sl;
    d["greedy_sl"] = m.greedy_sl;
    if (m.fixed_point_round)
        d["fixed_point_round"] = *m.fixed_point_round;
    else
        d["fixed_point_round"] = py::none();
    d["feasible_every_round"] = m.feasible_every_round;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "two-phase distributed TDMA scheduling: protocols, oracle, analytics";

    py::register_exception<SimError>(m, "SimError");

    py::class_<Topology>(m, "Topology")
        .def_readonly("n", &Topology::n)
        .def_readonly("range", &Topology::range)
        .def_property_readonly("mode",
                               [](const Topology& t) { return to_string(t.mode); })
        .def_readonly("positions", &Topology::positions)
        .def_readonly("neighbors", &Topology::neighbors)
        .def_readonly("receivers", &Topology::receivers)
        .def_readonly("isolated_unicast", &Topology::isolated_unicast)
        .def("two_hop", &Topology::two_hop, py::arg("node"))
        .def("max_two_hop_degree", &Topology::max_two_hop_degree)
        .def("mean_two_hop_degree", &Topology::mean_two_hop_degree)
        .def("hop_diameter", &Topology::hop_diameter)
        .def("to_json", &Topology::to_json)
        .def_static("from_json", &Topology::from_json, py::arg("text"));

    m.def(
        "generate_topology",
        [](int n, double area_w, double area_h, double range, std::uint64_t seed,
           const std::string& mode) {
            return Topology::generate_random(n, area_w, area_h, range, seed, mode_arg(mode));
        },
        py::arg("n"), py::arg("area_w") = 250.0, py::arg("area_h") = 250.0,
        py::arg("range") = 60.0, py::arg("seed") = 1, py::arg("mode") = "broadcast");

    m.def(
        "topology_from_edges",
        [](int n, const std::vector<std::pair<NodeId, NodeId>>& edges,
           const std::string& mode, const std::vector<NodeId>& unicast_receiver) {
            return Topology::from_edges(n, edges, mode_arg(mode), unicast_receiver);
        },
        py::arg("n"), py::arg("edges"), py::arg("mode") = "broadcast",
        py::arg("unicast_receiver") = std::vector<NodeId>{});

    py::class_<InterferenceGraph>(m, "InterferenceGraph")
        .def_readonly("n", &InterferenceGraph::n)
        .def_readonly("adj", &InterferenceGraph::adj)
        .def_readonly("delta", &InterferenceGraph::delta)
        .def("edges", &InterferenceGraph::edges)
        .def("has_edge", &InterferenceGraph::has_edge);

    m.def("interference_graph", &interference_graph, py::arg("topology"));

    m.def(
        "verify_feasible",
        [](const std::vector<SlotId>& schedule, const InterferenceGraph& g) {
            auto rep = oracle::verify_feasible(schedule_arg(schedule), g);
            return py::make_tuple(rep.ok, rep.violations);
        },
        py::arg("schedule"), py::arg("graph"));

    m.def(
        "greedy_coloring",
        [](const InterferenceGraph& g, std::vector<NodeId> order) {
            return oracle::greedy_coloring(g, std::move(order)).slot;
        },
        py::arg("graph"), py::arg("order") = std::vector<NodeId>{});

    m.def(
        "brute_force_optimum",
        [](const InterferenceGraph& g, int max_n) {
            return oracle::brute_force_optimum(g, max_n);
        },
        py::arg("graph"), py::arg("max_n") = 12);

    m.def(
        "first_free_slot",
        [](const Topology& t, const std::vector<SlotId>& schedule, NodeId node) {
            return oracle::first_free_at(t, schedule_arg(schedule), node);
        },
        py::arg("topology"), py::arg("schedule"), py::arg("node"));

    m.def(
        "is_fixed_point",
        [](const Topology& t, const std::vector<SlotId>& schedule) {
            return oracle::is_fixed_point(t, schedule_arg(schedule));
        },
        py::arg("topology"), py::arg("schedule"));

    // analytics
    m.def("q_single_hop", &oracle::q_single_hop, py::arg("S"), py::arg("m"));
    m.def("q_min", &oracle::q_min, py::arg("S"));
    m.def("expected_rounds_bound", &oracle::expected_rounds_bound, py::arg("S"));
    m.def("expected_time_bound", &oracle::expected_time_bound, py::arg("S"),
          py::arg("t_cs") = 0.0, py::arg("t_req") = 1.0);
    m.def("expected_max_rounds_bound", &oracle::expected_max_rounds_bound, py::arg("S"),
          py::arg("n"));
    m.def("dslr_moves_bound", &oracle::dslr_moves_bound, py::arg("S"));
    m.def("dslr_moves_exact", &oracle::dslr_moves_exact, py::arg("S"));
    m.def("dslr_runtime_bound", &oracle::dslr_runtime_bound, py::arg("n"), py::arg("S"),
          py::arg("D"), py::arg("p"));
    m.def("mc_single_hop_success", &oracle::mc_single_hop_success, py::arg("S"), py::arg("m"),
          py::arg("trials"), py::arg("seed"));
    m.def(
        "dslr_dtmc_moves",
        [](int S, long long trials, std::uint64_t seed) {
            auto mm = oracle::mc_dslr_moves(S, trials, seed);
            return py::make_tuple(mm.mean, mm.stddev, mm.trials);
        },
        py::arg("S"), py::arg("trials"), py::arg("seed") = 1);
    m.def(
        "verify_bmin_structure",
        [](int S) {
            auto rep = oracle::verify_bmin_structure(S);
            py::dict d;
            d["S"] = rep.S;
            d["exhaustive"] = rep.exhaustive;
            d["matrices_checked"] = rep.matrices_checked;
            d["min_q"] = rep.min_q;
            d["theorem_value"] = rep.theorem_value;
            d["closed_form_value"] = rep.eq16_value;
            d["min_matches_theorem"] = rep.min_matches_theorem;
            d["closed_form_matches_min"] = rep.eq16_matches_min;
            d["structured_minimizer_found"] = rep.structured_minimizer_found;
            d["all_beta2_minimizers_structured"] = rep.all_beta2_minimizers_structured;
            return d;
        },
        py::arg("S"));

    // protocols
    m.def(
        "run_phase1",
        [](const Topology& topo, int S, double per, bool dynamic, std::uint64_t seed,
           double K, int max_attempts, Tick tick_budget, bool collisions) {
            rdtdma::Config cfg;
            cfg.S = S;
            cfg.K = K;
            cfg.max_attempts = max_attempts;
            cfg.dynamic_probabilities = dynamic;
            cfg.tick_budget = tick_budget;
            cfg.seed = derive_seed(seed, "phase1-nodes");
            ChannelConfig ch{per, collisions, derive_seed(seed, "phase1-channel")};
            return phase1_dict(rdtdma::run_phase1(topo, cfg, ch));
        },
        py::arg("topology"), py::arg("S") = 0, py::arg("per") = 0.0,
        py::arg("dynamic") = false, py::arg("seed") = 1, py::arg("K") = 0.25,
        py::arg("max_attempts") = 3, py::arg("tick_budget") = 0,
        py::arg("collisions") = true);

    m.def(
        "run_phase2",
        [](const Topology& topo, const std::vector<SlotId>& schedule, int rounds,
           bool to_fixed_point, double per, std::uint64_t seed, bool verify) {
            dslr::Config cfg;
            cfg.rounds = rounds;
            cfg.to_fixed_point = to_fixed_point;
            cfg.verify = verify;
            ChannelConfig ch{per, true, derive_seed(seed, "phase2-channel")};
            return phase2_dict(dslr::run_phase2(topo, schedule_arg(schedule), cfg, ch));
        },
        py::arg("topology"), py::arg("schedule"), py::arg("rounds") = 40,
        py::arg("to_fixed_point") = false, py::arg("per") = 0.0, py::arg("seed") = 1,
        py::arg("verify") = true);

    m.def(
        "run_pipeline",
        [](const py::kwargs& kwargs) {
            harness::ExperimentConfig cfg;
            for (auto item : kwargs) {
                auto key = item.first.cast<std::string>();
                if (key == "n") cfg.topo.n = item.second.cast<int>();
                else if (key == "area_w") cfg.topo.area_w = item.second.cast<double>();
                else if (key == "area_h") cfg.topo.area_h = item.second.cast<double>();
                else if (key == "range") cfg.topo.range = item.second.cast<double>();
                else if (key == "target_density")
                    cfg.topo.target_density = item.second.cast<double>();
                else if (key == "mode")
                    cfg.topo.mode = mode_arg(item.second.cast<std::string>());
                else if (key == "topology_seed")
                    cfg.topo.seed = item.second.cast<std::uint64_t>();
                else if (key == "topology_file")
                    cfg.topo.topology_file = item.second.cast<std::string>();
                else if (key == "per") cfg.per = item.second.cast<double>();
                else if (key == "S") cfg.S = item.second.cast<int>();
                else if (key == "unsafe_S") cfg.unsafe_S = item.second.cast<bool>();
                else if (key == "K") cfg.K = item.second.cast<double>();
                else if (key == "max_attempts") cfg.max_attempts = item.second.cast<int>();
                else if (key == "dynamic_probabilities")
                    cfg.dynamic_probabilities = item.second.cast<bool>();
                else if (key == "tick_budget") cfg.tick_budget = item.second.cast<Tick>();
                else if (key == "phase2_rounds") cfg.phase2_rounds = item.second.cast<int>();
                else if (key == "to_fixed_point")
                    cfg.to_fixed_point = item.second.cast<bool>();
                else if (key == "max_rounds") cfg.max_rounds = item.second.cast<int>();
                else if (key == "seed") cfg.seed = item.second.cast<std::uint64_t>();
                else throw SimError("run_pipeline: unknown option " + key);
            }
            return metrics_dict(harness::run_pipeline(cfg));
        });
}
