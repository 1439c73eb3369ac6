// tdmasim: two-phase distributed TDMA scheduling simulator.
//   topo gen      generate a random topology file
//   phase1 run    randomized slot acquisition (RD-TDMA)
//   phase2 run    anytime schedule-length reduction (DSLR)
//   pipeline run  phase 1 + verification + phase 2
//   sweep         seed/parameter sweeps to CSV
//   analytics     closed-form bounds as CSV
//   verify        check a schedule against a topology's conflict graph

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "tdmasim/harness.hpp"
#include "tdmasim/oracle.hpp"
#include <nlohmann/json.hpp>

using namespace tdmasim;
namespace hn = tdmasim::harness;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SimError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SimError("cannot write " + path);
    out << text;
}

struct PipelineFlags {
    std::string config_file;
    std::string topology_file;
    std::string mode = "broadcast";
    std::string schedule_out;
    std::string trajectory_out;
    std::string trace_out;
    hn::ExperimentConfig cfg;
};

void add_pipeline_options(CLI::App* cmd, PipelineFlags& f) {
    cmd->add_option("--config", f.config_file, "JSON config file (flags override it)");
    cmd->add_option("--topology-file", f.topology_file, "load topology instead of generating");
    cmd->add_option("--n", f.cfg.topo.n, "node count");
    cmd->add_option("--area-w", f.cfg.topo.area_w, "area width (m)");
    cmd->add_option("--area-h", f.cfg.topo.area_h, "area height (m)");
    cmd->add_option("--range", f.cfg.topo.range, "radio range (m)");
    cmd->add_option("--target-density", f.cfg.topo.target_density,
                    "mean two-hop density target (bisects range)");
    cmd->add_option("--mode", f.mode, "broadcast|unicast")
        ->check(CLI::IsMember({"broadcast", "unicast"}));
    cmd->add_option("--topology-seed", f.cfg.topo.seed, "topology generation seed");
    cmd->add_option("--per", f.cfg.per, "packet error rate")->check(CLI::Range(0.0, 1.0));
    cmd->add_flag("--no-collisions", "disable the same-tick collision model");
    cmd->add_option("--S", f.cfg.S, "frame length (0 = max|N2|+1)");
    cmd->add_flag("--unsafe-S", f.cfg.unsafe_S, "allow S below max|N2|+1");
    cmd->add_option("--K", f.cfg.K, "dynamic probability compensation constant");
    cmd->add_option("--max-attempts", f.cfg.max_attempts, "REQ transmissions before CS");
    cmd->add_flag("--dynamic", f.cfg.dynamic_probabilities, "dynamic slot probabilities");
    cmd->add_flag("--vs-wait-slot-index", f.cfg.vs_wait_slot_index,
                  "pre-REQ wait equals the chosen slot id");
    cmd->add_option("--tick-budget", f.cfg.tick_budget, "phase-1 tick budget (0 = default)");
    cmd->add_option("--phase2-rounds", f.cfg.phase2_rounds, "phase-2 rounds");
    cmd->add_flag("--to-fixed-point", f.cfg.to_fixed_point,
                  "run phase 2 until a no-move streak of diameter+1 lossless rounds");
    cmd->add_option("--max-rounds", f.cfg.max_rounds, "phase-2 round cap in fixed-point mode");
    cmd->add_option("--seed", f.cfg.seed, "run seed (channel + node streams)");
    cmd->add_option("--schedule-out", f.schedule_out, "write final schedule (node,slot lines)");
    cmd->add_option("--emit-trajectory", f.trajectory_out,
                    "write per-round CSV (round,schedule_length,moves_this_round)");
    cmd->add_option("--trace", f.trace_out, "write the event trace");
}

hn::ExperimentConfig resolve_config(CLI::App* cmd, PipelineFlags& f) {
    hn::ExperimentConfig cfg;
    if (!f.config_file.empty()) cfg = hn::config_from_json(read_file(f.config_file));
    auto take = [cmd](const char* flag, auto& dst, const auto& src) {
        if (cmd->count(flag)) dst = src;
    };
    take("--topology-file", cfg.topo.topology_file, f.topology_file);
    take("--n", cfg.topo.n, f.cfg.topo.n);
    take("--area-w", cfg.topo.area_w, f.cfg.topo.area_w);
    take("--area-h", cfg.topo.area_h, f.cfg.topo.area_h);
    take("--range", cfg.topo.range, f.cfg.topo.range);
    take("--target-density", cfg.topo.target_density, f.cfg.topo.target_density);
    if (cmd->count("--mode")) cfg.topo.mode = tx_mode_from_string(f.mode);
    take("--topology-seed", cfg.topo.seed, f.cfg.topo.seed);
    take("--per", cfg.per, f.cfg.per);
    if (cmd->count("--no-collisions")) cfg.collisions = false;
    take("--S", cfg.S, f.cfg.S);
    take("--unsafe-S", cfg.unsafe_S, f.cfg.unsafe_S);
    take("--K", cfg.K, f.cfg.K);
    take("--max-attempts", cfg.max_attempts, f.cfg.max_attempts);
    take("--dynamic", cfg.dynamic_probabilities, f.cfg.dynamic_probabilities);
    take("--vs-wait-slot-index", cfg.vs_wait_slot_index, f.cfg.vs_wait_slot_index);
    take("--tick-budget", cfg.tick_budget, f.cfg.tick_budget);
    take("--phase2-rounds", cfg.phase2_rounds, f.cfg.phase2_rounds);
    take("--to-fixed-point", cfg.to_fixed_point, f.cfg.to_fixed_point);
    take("--max-rounds", cfg.max_rounds, f.cfg.max_rounds);
    take("--seed", cfg.seed, f.cfg.seed);
    return cfg;
}

void print_metrics(const hn::RunMetrics& m) {
    std::cout << "status=" << m.status << " n=" << m.n << " mode=" << to_string(m.mode)
              << " density_mean=" << hn::fmt_double(m.density_mean) << " S=" << m.S
              << " delta+1=" << m.delta_plus_1 << "\n"
              << "phase1: ticks=" << m.phase1_ticks << " rounds_max=" << m.phase1_rounds_max
              << " msgs/node=" << hn::fmt_double(m.msgs_per_node) << " SL=" << m.input_sl
              << "\n"
              << "phase2: rounds=" << m.phase2_rounds_run << " moves=" << m.phase2_moves
              << " final_SL=" << m.final_sl << " greedy_SL=" << m.greedy_sl;
    if (m.fixed_point_round) std::cout << " fixed_point_round=" << *m.fixed_point_round;
    std::cout << "\n";
}

int run_phase2_cmd(const PipelineFlags& f, CLI::App* cmd, const std::string& schedule_in) {
    hn::ExperimentConfig cfg = resolve_config(const_cast<CLI::App*>(cmd),
                                              const_cast<PipelineFlags&>(f));
    Topology topo = hn::build_topology(cfg.topo);
    Schedule input = hn::schedule_from_text(read_file(schedule_in));
    dslr::Config p2;
    p2.rounds = cfg.phase2_rounds;
    p2.to_fixed_point = cfg.to_fixed_point;
    p2.max_rounds = cfg.max_rounds;
    ChannelConfig ch{cfg.per, cfg.collisions, derive_seed(cfg.seed, "phase2-channel")};
    dslr::Phase2Sim sim(topo, input, p2, ch);
    if (!f.trace_out.empty()) sim.engine().enable_trace(true);
    auto res = sim.run();
    std::cout << "input_SL=" << input.length() << " final_SL=" << res.final_schedule.length()
              << " rounds=" << res.rounds_run;
    if (res.fixed_point_round) std::cout << " fixed_point_round=" << *res.fixed_point_round;
    std::cout << "\n";
    if (!f.schedule_out.empty())
        write_file(f.schedule_out, hn::schedule_to_text(res.final_schedule));
    if (!f.trajectory_out.empty())
        write_file(f.trajectory_out, hn::trajectory_to_csv(res.trajectory));
    if (!f.trace_out.empty()) {
        std::ostringstream os;
        for (const auto& e : sim.engine().trace()) os << e.line() << '\n';
        write_file(f.trace_out, os.str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-phase distributed TDMA scheduling simulator"};
    app.require_subcommand(1);

    // ---- topo gen ----
    auto* topo_cmd = app.add_subcommand("topo", "topology utilities");
    topo_cmd->require_subcommand(1);
    auto* topo_gen = topo_cmd->add_subcommand("gen", "generate a random topology");
    struct {
        int n = 50;
        double area_w = 250, area_h = 250, range = 60, target_density = 0;
        std::string mode = "broadcast", out = "topology.json";
        std::uint64_t seed = 1;
    } tg;
    topo_gen->add_option("--n", tg.n, "node count")->check(CLI::PositiveNumber);
    topo_gen->add_option("--area-w", tg.area_w, "area width (m)");
    topo_gen->add_option("--area-h", tg.area_h, "area height (m)");
    topo_gen->add_option("--range", tg.range, "radio range (m)");
    topo_gen->add_option("--target-density", tg.target_density,
                         "mean two-hop density target (bisects range)");
    topo_gen->add_option("--mode", tg.mode, "broadcast|unicast")
        ->check(CLI::IsMember({"broadcast", "unicast"}));
    topo_gen->add_option("--seed", tg.seed, "generation seed");
    topo_gen->add_option("-o,--out", tg.out, "output file");

    // ---- phase1 run ----
    auto* p1_cmd = app.add_subcommand("phase1", "phase-1 protocol");
    p1_cmd->require_subcommand(1);
    auto* p1_run = p1_cmd->add_subcommand("run", "run randomized slot acquisition");
    PipelineFlags p1f;
    add_pipeline_options(p1_run, p1f);

    // ---- phase2 run ----
    auto* p2_cmd = app.add_subcommand("phase2", "phase-2 protocol");
    p2_cmd->require_subcommand(1);
    auto* p2_run = p2_cmd->add_subcommand("run", "run anytime schedule-length reduction");
    PipelineFlags p2f;
    std::string schedule_in;
    add_pipeline_options(p2_run, p2f);
    p2_run->add_option("--schedule-in", schedule_in, "input schedule (node,slot lines)")
        ->required();

    // ---- pipeline run ----
    auto* pl_cmd = app.add_subcommand("pipeline", "both phases");
    pl_cmd->require_subcommand(1);
    auto* pl_run = pl_cmd->add_subcommand("run", "phase 1 + verification + phase 2");
    PipelineFlags plf;
    add_pipeline_options(pl_run, plf);

    // ---- sweep ----
    auto* sweep_cmd = app.add_subcommand("sweep", "run a sweep described by a JSON file");
    struct {
        std::string spec_file, out = "sweep.csv";
        int jobs = 0;
    } sw;
    sweep_cmd->add_option("spec", sw.spec_file, "sweep spec: [{name, config, seeds}]")
        ->required();
    sweep_cmd->add_option("-o,--out", sw.out, "output CSV");
    sweep_cmd->add_option("--jobs", sw.jobs, "worker threads (0 = hardware)");

    // ---- analytics ----
    auto* an_cmd = app.add_subcommand("analytics", "closed-form bounds as CSV");
    struct {
        int s_min = 2, s_max = 64, n = 100, bmin = 0;
        double t_cs = 0, t_req = 1, p = 0.0;
        int d = 5;
        std::string out;
    } an;
    an_cmd->add_option("--s-min", an.s_min, "smallest S");
    an_cmd->add_option("--s-max", an.s_max, "largest S");
    an_cmd->add_option("--n", an.n, "node count for the max-rounds bound");
    an_cmd->add_option("--t-cs", an.t_cs, "contention-state time (ticks)");
    an_cmd->add_option("--t-req", an.t_req, "REQ transmission time (ticks)");
    an_cmd->add_option("--dslr-p", an.p, "HELLO loss probability for the runtime bound");
    an_cmd->add_option("--dslr-d", an.d, "hop diameter for the runtime bound");
    an_cmd->add_option("--bmin", an.bmin, "also print the minimizer report for this S");
    an_cmd->add_option("-o,--out", an.out, "output CSV (default stdout)");

    // ---- verify ----
    auto* vf_cmd = app.add_subcommand("verify", "check a schedule for conflicts");
    struct {
        std::string topology_file, schedule_file;
    } vf;
    vf_cmd->add_option("--topology-file", vf.topology_file, "topology JSON")->required();
    vf_cmd->add_option("--schedule", vf.schedule_file, "schedule (node,slot lines)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*topo_gen) {
            double range = tg.range;
            if (tg.target_density > 0)
                range = hn::bisect_range_for_density(tg.n, tg.area_w, tg.area_h,
                                                     tg.target_density, tg.seed);
            Topology t = Topology::generate_random(tg.n, tg.area_w, tg.area_h, range, tg.seed,
                                                   tx_mode_from_string(tg.mode));
            write_file(tg.out, t.to_json());
            std::cout << "n=" << t.n << " range=" << hn::fmt_double(t.range)
                      << " density_mean=" << hn::fmt_double(t.mean_two_hop_degree())
                      << " density_max=" << t.max_two_hop_degree() << " -> " << tg.out << "\n";
            for (NodeId i : t.isolated_unicast)
                std::cerr << "warning: node " << i << " is isolated (empty receiver set)\n";
            return 0;
        }
        if (*p1_run) {
            auto cfg = resolve_config(p1_run, p1f);
            Topology topo = hn::build_topology(cfg.topo);
            rdtdma::Config p1;
            p1.S = cfg.S > 0 ? cfg.S : topo.max_two_hop_degree() + 1;
            if (cfg.S > 0 && cfg.S < topo.max_two_hop_degree() + 1 && !cfg.unsafe_S)
                throw SimError("S below max|N2|+1; pass --unsafe-S to override");
            p1.K = cfg.K;
            p1.max_attempts = cfg.max_attempts;
            p1.dynamic_probabilities = cfg.dynamic_probabilities;
            p1.vs_wait_slot_index = cfg.vs_wait_slot_index;
            p1.tick_budget = cfg.tick_budget;
            p1.seed = derive_seed(cfg.seed, "phase1-nodes");
            ChannelConfig ch{cfg.per, cfg.collisions, derive_seed(cfg.seed, "phase1-channel")};
            rdtdma::Phase1Sim sim(topo, p1, ch);
            if (!p1f.trace_out.empty()) sim.engine().enable_trace(true);
            auto res = sim.run();
            std::cout << "status="
                      << (res.status == rdtdma::Phase1Status::Converged  ? "ok"
                          : res.status == rdtdma::Phase1Status::Timeout ? "timeout"
                                                                        : "deadlock")
                      << " ticks=" << res.convergence_tick << " rounds_max=" << res.rounds_max
                      << " SL=" << res.schedule.length() << "\n";
            if (!res.error.empty()) std::cerr << res.error << "\n";
            if (!p1f.schedule_out.empty() && res.status == rdtdma::Phase1Status::Converged)
                write_file(p1f.schedule_out, hn::schedule_to_text(res.schedule));
            if (!p1f.trace_out.empty()) {
                std::ostringstream os;
                for (const auto& e : sim.engine().trace()) os << e.line() << '\n';
                write_file(p1f.trace_out, os.str());
            }
            return res.status == rdtdma::Phase1Status::Converged ? 0 : 1;
        }
        if (*p2_run) return run_phase2_cmd(p2f, p2_run, schedule_in);
        if (*pl_run) {
            auto cfg = resolve_config(pl_run, plf);
            auto m = hn::run_pipeline(cfg);
            print_metrics(m);
            if (!plf.trajectory_out.empty())
                write_file(plf.trajectory_out, hn::trajectory_to_csv(m.trajectory));
            if (!plf.schedule_out.empty() && m.status == "ok" && !m.trajectory.empty())
                write_file(plf.schedule_out,
                           hn::schedule_to_text(m.trajectory.back().schedule));
            return m.status == "ok" ? 0 : 1;
        }
        if (*sweep_cmd) {
            nlohmann::json doc = nlohmann::json::parse(read_file(sw.spec_file));
            std::vector<hn::SweepCell> cells;
            for (const auto& item : doc) {
                hn::SweepCell cell;
                cell.name = item.at("name").get<std::string>();
                cell.cfg = hn::config_from_json(item.at("config").dump());
                for (const auto& s : item.at("seeds"))
                    cell.seeds.push_back(s.get<std::uint64_t>());
                cells.push_back(std::move(cell));
            }
            int jobs = sw.jobs > 0 ? sw.jobs
                                   : static_cast<int>(std::thread::hardware_concurrency());
            auto res = hn::sweep(cells, jobs);
            write_file(sw.out, res.to_csv());
            std::cout << res.rows.size() << " runs -> " << sw.out << "\n";
            return 0;
        }
        if (*an_cmd) {
            std::ostringstream os;
            os << "S,q_single_hop_fresh,q_min,expected_rounds_bound,expected_time_bound,"
                  "expected_max_rounds_bound,dslr_moves_bound,dslr_runtime_bound\n";
            for (int S = an.s_min; S <= an.s_max; ++S) {
                os << S << ',' << hn::fmt_double(oracle::q_single_hop(S, 0)) << ','
                   << hn::fmt_double(oracle::q_min(S)) << ','
                   << hn::fmt_double(oracle::expected_rounds_bound(S)) << ','
                   << hn::fmt_double(oracle::expected_time_bound(S, an.t_cs, an.t_req)) << ','
                   << hn::fmt_double(oracle::expected_max_rounds_bound(S, an.n)) << ','
                   << hn::fmt_double(oracle::dslr_moves_bound(S)) << ','
                   << hn::fmt_double(oracle::dslr_runtime_bound(an.n, S, an.d, an.p)) << '\n';
            }
            if (an.out.empty())
                std::cout << os.str();
            else
                write_file(an.out, os.str());
            if (an.bmin > 0) {
                auto rep = oracle::verify_bmin_structure(an.bmin);
                std::cout << "bmin S=" << rep.S << (rep.exhaustive ? " exhaustive" : " sampled")
                          << " checked=" << rep.matrices_checked
                          << " min_q=" << hn::fmt_double(rep.min_q) << " (S+2)/(4S)="
                          << hn::fmt_double(rep.theorem_value)
                          << " eq_closed_form=" << hn::fmt_double(rep.eq16_value)
                          << " structured_minimizer=" << (rep.structured_minimizer_found ? 1 : 0)
                          << "\n";
            }
            return 0;
        }
        if (*vf_cmd) {
            Topology topo = Topology::from_json(read_file(vf.topology_file));
            Schedule sched = hn::schedule_from_text(read_file(vf.schedule_file));
            auto rep = oracle::verify_feasible(sched, interference_graph(topo));
            if (rep.ok) {
                std::cout << "feasible SL=" << sched.length() << "\n";
                return 0;
            }
            std::cout << "infeasible: " << rep.violations.size() << " conflicting pairs\n";
            for (auto [a, b] : rep.violations)
                std::cout << "  nodes " << a << "," << b << " share slot " << sched.slot[a]
                          << "\n";
            return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
