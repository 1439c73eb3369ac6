#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tdmasim/dslr.hpp"
#include "tdmasim/rdtdma.hpp"
#include "tdmasim/topology.hpp"
#include "tdmasim/types.hpp"

namespace tdmasim::harness {

struct TopologySpec {
    std::string topology_file;    // when set, load instead of generating
    int n = 50;
    double area_w = 250.0;
    double area_h = 250.0;
    double range = 60.0;
    double target_density = 0.0;  // mean |N2| target; > 0 bisects the range
    TxMode mode = TxMode::Broadcast;
    std::uint64_t seed = 1;
};

struct ExperimentConfig {
    TopologySpec topo;
    // channel
    double per = 0.0;
    bool collisions = true;
    // phase 1
    int S = 0;             // 0 = max|N2|+1
    bool unsafe_S = false; // allow S below the safe bound
    double K = 0.25;
    int max_attempts = 3;
    bool dynamic_probabilities = false;
    bool vs_wait_slot_index = false;
    Tick tick_budget = 0;
    // phase 2
    int phase2_rounds = 40;
    bool to_fixed_point = false;
    int max_rounds = 2000;
    bool verify_rounds = true;
    // master seed for the run (channel + node streams)
    std::uint64_t seed = 1;
};

ExperimentConfig config_from_json(const std::string& text);  // missing keys keep defaults
std::string config_to_json(const ExperimentConfig& cfg);

// Deterministic: positions depend on the seed only, so bisecting the range against
// a mean-|N2| target converges to the same value on every run.
double bisect_range_for_density(int n, double area_w, double area_h, double target,
                                std::uint64_t seed);

Topology build_topology(const TopologySpec& spec);

struct RunMetrics {
    std::uint64_t seed = 0;
    std::string status = "ok";  // ok | timeout | deadlock | error:<msg>
    // topology
    int n = 0;
    double range = 0.0;
    TxMode mode = TxMode::Broadcast;
    double density_mean = 0.0;
    int density_max = 0;
    int S = 0;
    int delta = 0;
    double per = 0.0;
    bool dynamic = false;
    // phase 1
    Tick phase1_ticks = 0;
    int phase1_rounds_max = 0;
    double phase1_rounds_mean = 0.0;
    double msgs_req = 0, msgs_carrier = 0, msgs_ind = 0, msgs_reject = 0, msgs_adv = 0;
    double msgs_per_node = 0;  // all kinds, averaged over nodes
    // phase 2
    SlotId input_sl = 0;
    int phase2_rounds_run = 0;
    int phase2_moves = 0;
    SlotId final_sl = 0;
    std::optional<int> fixed_point_round;
    bool feasible_every_round = false;
    // baselines
    int delta_plus_1 = 0;
    SlotId greedy_sl = 0;

    std::vector<dslr::RoundStat> trajectory;  // kept out of the sweep CSV
};

// Phase 1 -> feasibility check -> phase 2 with per-round verification -> metrics.
RunMetrics run_pipeline(const ExperimentConfig& cfg);

struct SweepCell {
    std::string name;
    ExperimentConfig cfg;
    std::vector<std::uint64_t> seeds;  // overrides cfg.seed per run
};

struct SweepResult {
    std::vector<std::string> cells;
    std::vector<RunMetrics> rows;          // cell-major, seed order
    std::vector<std::size_t> row_cell;     // row index -> cell index
    std::string to_csv() const;            // per-run rows + median/iqr aggregates
};

// Cells x seeds run concurrently on `parallelism` workers; output is ordered by
// (cell, seed), independent of scheduling. Failures become status rows.
SweepResult sweep(const std::vector<SweepCell>& cells, int parallelism);

// file formats
std::string schedule_to_text(const Schedule& s);               // "node,slot" lines
Schedule schedule_from_text(const std::string& text);
std::string trajectory_to_csv(const std::vector<dslr::RoundStat>& rows);

// deterministic numeric formatting used by every CSV writer
std::string fmt_double(double x);

double median(std::vector<double> v);
double iqr(std::vector<double> v);

}  // namespace tdmasim::harness
