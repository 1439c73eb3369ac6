#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "tdmasim/topology.hpp"
#include "tdmasim/types.hpp"

namespace tdmasim::oracle {

// ---- feasibility / baselines -------------------------------------------------

struct FeasibilityReport {
    bool ok = true;
    std::vector<std::pair<NodeId, NodeId>> violations;  // conflicting pairs with equal slots
};

FeasibilityReport verify_feasible(const Schedule& s, const InterferenceGraph& g);

// Sequential smallest-free-color assignment in the given order (node ids).
// Empty order means natural order 0..n-1. Result is feasible with SL <= delta+1.
Schedule greedy_coloring(const InterferenceGraph& g, std::vector<NodeId> order = {});

// Exact chromatic number of the conflict graph by exhaustive search with symmetry
// pruning. Refuses n > max_n (exponential).
int brute_force_optimum(const InterferenceGraph& g, int max_n = 12);

// Ground-truth free-slot scan. A slot s is free at node i iff no node in
//   (∪_{k∈N_i} S_k) ∪ (∪_{k∈R_i} N_k) ∪ N_i
// currently holds it. Kept independent of InterferenceGraph on purpose: the two
// code paths cross-check each other in tests.
bool slot_free_at(const Topology& t, const Schedule& s, NodeId i, SlotId slot);

// Smallest free slot strictly below i's current slot; 0 if none.
SlotId first_free_at(const Topology& t, const Schedule& s, NodeId i);

// Lemma-2 condition: no node has a free slot below its own.
bool is_fixed_point(const Topology& t, const Schedule& s);

// ---- closed-form analytics ---------------------------------------------------

// Per-round success probability of a tagged node in a single-hop network with m of
// S nodes already scheduled: (1 - 1/(S-m))^(S-m-1). Convention: S-m = 1 -> 1.
double q_single_hop(int S, int m);

// Worst-case per-round success probability, 1 - ((4S-1)/4S)^(S-2) * ((2S-1)/2S)^2.
double q_min(int S);

double expected_rounds_bound(int S);                       // 1 / q_min(S)
double expected_time_bound(int S, double t_cs, double t_req);  // (t_cs+t_req+S)/q_min
double expected_max_rounds_bound(int S, int n);            // 1 - ln n / ln(1 - q_min)

// Expected moves of the uniform jump-down chain started at slot S: H_{S-1}.
double dslr_moves_bound(int S);
// Same quantity by solving the absorption linear system E[X_k] = 1 + mean(E[X_<k]).
double dslr_moves_exact(int S);
// Expected rounds to final slot: (ln n * D) / (1-p)^(4S).
double dslr_runtime_bound(int n, int S, int D, double p);

// ---- contention matrix (worst-case analysis) ---------------------------------

// Binary S x S matrix; row 1 is the tagged node. Each row's support is the set of
// slots a node still tries, with uniform probability 1/beta_i over it.
struct ContentionMatrix {
    int S = 0;
    std::vector<std::vector<std::uint8_t>> b;  // S rows of S entries

    static ContentionMatrix uniform(int S);    // all-ones
    std::vector<int> beta() const;             // per-row counts
    std::vector<int> alpha() const;            // per-column counts excluding row 1
};

// q = sum_s (b_{1,s}/beta_1) * prod_{j>=2, beta_j>0} (1 - b_{j,s}/beta_j).
double q_of_matrix(const ContentionMatrix& m);

struct BminReport {
    int S = 0;
    bool exhaustive = false;       // exhaustive over admissible matrices (S <= 7)
    long long matrices_checked = 0;
    double min_q = 0.0;
    double theorem_value = 0.0;    // (S+2)/(4S)
    double eq16_value = 0.0;       // the closed form q_min(S)
    bool min_matches_theorem = false;
    bool eq16_matches_min = false; // expected false; the two forms disagree
    long long minimizer_count = 0; // ties exist: the row-reduction argument is non-strict
    bool structured_minimizer_found = false;       // beta_i=2, two alpha=1 cols, rest alpha=2
    bool all_beta2_minimizers_structured = false;  // among beta_i=2 ties, columns always match
    ContentionMatrix example_minimizer;
};

// Admissible: row 1 all-ones, beta_i >= 2 for i >= 2 (a beta_i = 1 row means node i
// is scheduled, contradicting the all-ones tagged row). Exhaustive for S <= 7, else
// random perturbation sampling around the structured minimizer.
BminReport verify_bmin_structure(int S, std::uint64_t seed = 12345, long long samples = 20000);

// The structured minimizer itself (used by Monte Carlo cross-checks).
ContentionMatrix bmin_matrix(int S);

// ---- Monte Carlo cross-checks -------------------------------------------------

// Single-hop contention round: f = S - m contenders pick uniformly among f free
// slots; success = tagged node alone on its slot. Returns empirical frequency.
double mc_single_hop_success(int S, int m, long long trials, std::uint64_t seed);

// One contention round where every node picks per its ContentionMatrix row; returns
// the empirical frequency of the tagged node being alone on its slot.
double mc_matrix_success(const ContentionMatrix& m, long long trials, std::uint64_t seed);

struct McMoments {
    double mean = 0.0;
    double stddev = 0.0;  // of a single trial
    long long trials = 0;
};

// Empirical moments of the jump-down chain move count from start slot S.
McMoments mc_dslr_moves(int S, long long trials, std::uint64_t seed);

// Full single-hop schedule build: all S nodes contend, winners fix their slots,
// rounds repeat until the tagged node is scheduled. Returns mean rounds.
double mc_single_hop_rounds_to_success(int S, long long trials, std::uint64_t seed);

}  // namespace tdmasim::oracle
