"""Two-phase distributed TDMA scheduling: simulator, verification oracle, analytics.

Phase 1 (RD-TDMA) acquires a conflict-free slot per node by randomized
contention; phase 2 (DSLR) iteratively compacts the schedule and can be stopped
after any round with a valid schedule in hand. Everything is seeded and
deterministic.
"""

from ._core import (
    SimError,
    Topology,
    InterferenceGraph,
    generate_topology,
    topology_from_edges,
    interference_graph,
    verify_feasible,
    greedy_coloring,
    brute_force_optimum,
    first_free_slot,
    is_fixed_point,
    q_single_hop,
    q_min,
    expected_rounds_bound,
    expected_time_bound,
    expected_max_rounds_bound,
    dslr_moves_bound,
    dslr_moves_exact,
    dslr_runtime_bound,
    mc_single_hop_success,
    dslr_dtmc_moves,
    verify_bmin_structure,
    run_phase1,
    run_phase2,
    run_pipeline,
)

__all__ = [
    "SimError",
    "Topology",
    "InterferenceGraph",
    "generate_topology",
    "topology_from_edges",
    "interference_graph",
    "verify_feasible",
    "greedy_coloring",
    "brute_force_optimum",
    "first_free_slot",
    "is_fixed_point",
    "q_single_hop",
    "q_min",
    "expected_rounds_bound",
    "expected_time_bound",
    "expected_max_rounds_bound",
    "dslr_moves_bound",
    "dslr_moves_exact",
    "dslr_runtime_bound",
    "mc_single_hop_success",
    "dslr_dtmc_moves",
    "verify_bmin_structure",
    "run_phase1",
    "run_phase2",
    "run_pipeline",
]
