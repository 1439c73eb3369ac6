#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tdmasim/types.hpp"

namespace tdmasim {

// Immutable after construction; safe to share read-only across concurrent runs.
//
// neighbors (N_i) is symmetric and irreflexive. receivers (R_i) are the intended
// receivers: all of N_i in broadcast mode, a single neighbor in unicast mode.
// senders (S_i) is derived: j in S_i <=> i in R_j.
struct Topology {
    int n = 0;
    TxMode mode = TxMode::Broadcast;
    double range = 0.0;                              // radio range in meters (geometric only)
    std::vector<std::array<double, 2>> positions;    // empty for hand-built fixtures
    std::vector<std::vector<NodeId>> neighbors;      // sorted per node
    std::vector<std::vector<NodeId>> receivers;      // sorted, subset of neighbors
    std::vector<std::vector<NodeId>> senders;        // derived, sorted
    std::vector<NodeId> isolated_unicast;            // generation warnings: |N_i|=0 in unicast

    const std::vector<NodeId>& n1(NodeId i) const { return neighbors[i]; }

    bool adjacent(NodeId i, NodeId j) const;

    // N2_i = (union of N_j over j in N_i) ∪ N_i − {i}, sorted.
    std::vector<NodeId> two_hop(NodeId i) const;

    // Rank of j in sorted N_i (0-based). Throws if j is not a neighbor of i.
    int order_of(NodeId i, NodeId j) const;

    int max_two_hop_degree() const;
    double mean_two_hop_degree() const;

    // Longest finite hop distance between any two nodes (max over components).
    int hop_diameter() const;

    std::string to_json() const;                     // {n, range, mode, positions, receivers}
    static Topology from_json(const std::string& text);

    static Topology generate_random(int n, double area_w, double area_h, double range,
                                    std::uint64_t seed, TxMode mode);

    // Fixture builder: explicit undirected edges; broadcast receivers are filled in,
    // unicast receivers may be given explicitly (one per node, -1 for none).
    static Topology from_edges(int n, const std::vector<std::pair<NodeId, NodeId>>& edges,
                               TxMode mode,
                               const std::vector<NodeId>& unicast_receiver = {});

    void validate() const;  // symmetry, irreflexivity, R ⊆ N, mode constraints

private:
    void finish();          // sort, derive senders, validate
};

// Conflict graph: edge(i,j) iff node i and node j cannot take the same slot:
//   N_i ∩ R_j ≠ ∅  ∨  N_j ∩ R_i ≠ ∅  ∨  j ∈ N_i
// (a transmitting node cannot simultaneously receive, so adjacent nodes always conflict;
// in broadcast mode the relation coincides with the two-hop neighborhood).
struct InterferenceGraph {
    int n = 0;
    std::vector<std::vector<NodeId>> adj;  // sorted per node
    int delta = 0;                         // max vertex degree

    bool has_edge(NodeId i, NodeId j) const;
    std::vector<std::pair<NodeId, NodeId>> edges() const;  // i<j, sorted
};

InterferenceGraph interference_graph(const Topology& t);

}  // namespace tdmasim
