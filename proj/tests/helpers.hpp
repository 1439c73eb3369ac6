#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "tdmasim/topology.hpp"
#include "tdmasim/types.hpp"

namespace tdmasim::test {

// center 0, leaves 1..4 in range of the center only
inline Topology star5(TxMode mode = TxMode::Broadcast) {
    return Topology::from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}, mode);
}

// a - b - c
inline Topology chain3(TxMode mode = TxMode::Broadcast,
                       const std::vector<NodeId>& receivers = {}) {
    return Topology::from_edges(3, {{0, 1}, {1, 2}}, mode, receivers);
}

inline double binom_sigma(double p, long long n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace tdmasim::test
