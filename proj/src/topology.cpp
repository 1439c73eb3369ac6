#include "tdmasim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "tdmasim/rng.hpp"
#include <nlohmann/json.hpp>

namespace tdmasim {

using nlohmann::json;

bool Topology::adjacent(NodeId i, NodeId j) const {
    const auto& ns = neighbors[i];
    return std::binary_search(ns.begin(), ns.end(), j);
}

std::vector<NodeId> Topology::two_hop(NodeId i) const {
    if (i < 0 || i >= n) throw SimError("two_hop: invalid node id");
    std::set<NodeId> acc(neighbors[i].begin(), neighbors[i].end());
    for (NodeId j : neighbors[i])
        acc.insert(neighbors[j].begin(), neighbors[j].end());
    acc.erase(i);
    return std::vector<NodeId>(acc.begin(), acc.end());
}

int Topology::order_of(NodeId i, NodeId j) const {
    const auto& ns = neighbors[i];
    auto it = std::lower_bound(ns.begin(), ns.end(), j);
    if (it == ns.end() || *it != j) throw SimError("order_of: not a neighbor");
    return static_cast<int>(it - ns.begin());
}

int Topology::max_two_hop_degree() const {
    int best = 0;
    for (NodeId i = 0; i < n; ++i)
        best = std::max(best, static_cast<int>(two_hop(i).size()));
    return best;
}

double Topology::mean_two_hop_degree() const {
    if (n == 0) return 0.0;
    double total = 0.0;
    for (NodeId i = 0; i < n; ++i) total += static_cast<double>(two_hop(i).size());
    return total / n;
}

int Topology::hop_diameter() const {
    int best = 0;
    std::vector<int> dist(n);
    for (NodeId src = 0; src < n; ++src) {
        std::fill(dist.begin(), dist.end(), -1);
        std::deque<NodeId> q{src};
        dist[src] = 0;
        while (!q.empty()) {
            NodeId u = q.front();
            q.pop_front();
            for (NodeId v : neighbors[u])
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
        }
        for (int d : dist) best = std::max(best, d);
    }
    return best;
}

void Topology::validate() const {
    if (n < 0) throw SimError("topology: negative n");
    if (static_cast<int>(neighbors.size()) != n || static_cast<int>(receivers.size()) != n)
        throw SimError("topology: size mismatch");
    for (NodeId i = 0; i < n; ++i) {
        for (NodeId j : neighbors[i]) {
            if (j < 0 || j >= n || j == i) throw SimError("topology: bad neighbor id");
            if (!adjacent(j, i)) throw SimError("topology: asymmetric adjacency");
        }
        for (NodeId j : receivers[i])
            if (!adjacent(i, j)) throw SimError("topology: receiver outside N_i");
        if (mode == TxMode::Broadcast && receivers[i] != neighbors[i])
            throw SimError("topology: broadcast requires R_i = N_i");
        if (mode == TxMode::Unicast && !neighbors[i].empty() && receivers[i].size() != 1)
            throw SimError("topology: unicast requires |R_i| = 1");
    }
}

void Topology::finish() {
    for (auto& v : neighbors) std::sort(v.begin(), v.end());
    for (auto& v : receivers) std::sort(v.begin(), v.end());
    senders.assign(n, {});
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j : receivers[i]) senders[j].push_back(i);
    for (auto& v : senders) std::sort(v.begin(), v.end());
    isolated_unicast.clear();
    if (mode == TxMode::Unicast)
        for (NodeId i = 0; i < n; ++i)
            if (neighbors[i].empty()) isolated_unicast.push_back(i);
    validate();
}

Topology Topology::generate_random(int n, double area_w, double area_h, double range,
                                   std::uint64_t seed, TxMode mode) {
    if (n < 1) throw SimError("generate_random: n must be >= 1");
    if (range <= 0 || area_w <= 0 || area_h <= 0)
        throw SimError("generate_random: dimensions must be positive");

    Topology t;
    t.n = n;
    t.mode = mode;
    t.range = range;

    // Positions depend on the seed only, so the same seed with a different range
    // yields the same point set (lets the harness bisect range for a density target).
    Rng pos_rng(derive_seed(seed, "topo-pos"));
    t.positions.resize(n);
    for (int i = 0; i < n; ++i) {
        t.positions[i][0] = pos_rng.real01() * area_w;
        t.positions[i][1] = pos_rng.real01() * area_h;
    }

    t.neighbors.assign(n, {});
    const double r2 = range * range;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double dx = t.positions[i][0] - t.positions[j][0];
            double dy = t.positions[i][1] - t.positions[j][1];
            if (dx * dx + dy * dy <= r2) {
                t.neighbors[i].push_back(j);
                t.neighbors[j].push_back(i);
            }
        }
    for (auto& v : t.neighbors) std::sort(v.begin(), v.end());

    t.receivers.assign(n, {});
    if (mode == TxMode::Broadcast) {
        t.receivers = t.neighbors;
    } else {
        Rng recv_rng(derive_seed(seed, "topo-recv"));
        for (int i = 0; i < n; ++i) {
            if (t.neighbors[i].empty()) continue;  // warning, empty R_i
            int k = recv_rng.below_int(static_cast<int>(t.neighbors[i].size()));
            t.receivers[i].push_back(t.neighbors[i][k]);
        }
    }
    t.finish();
    return t;
}

Topology Topology::from_edges(int n, const std::vector<std::pair<NodeId, NodeId>>& edges,
                              TxMode mode, const std::vector<NodeId>& unicast_receiver) {
    Topology t;
    t.n = n;
    t.mode = mode;
    t.neighbors.assign(n, {});
    for (auto [a, b] : edges) {
        t.neighbors[a].push_back(b);
        t.neighbors[b].push_back(a);
    }
    for (auto& v : t.neighbors) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    t.receivers.assign(n, {});
    if (mode == TxMode::Broadcast) {
        t.receivers = t.neighbors;
    } else {
        for (NodeId i = 0; i < n; ++i) {
            NodeId r = i < static_cast<NodeId>(unicast_receiver.size()) ? unicast_receiver[i]
                                                                        : kNoNode;
            if (r == kNoNode) {
                if (!t.neighbors[i].empty()) t.receivers[i].push_back(t.neighbors[i][0]);
            } else {
                t.receivers[i].push_back(r);
            }
        }
    }
    t.finish();
    return t;
}

std::string Topology::to_json() const {
    json doc;
    doc["n"] = n;
    doc["range"] = range;
    doc["mode"] = to_string(mode);
    json pos = json::array();
    for (const auto& p : positions) pos.push_back(json::array({p[0], p[1]}));
    doc["positions"] = pos;
    json recv = json::array();
    for (const auto& r : receivers) recv.push_back(r);
    doc["receivers"] = recv;
    return doc.dump();
}

Topology Topology::from_json(const std::string& text) {
    json doc = json::parse(text);
    Topology t;
    t.n = doc.at("n").get<int>();
    t.range = doc.at("range").get<double>();
    t.mode = tx_mode_from_string(doc.at("mode").get<std::string>());
    t.positions.resize(t.n);
    const auto& pos = doc.at("positions");
    if (static_cast<int>(pos.size()) != t.n) throw SimError("topology file: positions size");
    for (int i = 0; i < t.n; ++i) {
        t.positions[i][0] = pos[i][0].get<double>();
        t.positions[i][1] = pos[i][1].get<double>();
    }
    // adjacency is derived from positions + range; receivers come from the file
    t.neighbors.assign(t.n, {});
    const double r2 = t.range * t.range;
    for (int i = 0; i < t.n; ++i)
        for (int j = i + 1; j < t.n; ++j) {
            double dx = t.positions[i][0] - t.positions[j][0];
            double dy = t.positions[i][1] - t.positions[j][1];
            if (dx * dx + dy * dy <= r2) {
                t.neighbors[i].push_back(j);
                t.neighbors[j].push_back(i);
            }
        }
    t.receivers.assign(t.n, {});
    const auto& recv = doc.at("receivers");
    if (static_cast<int>(recv.size()) != t.n) throw SimError("topology file: receivers size");
    for (int i = 0; i < t.n; ++i)
        for (const auto& r : recv[i]) t.receivers[i].push_back(r.get<NodeId>());
    t.finish();
    return t;
}

namespace {

bool sorted_intersect(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib)
            ++ia;
        else if (*ib < *ia)
            ++ib;
        else
            return true;
    }
    return false;
}

}  // namespace

bool InterferenceGraph::has_edge(NodeId i, NodeId j) const {
    const auto& a = adj[i];
    return std::binary_search(a.begin(), a.end(), j);
}

std::vector<std::pair<NodeId, NodeId>> InterferenceGraph::edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j : adj[i])
            if (j > i) out.emplace_back(i, j);
    return out;
}

InterferenceGraph interference_graph(const Topology& t) {
    InterferenceGraph g;
    g.n = t.n;
    g.adj.assign(t.n, {});
    for (NodeId i = 0; i < t.n; ++i)
        for (NodeId j = i + 1; j < t.n; ++j) {
            bool conflict = t.adjacent(i, j) ||
                            sorted_intersect(t.neighbors[i], t.receivers[j]) ||
                            sorted_intersect(t.neighbors[j], t.receivers[i]);
            if (conflict) {
                g.adj[i].push_back(j);
                g.adj[j].push_back(i);
            }
        }
    for (auto& v : g.adj) g.delta = std::max(g.delta, static_cast<int>(v.size()));
    return g;
}

}  // namespace tdmasim
