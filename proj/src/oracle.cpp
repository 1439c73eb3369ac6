#include "tdmasim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tdmasim/rng.hpp"

namespace tdmasim::oracle {

FeasibilityReport verify_feasible(const Schedule& s, const InterferenceGraph& g) {
    FeasibilityReport rep;
    if (s.n() != g.n) throw SimError("verify_feasible: schedule/graph size mismatch");
    if (!s.complete()) throw SimError("verify_feasible: incomplete assignment");
    for (NodeId i = 0; i < g.n; ++i)
        for (NodeId j : g.adj[i])
            if (j > i && s.slot[i] == s.slot[j]) rep.violations.emplace_back(i, j);
    rep.ok = rep.violations.empty();
    return rep;
}

Schedule greedy_coloring(const InterferenceGraph& g, std::vector<NodeId> order) {
    if (order.empty()) {
        order.resize(g.n);
        for (NodeId i = 0; i < g.n; ++i) order[i] = i;
    }
    Schedule s(g.n);
    std::vector<char> used(g.n + 2, 0);
    for (NodeId u : order) {
        for (NodeId v : g.adj[u])
            if (s.slot[v] > 0) used[s.slot[v]] = 1;
        SlotId c = 1;
        while (used[c]) ++c;
        s.slot[u] = c;
        for (NodeId v : g.adj[u])
            if (s.slot[v] > 0) used[s.slot[v]] = 0;
    }
    return s;
}

namespace {

bool colorable_with(const InterferenceGraph& g, const std::vector<NodeId>& order, int k,
                    std::vector<int>& color, std::size_t idx, int max_used) {
    if (idx == order.size()) return true;
    NodeId u = order[idx];
    // symmetry pruning: a fresh color is tried at most once
    int limit = std::min(k, max_used + 1);
    for (int c = 1; c <= limit; ++c) {
        bool ok = true;
        for (NodeId v : g.adj[u])
            if (color[v] == c) {
                ok = false;
                break;
            }
        if (!ok) continue;
        color[u] = c;
        if (colorable_with(g, order, k, color, idx + 1, std::max(max_used, c))) return true;
        color[u] = 0;
    }
    return false;
}

}  // namespace

int brute_force_optimum(const InterferenceGraph& g, int max_n) {
    if (g.n > max_n) throw SimError("brute_force_optimum: graph too large");
    if (g.n == 0) return 0;
    // highest-degree-first ordering tightens the search
    std::vector<NodeId> order(g.n);
    for (NodeId i = 0; i < g.n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
        return g.adj[a].size() != g.adj[b].size() ? g.adj[a].size() > g.adj[b].size() : a < b;
    });
    std::vector<int> color(g.n, 0);
    for (int k = 1; k <= g.n; ++k) {
        std::fill(color.begin(), color.end(), 0);
        if (colorable_with(g, order, k, color, 0, 0)) return k;
    }
    return g.n;
}

bool slot_free_at(const Topology& t, const Schedule& s, NodeId i, SlotId slot) {
    std::set<NodeId> blockers(t.neighbors[i].begin(), t.neighbors[i].end());
    for (NodeId k : t.neighbors[i]) blockers.insert(t.senders[k].begin(), t.senders[k].end());
    for (NodeId k : t.receivers[i]) blockers.insert(t.neighbors[k].begin(), t.neighbors[k].end());
    blockers.erase(i);
    for (NodeId j : blockers)
        if (s.slot[j] == slot) return false;
    return true;
}

SlotId first_free_at(const Topology& t, const Schedule& s, NodeId i) {
    for (SlotId c = 1; c < s.slot[i]; ++c)
        if (slot_free_at(t, s, i, c)) return c;
    return kNoSlot;
}

bool is_fixed_point(const Topology& t, const Schedule& s) {
    for (NodeId i = 0; i < t.n; ++i)
        if (first_free_at(t, s, i) != kNoSlot) return false;
    return true;
}

// ---- closed-form analytics ---------------------------------------------------

double q_single_hop(int S, int m) {
    if (m < 0 || m >= S) throw SimError("q_single_hop: need 0 <= m < S");
    const int f = S - m;
    if (f == 1) return 1.0;  // last node, last slot
    return std::pow(1.0 - 1.0 / f, f - 1);
}

double q_min(int S) {
    if (S < 2) throw SimError("q_min: need S >= 2");
    const double s = static_cast<double>(S);
    return 1.0 - std::pow((4.0 * s - 1.0) / (4.0 * s), s - 2.0) *
                     std::pow((2.0 * s - 1.0) / (2.0 * s), 2.0);
}

double expected_rounds_bound(int S) { return 1.0 / q_min(S); }

double expected_time_bound(int S, double t_cs, double t_req) {
    return (t_cs + t_req + S) / q_min(S);
}

double expected_max_rounds_bound(int S, int n) {
    if (n < 1) throw SimError("expected_max_rounds_bound: need n >= 1");
    const double mu = 1.0 - q_min(S);
    return 1.0 - std::log(static_cast<double>(n)) / std::log(mu);
}

double dslr_moves_bound(int S) {
    if (S < 1) throw SimError("dslr_moves_bound: need S >= 1");
    double h = 0.0;
    for (int l = 1; l <= S - 1; ++l) h += 1.0 / l;
    return h;
}

double dslr_moves_exact(int S) {
    if (S < 1) throw SimError("dslr_moves_exact: need S >= 1");
    // E[X_1] = 0; E[X_k] = 1 + (1/(k-1)) * sum_{l<k} E[X_l]
    std::vector<double> e(S + 1, 0.0);
    double prefix = 0.0;
    for (int k = 2; k <= S; ++k) {
        prefix += e[k - 1];
        e[k] = 1.0 + prefix / (k - 1);
    }
    return e[S];
}

double dslr_runtime_bound(int n, int S, int D, double p) {
    if (p < 0.0 || p >= 1.0) throw SimError("dslr_runtime_bound: need 0 <= p < 1");
    return std::log(static_cast<double>(n)) * D / std::pow(1.0 - p, 4.0 * S);
}

// ---- contention matrix --------------------------------------------------------

ContentionMatrix ContentionMatrix::uniform(int S) {
    ContentionMatrix m;
    m.S = S;
    m.b.assign(S, std::vector<std::uint8_t>(S, 1));
    return m;
}

std::vector<int> ContentionMatrix::beta() const {
    std::vector<int> out(S, 0);
    for (int i = 0; i < S; ++i)
        for (int s = 0; s < S; ++s) out[i] += b[i][s];
    return out;
}

std::vector<int> ContentionMatrix::alpha() const {
    std::vector<int> out(S, 0);
    for (int i = 1; i < S; ++i)
        for (int s = 0; s < S; ++s) out[s] += b[i][s];
    return out;
}

double q_of_matrix(const ContentionMatrix& m) {
    const auto beta = m.beta();
    if (beta[0] == 0) throw SimError("q_of_matrix: tagged row is empty");
    double q = 0.0;
    for (int s = 0; s < m.S; ++s) {
        if (!m.b[0][s]) continue;
        double term = 1.0 / beta[0];
        for (int j = 1; j < m.S; ++j) {
            if (beta[j] == 0) continue;  // absent contender
            term *= 1.0 - static_cast<double>(m.b[j][s]) / beta[j];
        }
        q += term;
    }
    return q;
}

ContentionMatrix bmin_matrix(int S) {
    if (S < 2) throw SimError("bmin_matrix: need S >= 2");
    ContentionMatrix m;
    m.S = S;
    m.b.assign(S, std::vector<std::uint8_t>(S, 0));
    for (int s = 0; s < S; ++s) m.b[0][s] = 1;
    if (S == 2) {
        m.b[1][0] = m.b[1][1] = 1;
        return m;
    }
    // rows 2..S take column pairs (L1[k], L2[k]) with L1 = [1,3,4,..,S],
    // L2 = [3,4,..,S,2]; columns 1 and 2 end with one entry, the rest with two.
    std::vector<int> l1{0};
    for (int c = 2; c < S; ++c) l1.push_back(c);
    std::vector<int> l2;
    for (int c = 2; c < S; ++c) l2.push_back(c);
    l2.push_back(1);
    for (int i = 1; i < S; ++i) {
        m.b[i][l1[i - 1]] = 1;
        m.b[i][l2[i - 1]] = 1;
    }
    return m;
}

namespace {

bool all_beta_two(const ContentionMatrix& m) {
    const auto beta = m.beta();
    for (int i = 1; i < m.S; ++i)
        if (beta[i] != 2) return false;
    return true;
}

bool minimizer_structure_ok(const ContentionMatrix& m) {
    if (!all_beta_two(m)) return false;
    const auto alpha = m.alpha();
    int ones = 0, twos = 0;
    for (int v : alpha) {
        if (v == 1)
            ++ones;
        else if (v == 2)
            ++twos;
        else
            return false;
    }
    return ones == 2 && twos == m.S - 2;
}

}  // namespace

BminReport verify_bmin_structure(int S, std::uint64_t seed, long long samples) {
    if (S < 3) throw SimError("verify_bmin_structure: need S >= 3");
    BminReport rep;
    rep.S = S;
    rep.theorem_value = static_cast<double>(S + 2) / (4.0 * S);
    rep.eq16_value = q_min(S);

    const double eps = 1e-12;
    if (S <= 7) {
        rep.exhaustive = true;
        // enumerate admissible row supports: any subset with >= 2 elements
        std::vector<int> supports;
        for (int mask = 0; mask < (1 << S); ++mask)
            if (__builtin_popcount(static_cast<unsigned>(mask)) >= 2) supports.push_back(mask);

        ContentionMatrix m;
        m.S = S;
        m.b.assign(S, std::vector<std::uint8_t>(S, 0));
        for (int s = 0; s < S; ++s) m.b[0][s] = 1;

        std::vector<std::size_t> idx(S - 1, 0);
        rep.min_q = 1e300;
        rep.all_beta2_minimizers_structured = true;
        while (true) {
            for (int i = 1; i < S; ++i) {
                int mask = supports[idx[i - 1]];
                for (int s = 0; s < S; ++s) m.b[i][s] = (mask >> s) & 1;
            }
            ++rep.matrices_checked;
            double q = q_of_matrix(m);
            if (q < rep.min_q - eps) {
                rep.min_q = q;
                rep.minimizer_count = 1;
                rep.structured_minimizer_found = minimizer_structure_ok(m);
                rep.all_beta2_minimizers_structured =
                    !all_beta_two(m) || minimizer_structure_ok(m);
                rep.example_minimizer = m;
            } else if (q < rep.min_q + eps) {
                ++rep.minimizer_count;
                if (minimizer_structure_ok(m)) {
                    rep.structured_minimizer_found = true;
                    rep.example_minimizer = m;
                } else if (all_beta_two(m)) {
                    rep.all_beta2_minimizers_structured = false;
                }
            }
            // odometer over rows 2..S
            int pos = 0;
            while (pos < S - 1) {
                if (++idx[pos] < supports.size()) break;
                idx[pos] = 0;
                ++pos;
            }
            if (pos == S - 1) break;
        }
    } else {
        // sampled: random admissible matrices plus perturbations of the structured one
        rep.exhaustive = false;
        Rng rng(seed);
        ContentionMatrix base = bmin_matrix(S);
        rep.min_q = q_of_matrix(base);
        rep.minimizer_count = 1;
        rep.structured_minimizer_found = minimizer_structure_ok(base);
        rep.all_beta2_minimizers_structured = true;
        rep.example_minimizer = base;
        for (long long k = 0; k < samples; ++k) {
            ContentionMatrix m = base;
            int flips = 1 + rng.below_int(3);
            for (int f = 0; f < flips; ++f) {
                int i = 1 + rng.below_int(S - 1);
                int s = rng.below_int(S);
                m.b[i][s] ^= 1;
            }
            bool admissible = true;
            for (int i = 1; i < S && admissible; ++i) {
                int beta = 0;
                for (int s = 0; s < S; ++s) beta += m.b[i][s];
                admissible = beta >= 2;
            }
            if (!admissible) continue;
            ++rep.matrices_checked;
            double q = q_of_matrix(m);
            if (q < rep.min_q - eps) {
                rep.min_q = q;
                rep.minimizer_count = 1;
                rep.structured_minimizer_found = minimizer_structure_ok(m);
                rep.example_minimizer = m;
            }
        }
    }
    rep.min_matches_theorem = std::fabs(rep.min_q - rep.theorem_value) < 1e-9;
    rep.eq16_matches_min = std::fabs(rep.eq16_value - rep.min_q) < 1e-9;
    return rep;
}

// ---- Monte Carlo ----------------------------------------------------------------

double mc_single_hop_success(int S, int m, long long trials, std::uint64_t seed) {
    const int f = S - m;
    if (f < 1) throw SimError("mc_single_hop_success: need m < S");
    if (f == 1) return 1.0;
    Rng rng(seed);
    long long hits = 0;
    for (long long t = 0; t < trials; ++t) {
        int mine = rng.below_int(f);
        bool alone = true;
        for (int j = 1; j < f; ++j)
            if (rng.below_int(f) == mine) {
                alone = false;
                break;  // remaining draws are irrelevant to this trial
            }
        if (alone) ++hits;
    }
    return static_cast<double>(hits) / trials;
}

double mc_matrix_success(const ContentionMatrix& m, long long trials, std::uint64_t seed) {
    Rng rng(seed);
    const auto beta = m.beta();
    // per-row supports for O(1) sampling
    std::vector<std::vector<int>> support(m.S);
    for (int i = 0; i < m.S; ++i)
        for (int s = 0; s < m.S; ++s)
            if (m.b[i][s]) support[i].push_back(s);
    long long hits = 0;
    for (long long t = 0; t < trials; ++t) {
        int mine = support[0][rng.below_int(beta[0])];
        bool alone = true;
        for (int j = 1; j < m.S; ++j) {
            if (beta[j] == 0) continue;
            if (support[j][rng.below_int(beta[j])] == mine) alone = false;
        }
        if (alone) ++hits;
    }
    return static_cast<double>(hits) / trials;
}

McMoments mc_dslr_moves(int S, long long trials, std::uint64_t seed) {
    Rng rng(seed);
    double sum = 0.0, sumsq = 0.0;
    for (long long t = 0; t < trials; ++t) {
        int state = S;
        int moves = 0;
        while (state > 1) {
            state = 1 + rng.below_int(state - 1);
            ++moves;
        }
        sum += moves;
        sumsq += static_cast<double>(moves) * moves;
    }
    McMoments mm;
    mm.trials = trials;
    mm.mean = sum / trials;
    double var = sumsq / trials - mm.mean * mm.mean;
    mm.stddev = var > 0 ? std::sqrt(var) : 0.0;
    return mm;
}

double mc_single_hop_rounds_to_success(int S, long long trials, std::uint64_t seed) {
    Rng rng(seed);
    double total_rounds = 0.0;
    std::vector<int> pick(S);
    std::vector<int> count(S);
    for (long long t = 0; t < trials; ++t) {
        std::vector<char> scheduled(S, 0);
        std::vector<char> slot_taken(S, 0);
        int rounds = 0;
        while (!scheduled[0]) {
            ++rounds;
            std::vector<int> free_slots;
            for (int s = 0; s < S; ++s)
                if (!slot_taken[s]) free_slots.push_back(s);
            std::fill(count.begin(), count.end(), 0);
            for (int i = 0; i < S; ++i) {
                if (scheduled[i]) continue;
                pick[i] = free_slots[rng.below_int(static_cast<int>(free_slots.size()))];
                ++count[pick[i]];
            }
            for (int i = 0; i < S; ++i) {
                if (scheduled[i]) continue;
                if (count[pick[i]] == 1) {
                    scheduled[i] = 1;
                    slot_taken[pick[i]] = 1;
                }
            }
        }
        total_rounds += rounds;
    }
    return total_rounds / trials;
}

}  // namespace tdmasim::oracle
