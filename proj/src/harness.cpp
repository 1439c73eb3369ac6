#include "tdmasim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "tdmasim/oracle.hpp"
#include <nlohmann/json.hpp>

namespace tdmasim::harness {

using nlohmann::json;

ExperimentConfig config_from_json(const std::string& text) {
    json doc = json::parse(text);
    ExperimentConfig cfg;
    auto get = [&doc](const char* key, auto& into) {
        if (doc.contains(key)) into = doc.at(key).get<std::decay_t<decltype(into)>>();
    };
    get("topology_file", cfg.topo.topology_file);
    get("n", cfg.topo.n);
    get("area_w", cfg.topo.area_w);
    get("area_h", cfg.topo.area_h);
    get("range", cfg.topo.range);
    get("target_density", cfg.topo.target_density);
    if (doc.contains("mode")) cfg.topo.mode = tx_mode_from_string(doc.at("mode"));
    get("topology_seed", cfg.topo.seed);
    get("per", cfg.per);
    get("collisions", cfg.collisions);
    get("S", cfg.S);
    get("unsafe_S", cfg.unsafe_S);
    get("K", cfg.K);
    get("max_attempts", cfg.max_attempts);
    get("dynamic_probabilities", cfg.dynamic_probabilities);
    get("vs_wait_slot_index", cfg.vs_wait_slot_index);
    get("tick_budget", cfg.tick_budget);
    get("phase2_rounds", cfg.phase2_rounds);
    get("to_fixed_point", cfg.to_fixed_point);
    get("max_rounds", cfg.max_rounds);
    get("verify_rounds", cfg.verify_rounds);
    get("seed", cfg.seed);
    return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json doc;
    if (!cfg.topo.topology_file.empty()) doc["topology_file"] = cfg.topo.topology_file;
    doc["n"] = cfg.topo.n;
    doc["area_w"] = cfg.topo.area_w;
    doc["area_h"] = cfg.topo.area_h;
    doc["range"] = cfg.topo.range;
    doc["target_density"] = cfg.topo.target_density;
    doc["mode"] = to_string(cfg.topo.mode);
    doc["topology_seed"] = cfg.topo.seed;
    doc["per"] = cfg.per;
    doc["collisions"] = cfg.collisions;
    doc["S"] = cfg.S;
    doc["unsafe_S"] = cfg.unsafe_S;
    doc["K"] = cfg.K;
    doc["max_attempts"] = cfg.max_attempts;
    doc["dynamic_probabilities"] = cfg.dynamic_probabilities;
    doc["vs_wait_slot_index"] = cfg.vs_wait_slot_index;
    doc["tick_budget"] = cfg.tick_budget;
    doc["phase2_rounds"] = cfg.phase2_rounds;
    doc["to_fixed_point"] = cfg.to_fixed_point;
    doc["max_rounds"] = cfg.max_rounds;
    doc["verify_rounds"] = cfg.verify_rounds;
    doc["seed"] = cfg.seed;
    return doc.dump(2);
}

double bisect_range_for_density(int n, double area_w, double area_h, double target,
                                std::uint64_t seed) {
    target = std::min(target, static_cast<double>(n - 1));
    double lo = 1.0, hi = std::sqrt(area_w * area_w + area_h * area_h);
    for (int it = 0; it < 48; ++it) {
        double mid = 0.5 * (lo + hi);
        Topology t = Topology::generate_random(n, area_w, area_h, mid, seed,
                                               TxMode::Broadcast);
        double d = t.mean_two_hop_degree();
        if (d < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

Topology build_topology(const TopologySpec& spec) {
    if (!spec.topology_file.empty()) {
        std::FILE* f = std::fopen(spec.topology_file.c_str(), "rb");
        if (!f) throw SimError("cannot open topology file: " + spec.topology_file);
        std::string text;
        char buf[4096];
        std::size_t got;
        while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, got);
        std::fclose(f);
        return Topology::from_json(text);
    }
    double range = spec.range;
    if (spec.target_density > 0)
        range = bisect_range_for_density(spec.n, spec.area_w, spec.area_h,
                                         spec.target_density, spec.seed);
    return Topology::generate_random(spec.n, spec.area_w, spec.area_h, range, spec.seed,
                                     spec.mode);
}

RunMetrics run_pipeline(const ExperimentConfig& cfg) {
    Topology topo = build_topology(cfg.topo);
    RunMetrics m;
    m.seed = cfg.seed;
    m.n = topo.n;
    m.range = topo.range;
    m.mode = topo.mode;
    m.density_mean = topo.mean_two_hop_degree();
    m.density_max = topo.max_two_hop_degree();
    m.per = cfg.per;
    m.dynamic = cfg.dynamic_probabilities;

    const int safe_S = m.density_max + 1;
    m.S = cfg.S > 0 ? cfg.S : safe_S;
    if (m.S < safe_S && !cfg.unsafe_S)
        throw SimError("S=" + std::to_string(m.S) + " below the safe bound " +
                       std::to_string(safe_S) + " (pass unsafe_S to override)");

    InterferenceGraph ig = interference_graph(topo);
    m.delta = ig.delta;
    m.delta_plus_1 = ig.delta + 1;
    m.greedy_sl = oracle::greedy_coloring(ig).length();

    rdtdma::Config p1;
    p1.S = m.S;
    p1.K = cfg.K;
    p1.max_attempts = cfg.max_attempts;
    p1.dynamic_probabilities = cfg.dynamic_probabilities;
    p1.vs_wait_slot_index = cfg.vs_wait_slot_index;
    p1.tick_budget = cfg.tick_budget;
    p1.seed = derive_seed(cfg.seed, "phase1-nodes");
    ChannelConfig ch1{cfg.per, cfg.collisions, derive_seed(cfg.seed, "phase1-channel")};

    auto r1 = rdtdma::run_phase1(topo, p1, ch1);
    m.phase1_ticks = r1.convergence_tick;
    m.phase1_rounds_max = r1.rounds_max;
    m.phase1_rounds_mean = r1.rounds_mean;
    if (topo.n > 0) {
        m.msgs_req = static_cast<double>(r1.totals.req) / topo.n;
        m.msgs_carrier = static_cast<double>(r1.totals.carrier) / topo.n;
        m.msgs_ind = static_cast<double>(r1.totals.ind) / topo.n;
        m.msgs_reject = static_cast<double>(r1.totals.reject) / topo.n;
        m.msgs_adv = static_cast<double>(r1.totals.adv) / topo.n;
        m.msgs_per_node = static_cast<double>(r1.totals.total()) / topo.n;
    }
    if (r1.status == rdtdma::Phase1Status::Timeout) {
        m.status = "timeout";
        return m;
    }
    if (r1.status == rdtdma::Phase1Status::Deadlock) {
        m.status = "deadlock";
        return m;
    }

    auto rep = oracle::verify_feasible(r1.schedule, ig);
    if (!rep.ok) throw SimError("phase-1 output infeasible (protocol bug)");
    m.input_sl = r1.schedule.length();

    dslr::Config p2;
    p2.rounds = cfg.phase2_rounds;
    p2.to_fixed_point = cfg.to_fixed_point;
    p2.max_rounds = cfg.max_rounds;
    p2.verify = cfg.verify_rounds;
    ChannelConfig ch2{cfg.per, cfg.collisions, derive_seed(cfg.seed, "phase2-channel")};

    auto r2 = dslr::run_phase2(topo, r1.schedule, p2, ch2);
    m.phase2_rounds_run = r2.rounds_run;
    m.final_sl = r2.final_schedule.length();
    m.fixed_point_round = r2.fixed_point_round;
    m.feasible_every_round = true;  // violations throw inside run_phase2
    for (const auto& row : r2.trajectory) m.phase2_moves += row.moves;
    m.trajectory = std::move(r2.trajectory);
    return m;
}

// ---- CSV ---------------------------------------------------------------------------

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return buf;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

double iqr(std::vector<double> v) {
    if (v.size() < 2) return 0.0;
    std::sort(v.begin(), v.end());
    auto rank = [&v](double q) {
        std::size_t idx = static_cast<std::size_t>(std::ceil(q * v.size()));
        if (idx == 0) idx = 1;
        return v[std::min(idx - 1, v.size() - 1)];
    };
    return rank(0.75) - rank(0.25);
}

namespace {

const char* kCsvHeader =
    "cell,seed,status,mode,n,range,density_mean,density_max,S,delta,per,dynamic,"
    "phase1_ticks,phase1_rounds_max,phase1_rounds_mean,msgs_req,msgs_carrier,msgs_ind,"
    "msgs_reject,msgs_adv,msgs_per_node,input_sl,phase2_rounds,phase2_moves,final_sl,"
    "fixed_point_round,delta_plus_1,greedy_sl,feasible_every_round";

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n') c = ';';
    return s;
}

void append_row(std::ostringstream& os, const std::string& cell, const std::string& seed_col,
                const RunMetrics& m) {
    os << sanitize(cell) << ',' << seed_col << ',' << sanitize(m.status) << ','
       << to_string(m.mode) << ',' << m.n << ',' << fmt_double(m.range) << ','
       << fmt_double(m.density_mean) << ',' << m.density_max << ',' << m.S << ',' << m.delta
       << ',' << fmt_double(m.per) << ',' << (m.dynamic ? 1 : 0) << ',' << m.phase1_ticks << ','
       << m.phase1_rounds_max << ',' << fmt_double(m.phase1_rounds_mean) << ','
       << fmt_double(m.msgs_req) << ',' << fmt_double(m.msgs_carrier) << ','
       << fmt_double(m.msgs_ind) << ',' << fmt_double(m.msgs_reject) << ','
       << fmt_double(m.msgs_adv) << ',' << fmt_double(m.msgs_per_node) << ',' << m.input_sl
       << ',' << m.phase2_rounds_run << ',' << m.phase2_moves << ',' << m.final_sl << ','
       << (m.fixed_point_round ? std::to_string(*m.fixed_point_round) : std::string("-"))
       << ',' << m.delta_plus_1 << ',' << m.greedy_sl << ','
       << (m.feasible_every_round ? 1 : 0) << '\n';
}

}  // namespace

std::string SweepResult::to_csv() const {
    std::ostringstream os;
    os << kCsvHeader << '\n';
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<const RunMetrics*> cell_rows;
        for (std::size_t r = 0; r < rows.size(); ++r)
            if (row_cell[r] == c) {
                append_row(os, cells[c], std::to_string(rows[r].seed), rows[r]);
                cell_rows.push_back(&rows[r]);
            }
        // aggregate rows over successful runs
        std::vector<const RunMetrics*> ok_rows;
        for (auto* m : cell_rows)
            if (m->status == "ok") ok_rows.push_back(m);
        if (ok_rows.empty()) continue;
        auto stat_row = [&](const char* label, auto fold) {
            RunMetrics agg = *ok_rows.front();
            agg.status = "ok:" + std::to_string(ok_rows.size()) + "/" +
                         std::to_string(cell_rows.size());
            auto collect = [&ok_rows](auto getter) {
                std::vector<double> v;
                v.reserve(ok_rows.size());
                for (auto* m : ok_rows) v.push_back(getter(*m));
                return v;
            };
            agg.range = fold(collect([](const RunMetrics& m) { return m.range; }));
            agg.density_mean = fold(collect([](const RunMetrics& m) { return m.density_mean; }));
            agg.density_max = static_cast<int>(
                fold(collect([](const RunMetrics& m) { return double(m.density_max); })));
            agg.phase1_ticks = static_cast<Tick>(
                fold(collect([](const RunMetrics& m) { return double(m.phase1_ticks); })));
            agg.phase1_rounds_max = static_cast<int>(
                fold(collect([](const RunMetrics& m) { return double(m.phase1_rounds_max); })));
            agg.phase1_rounds_mean =
                fold(collect([](const RunMetrics& m) { return m.phase1_rounds_mean; }));
            agg.msgs_req = fold(collect([](const RunMetrics& m) { return m.msgs_req; }));
            agg.msgs_carrier = fold(collect([](const RunMetrics& m) { return m.msgs_carrier; }));
            agg.msgs_ind = fold(collect([](const RunMetrics& m) { return m.msgs_ind; }));
            agg.msgs_reject = fold(collect([](const RunMetrics& m) { return m.msgs_reject; }));
            agg.msgs_adv = fold(collect([](const RunMetrics& m) { return m.msgs_adv; }));
            agg.msgs_per_node = fold(collect([](const RunMetrics& m) { return m.msgs_per_node; }));
            agg.input_sl = static_cast<SlotId>(
                fold(collect([](const RunMetrics& m) { return double(m.input_sl); })));
            agg.phase2_rounds_run = static_cast<int>(
                fold(collect([](const RunMetrics& m) { return double(m.phase2_rounds_run); })));
            agg.phase2_moves = static_cast<int>(
                fold(collect([](const RunMetrics& m) { return double(m.phase2_moves); })));
            agg.final_sl = static_cast<SlotId>(
                fold(collect([](const RunMetrics& m) { return double(m.final_sl); })));
            agg.fixed_point_round.reset();
            append_row(os, cells[c], label, agg);
        };
        stat_row("median", [](std::vector<double> v) { return median(std::move(v)); });
        stat_row("iqr", [](std::vector<double> v) { return iqr(std::move(v)); });
    }
    return os.str();
}

SweepResult sweep(const std::vector<SweepCell>& cells, int parallelism) {
    SweepResult out;
    struct Task {
        std::size_t cell;
        ExperimentConfig cfg;
    };
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        out.cells.push_back(cells[c].name);
        for (std::uint64_t seed : cells[c].seeds) {
            Task t{c, cells[c].cfg};
            t.cfg.seed = seed;
            tasks.push_back(std::move(t));
        }
    }
    out.rows.resize(tasks.size());
    out.row_cell.resize(tasks.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t k = next.fetch_add(1);
            if (k >= tasks.size()) return;
            out.row_cell[k] = tasks[k].cell;
            try {
                out.rows[k] = run_pipeline(tasks[k].cfg);
            } catch (const std::exception& e) {
                RunMetrics m;
                m.seed = tasks[k].cfg.seed;
                m.status = std::string("error:") + e.what();
                out.rows[k] = std::move(m);
            }
        }
    };
    int workers = std::max(1, parallelism);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return out;
}

std::string schedule_to_text(const Schedule& s) {
    std::ostringstream os;
    for (NodeId i = 0; i < s.n(); ++i) os << i << ',' << s.slot[i] << '\n';
    return os.str();
}

Schedule schedule_from_text(const std::string& text) {
    std::vector<std::pair<NodeId, SlotId>> entries;
    std::istringstream is(text);
    std::string line;
    NodeId max_node = -1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw SimError("schedule file: expected node,slot");
        NodeId node = std::stoi(line.substr(0, comma));
        SlotId slot = std::stoi(line.substr(comma + 1));
        entries.emplace_back(node, slot);
        max_node = std::max(max_node, node);
    }
    Schedule s(max_node + 1);
    for (auto [node, slot] : entries) s.slot[node] = slot;
    return s;
}

std::string trajectory_to_csv(const std::vector<dslr::RoundStat>& rows) {
    std::ostringstream os;
    os << "round,schedule_length,moves_this_round\n";
    for (const auto& r : rows)
        os << r.round << ',' << r.schedule_length << ',' << r.moves << '\n';
    return os.str();
}

}  // namespace tdmasim::harness
