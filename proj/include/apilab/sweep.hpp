#pragma once

// Grid sweeps over Garnet parameters: many MDPs per cell, many runs per MDP,
// every listed algorithm per run. Work is spread over a thread pool; results
// land in pre-indexed slots so outputs do not depend on scheduling.

#include "apilab/algorithms.hpp"
#include "apilab/garnet.hpp"
#include "apilab/mdp_io.hpp"
#include "apilab/svg.hpp"
#include "apilab/trace_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace apilab {

struct AlgorithmSpec {
    Algorithm algorithm = Algorithm::dpi;
    double rho = 0.1;    // cpi, cpi-plus
    double alpha = 0.1;  // cpi-alpha
    AdvantageMode advantage = AdvantageMode::exact;
};

struct SweepSpec {
    std::vector<std::size_t> n_states{50};
    std::vector<std::size_t> n_actions{2};
    std::vector<std::size_t> branching{1};
    std::vector<std::size_t> n_features{5};
    std::vector<GarnetParams> explicit_cells;  // replaces the grid when non-empty
    std::size_t n_mdps = 1;
    std::size_t n_runs = 1;
    std::size_t iterations = 30;
    double gamma = 0.99;
    BasisKind basis = BasisKind::fourier;
    std::optional<std::size_t> n_coeffs;  // defaults to the cell's feature count
    double noise = 0.05;
    NoiseScale noise_scale = NoiseScale::relative;
    std::vector<AlgorithmSpec> algorithms;
    std::uint64_t seed = 0;
    std::string out_dir = "sweep_out";
    std::optional<std::pair<double, double>> y_range;

    /// Cells of the grid with duplicate values removed, sorted by (ns, na, b, p).
    std::vector<GarnetParams> cells() const {
        std::vector<GarnetParams> out = explicit_cells;
        if (out.empty()) {
            for (auto ns : n_states)
                for (auto na : n_actions)
                    for (auto b : branching)
                        for (auto p : n_features) out.push_back({ns, na, b, p, 0});
        }
        auto key = [](const GarnetParams& g) { return std::tuple(g.n_states, g.n_actions, g.branching, g.n_features); };
        std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
        out.erase(std::unique(out.begin(), out.end(), [&](const auto& a, const auto& b) { return key(a) == key(b); }),
                  out.end());
        return out;
    }

    void validate() const {
        if (n_mdps < 1 || n_runs < 1 || iterations < 1) throw ConfigError("sweep: counts must be >= 1");
        if (algorithms.empty()) throw ConfigError("sweep: no algorithms listed");
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("sweep: gamma must lie in (0,1)");
        const auto cs = cells();
        if (cs.empty()) throw ConfigError("sweep: empty grid");
        for (const auto& c : cs) {
            c.validate();
            GreedyConfig g{basis, n_coeffs.value_or(c.n_features), noise, noise_scale, seed};
            g.validate(c.n_states);
            if (basis == BasisKind::random_features && g.n_coeffs > c.n_features) {
                throw ConfigError("sweep: n_coeffs exceeds the feature count of " + c.label());
            }
        }
    }
};

inline std::string cell_label(const GarnetParams& g) {
    return "ns" + std::to_string(g.n_states) + "_na" + std::to_string(g.n_actions) + "_b" + std::to_string(g.branching) +
           "_p" + std::to_string(g.n_features);
}

/// The published grid: ns in {100,200}, na in {2,5}, b in {1, ns/50}, p = ns/10, 30 x 30.
inline SweepSpec full_scale(SweepSpec spec) {
    spec.explicit_cells.clear();
    for (std::size_t ns : {100, 200})
        for (std::size_t na : {2, 5})
            for (std::size_t b : {std::size_t{1}, ns / 50}) spec.explicit_cells.push_back({ns, na, b, ns / 10, 0});
    spec.n_mdps = 30;
    spec.n_runs = 30;
    return spec;
}

namespace detail {

template <typename T>
std::vector<T> json_list(const json& j, const char* key, std::vector<T> fallback) {
    if (!j.contains(key)) return fallback;
    if (j.at(key).is_array()) return j.at(key).get<std::vector<T>>();
    return {j.at(key).get<T>()};
}

}  // namespace detail

inline AlgorithmSpec algorithm_spec_from_json(const json& j) {
    AlgorithmSpec a;
    if (j.is_string()) {
        a.algorithm = parse_algorithm(j.get<std::string>());
        return a;
    }
    a.algorithm = parse_algorithm(j.at("name").get<std::string>());
    a.rho = j.value("rho", a.rho);
    a.alpha = j.value("alpha", a.alpha);
    if (j.contains("advantage")) {
        const auto s = j.at("advantage").get<std::string>();
        if (s != "exact" && s != "noisy") throw ConfigError("sweep: advantage must be exact or noisy");
        a.advantage = s == "noisy" ? AdvantageMode::noisy : AdvantageMode::exact;
    }
    return a;
}

inline json algorithm_spec_to_json(const AlgorithmSpec& a) {
    json j{{"name", to_string(a.algorithm)}};
    if (a.algorithm == Algorithm::cpi || a.algorithm == Algorithm::cpi_plus) {
        j["rho"] = a.rho;
        j["advantage"] = a.advantage == AdvantageMode::noisy ? "noisy" : "exact";
    }
    if (a.algorithm == Algorithm::cpi_alpha) j["alpha"] = a.alpha;
    return j;
}

inline SweepSpec sweep_spec_from_json(const json& j) {
    try {
        SweepSpec s;
        const json grid = j.value("grid", json::object());
        s.n_states = detail::json_list<std::size_t>(grid, "n_states", s.n_states);
        s.n_actions = detail::json_list<std::size_t>(grid, "n_actions", s.n_actions);
        s.branching = detail::json_list<std::size_t>(grid, "branching", s.branching);
        s.n_features = detail::json_list<std::size_t>(grid, "n_features", s.n_features);
        if (j.contains("cells")) {
            for (const auto& c : j.at("cells")) {
                GarnetParams g = parse_garnet(c.get<std::string>());
                s.explicit_cells.push_back(g);
            }
        }
        s.n_mdps = j.value("n_mdps", s.n_mdps);
        s.n_runs = j.value("n_runs", s.n_runs);
        s.iterations = j.value("iterations", s.iterations);
        s.gamma = j.value("gamma", s.gamma);
        s.seed = j.value("seed", s.seed);
        s.out_dir = j.value("out", s.out_dir);
        const json g = j.value("greedy", json::object());
        s.basis = parse_basis(g.value("basis", to_string(s.basis)));
        if (g.contains("n_coeffs") && !g.at("n_coeffs").is_null()) s.n_coeffs = g.at("n_coeffs").get<std::size_t>();
        s.noise = g.value("noise", s.noise);
        s.noise_scale = parse_noise_scale(g.value("noise_scale", to_string(s.noise_scale)));
        if (j.contains("algorithms")) {
            for (const auto& a : j.at("algorithms")) s.algorithms.push_back(algorithm_spec_from_json(a));
        }
        if (j.contains("y_range") && !j.at("y_range").is_null()) {
            const auto r = j.at("y_range").get<std::vector<double>>();
            if (r.size() != 2 || !(r[0] < r[1])) throw ConfigError("sweep: y_range must be [lo, hi] with lo < hi");
            s.y_range = std::pair(r[0], r[1]);
        }
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed sweep spec: ") + e.what());
    }
}

inline json sweep_spec_to_json(const SweepSpec& s) {
    json cells = json::array();
    for (const auto& c : s.cells()) cells.push_back(c.label());
    json algs = json::array();
    for (const auto& a : s.algorithms) algs.push_back(algorithm_spec_to_json(a));
    json j{{"cells", cells},
           {"n_mdps", s.n_mdps},
           {"n_runs", s.n_runs},
           {"iterations", s.iterations},
           {"gamma", s.gamma},
           {"seed", s.seed},
           {"greedy",
            {{"basis", to_string(s.basis)},
             {"n_coeffs", s.n_coeffs ? json(*s.n_coeffs) : json(nullptr)},
             {"noise", s.noise},
             {"noise_scale", to_string(s.noise_scale)}}},
           {"algorithms", algs}};
    if (s.y_range) j["y_range"] = {s.y_range->first, s.y_range->second};
    return j;
}

/// Runs `body(i)` for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) body(i);
        });
    }
}

struct MdpOutcome {
    std::uint64_t mdp_seed = 0;
    std::string error;                         // empty on success
    std::vector<std::vector<RunTrace>> runs;  // [algorithm][run]
};

struct CellOutcome {
    GarnetParams params;
    std::vector<MdpOutcome> mdps;

    bool ok() const {
        return std::all_of(mdps.begin(), mdps.end(), [](const MdpOutcome& m) { return m.error.empty(); });
    }
};

struct SweepResult {
    SweepSpec spec;
    std::vector<CellOutcome> cells;

    bool complete() const {
        return std::all_of(cells.begin(), cells.end(), [](const CellOutcome& c) { return c.ok(); });
    }
};

inline std::uint64_t sweep_mdp_seed(std::uint64_t base, const GarnetParams& c, std::size_t m) {
    return derive_seed(base, {stream_tag::mdp, c.n_states, c.n_actions, c.branching, c.n_features, m});
}

inline std::uint64_t sweep_run_seed(std::uint64_t base, const GarnetParams& c, std::size_t m, std::size_t r) {
    return derive_seed(base, {stream_tag::run, c.n_states, c.n_actions, c.branching, c.n_features, m, r});
}

inline RunTrace run_algorithm(const Problem& p, const AlgorithmSpec& a, std::size_t K, const GreedyConfig& greedy,
                              const RunOptions& opts) {
    const DeterministicPolicy pi0 = DeterministicPolicy::constant(p.mdp.n_states(), 0);
    switch (a.algorithm) {
        case Algorithm::dpi: return run_dpi(p, pi0, K, greedy, opts);
        case Algorithm::cpi: {
            CpiConfig cfg{.rho = a.rho, .advantage_mode = a.advantage, .max_iters = K};
            return run_cpi(p, pi0, cfg, greedy, opts);
        }
        case Algorithm::cpi_plus: return run_cpi_plus(p, pi0, a.rho, K, greedy, opts, a.advantage);
        case Algorithm::cpi_alpha: return run_cpi_alpha(p, pi0, a.alpha, K, greedy, opts);
        case Algorithm::nsdpi: return run_nsdpi(p, K, greedy, opts);
    }
    throw ConfigError("unknown algorithm");
}

/// Executes the whole grid. Progress lines go to `log` when given.
inline SweepResult run_sweep(const SweepSpec& spec, std::size_t jobs, std::ostream* log = nullptr) {
    spec.validate();
    SweepResult result;
    result.spec = spec;
    for (const auto& c : spec.cells()) result.cells.push_back({c, std::vector<MdpOutcome>(spec.n_mdps)});

    const std::size_t per_cell = spec.n_mdps;
    std::mutex log_mutex;
    parallel_for(result.cells.size() * per_cell, jobs, [&](std::size_t task) {
        CellOutcome& cell = result.cells[task / per_cell];
        const std::size_t m = task % per_cell;
        MdpOutcome& out = cell.mdps[m];
        const GarnetParams& c = cell.params;
        out.mdp_seed = sweep_mdp_seed(spec.seed, c, m);
        try {
            GarnetParams gp = c;
            gp.seed = out.mdp_seed;
            Garnet g = generate_garnet(gp, spec.gamma);
            const auto dists = default_distributions(g.mdp);
            const Problem p = Problem::make(std::move(g.mdp), dists.mu, dists.nu, std::move(g.features));
            const GreedyConfig greedy{spec.basis, spec.n_coeffs.value_or(c.n_features), spec.noise, spec.noise_scale,
                                      spec.seed};
            out.runs.assign(spec.algorithms.size(), {});
            for (std::size_t a = 0; a < spec.algorithms.size(); ++a) {
                for (std::size_t r = 0; r < spec.n_runs; ++r) {
                    const RunOptions opts{out.mdp_seed, sweep_run_seed(spec.seed, c, m, r), false};
                    out.runs[a].push_back(run_algorithm(p, spec.algorithms[a], spec.iterations, greedy, opts));
                }
            }
        } catch (const std::exception& e) {
            out.error = e.what();
            out.runs.clear();
        }
        if (log) {
            std::lock_guard lock(log_mutex);
            *log << cell_label(c) << " mdp " << m << (out.error.empty() ? " done" : " FAILED: " + out.error) << '\n'
                 << std::flush;
        }
    });
    return result;
}

/// Loss per iteration 0..K; runs that stopped early carry their last loss forward.
inline std::vector<double> loss_curve(const RunTrace& t, std::size_t K) {
    std::vector<double> curve(K + 1, t.records.empty() ? 0.0 : t.records.back().loss);
    for (const auto& r : t.records) {
        if (r.k <= K) curve[r.k] = r.loss;
    }
    // Fill any gap after the last record with the last recorded value.
    for (std::size_t k = 1; k <= K; ++k) {
        const bool recorded = std::any_of(t.records.begin(), t.records.end(), [k](const auto& r) { return r.k == k; });
        if (!recorded) curve[k] = curve[k - 1];
    }
    return curve;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd out;
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return out;
}

/// Per-MDP statistics over runs: [iteration] -> (mean, std).
inline std::vector<MeanStd> per_mdp_stats(const std::vector<RunTrace>& runs, std::size_t K) {
    std::vector<std::vector<double>> by_iter(K + 1);
    for (const auto& t : runs) {
        const auto curve = loss_curve(t, K);
        for (std::size_t k = 0; k <= K; ++k) by_iter[k].push_back(curve[k]);
    }
    std::vector<MeanStd> out;
    for (const auto& xs : by_iter) out.push_back(mean_std(xs));
    return out;
}

/// The qualitative findings of the published experiments, measured on a sweep.
struct ExperimentFindings {
    std::size_t cpi_plus_runs = 0;
    std::size_t cpi_plus_fast_stops = 0;  // stopped within fewer than 20 iterations
    std::size_t std_cells = 0;
    std::size_t nsdpi_std_le_dpi = 0;
    std::size_t mdps_compared = 0;
    std::size_t cpi_alpha_mean_le_dpi = 0;

    static double fraction(std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }
    double fast_stop_fraction() const { return fraction(cpi_plus_fast_stops, cpi_plus_runs); }
    double std_fraction() const { return fraction(nsdpi_std_le_dpi, std_cells); }
    double mean_fraction() const { return fraction(cpi_alpha_mean_le_dpi, mdps_compared); }
};

inline ExperimentFindings experiment_findings(const SweepResult& res) {
    ExperimentFindings f;
    const auto& algs = res.spec.algorithms;
    auto index_of = [&](Algorithm a) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < algs.size(); ++i)
            if (algs[i].algorithm == a) return i;
        return std::nullopt;
    };
    const auto dpi = index_of(Algorithm::dpi), nsdpi = index_of(Algorithm::nsdpi);
    const auto plus = index_of(Algorithm::cpi_plus), cpia = index_of(Algorithm::cpi_alpha);
    const std::size_t K = res.spec.iterations;
    for (const auto& cell : res.cells) {
        for (const auto& m : cell.mdps) {
            if (!m.error.empty()) continue;
            if (plus) {
                for (const auto& t : m.runs[*plus]) {
                    ++f.cpi_plus_runs;
                    if (t.stop_iteration && *t.stop_iteration < 20) ++f.cpi_plus_fast_stops;
                }
            }
            if (dpi && nsdpi) {
                const auto sd = per_mdp_stats(m.runs[*dpi], K), sn = per_mdp_stats(m.runs[*nsdpi], K);
                for (std::size_t k = 1; k <= K; ++k) {
                    ++f.std_cells;
                    if (sn[k].std <= sd[k].std) ++f.nsdpi_std_le_dpi;
                }
            }
            if (dpi && cpia) {
                ++f.mdps_compared;
                if (per_mdp_stats(m.runs[*cpia], K)[K].mean <= per_mdp_stats(m.runs[*dpi], K)[K].mean) {
                    ++f.cpi_alpha_mean_le_dpi;
                }
            }
        }
    }
    return f;
}

inline json findings_to_json(const ExperimentFindings& f) {
    return json{{"cpi_plus_runs", f.cpi_plus_runs},
                {"cpi_plus_stops_below_20", f.cpi_plus_fast_stops},
                {"cpi_plus_fast_stop_fraction", f.fast_stop_fraction()},
                {"mdp_iteration_cells", f.std_cells},
                {"nsdpi_std_le_dpi", f.nsdpi_std_le_dpi},
                {"nsdpi_std_le_dpi_fraction", f.std_fraction()},
                {"mdps_compared", f.mdps_compared},
                {"cpi_alpha_final_mean_le_dpi", f.cpi_alpha_mean_le_dpi},
                {"cpi_alpha_final_mean_le_dpi_fraction", f.mean_fraction()}};
}

/// Writes summary.csv, per_mdp.csv, stops.csv, traces/, plots/ and sweep.json under `dir`.
inline void write_sweep_outputs(const SweepResult& res, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "traces", ec);
    fs::create_directories(fs::path(dir) / "plots", ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

    const auto& spec = res.spec;
    const std::size_t K = spec.iterations;
    std::string summary =
        "cell,algorithm,iter,n_runs,mean_loss,std_of_mdp_means,mean_of_mdp_stds,std_of_mdp_stds\n";
    std::string per_mdp = "cell,algorithm,mdp,mdp_seed,iter,mean_loss,std_loss\n";
    std::string stops = "cell,algorithm,mdp,run,run_seed,stop_iteration,iterations_run\n";
    json cells = json::array();

    for (const auto& cell : res.cells) {
        const std::string label = cell_label(cell.params);
        json status{{"cell", label}, {"garnet", cell.params.label()}, {"complete", cell.ok()}};
        json errors = json::array();
        for (std::size_t m = 0; m < cell.mdps.size(); ++m) {
            if (!cell.mdps[m].error.empty()) errors.push_back({{"mdp", m}, {"error", cell.mdps[m].error}});
        }
        status["errors"] = errors;
        cells.push_back(status);

        std::vector<PlotSeries> mean_plot, std_plot;
        for (std::size_t a = 0; a < spec.algorithms.size(); ++a) {
            const std::string alg = to_string(spec.algorithms[a].algorithm);
            std::string traces(trace_csv_header);
            traces += '\n';
            // [iteration][mdp]
            std::vector<std::vector<double>> means(K + 1), stds(K + 1);
            std::size_t n_runs = 0;
            for (std::size_t m = 0; m < cell.mdps.size(); ++m) {
                const auto& md = cell.mdps[m];
                if (!md.error.empty()) continue;
                const auto& runs = md.runs[a];
                n_runs += runs.size();
                for (std::size_t r = 0; r < runs.size(); ++r) {
                    append_trace_rows(traces, runs[r]);
                    if (runs[r].algorithm == Algorithm::cpi || runs[r].algorithm == Algorithm::cpi_plus) {
                        stops += label + "," + alg + "," + std::to_string(m) + "," + std::to_string(r) + "," +
                                 std::to_string(runs[r].run_seed) + "," +
                                 (runs[r].stop_iteration ? std::to_string(*runs[r].stop_iteration) : std::string()) +
                                 "," + std::to_string(runs[r].records.back().k) + "\n";
                    }
                }
                const auto stats = per_mdp_stats(runs, K);
                for (std::size_t k = 0; k <= K; ++k) {
                    per_mdp += label + "," + alg + "," + std::to_string(m) + "," + std::to_string(md.mdp_seed) + "," +
                               std::to_string(k) + "," + format_double(stats[k].mean) + "," +
                               format_double(stats[k].std) + "\n";
                    means[k].push_back(stats[k].mean);
                    stds[k].push_back(stats[k].std);
                }
            }
            write_text_file((fs::path(dir) / "traces" / (label + "_" + alg + ".csv")).string(), traces);
            PlotSeries ms{alg, {}, {}, {}}, ss{alg, {}, {}, {}};
            for (std::size_t k = 0; k <= K; ++k) {
                const MeanStd mm = mean_std(means[k]), sm = mean_std(stds[k]);
                summary += label + "," + alg + "," + std::to_string(k) + "," + std::to_string(n_runs) + "," +
                           format_double(mm.mean) + "," + format_double(mm.std) + "," + format_double(sm.mean) + "," +
                           format_double(sm.std) + "\n";
                const double kd = static_cast<double>(k);
                ms.x.push_back(kd);
                ms.y.push_back(mm.mean);
                ms.band.push_back(mm.std);
                ss.x.push_back(kd);
                ss.y.push_back(sm.mean);
                ss.band.push_back(sm.std);
            }
            mean_plot.push_back(std::move(ms));
            std_plot.push_back(std::move(ss));
        }
        PlotOptions po;
        po.y_range = spec.y_range;
        po.title = cell.params.label() + ": mean loss over MDPs (band: std across MDPs)";
        po.y_label = "mu(v* - v_k)";
        write_text_file((fs::path(dir) / "plots" / (label + "_mean.svg")).string(), line_plot_svg(mean_plot, po));
        po.title = cell.params.label() + ": per-MDP std of loss (band: std across MDPs)";
        po.y_label = "std of mu(v* - v_k)";
        write_text_file((fs::path(dir) / "plots" / (label + "_std.svg")).string(), line_plot_svg(std_plot, po));
    }
    write_text_file((fs::path(dir) / "summary.csv").string(), summary);
    write_text_file((fs::path(dir) / "per_mdp.csv").string(), per_mdp);
    write_text_file((fs::path(dir) / "stops.csv").string(), stops);
    write_json_file((fs::path(dir) / "sweep.json").string(),
                    json{{"spec", sweep_spec_to_json(spec)},
                         {"cells", cells},
                         {"complete", res.complete()},
                         {"findings", findings_to_json(experiment_findings(res))}});
}

}  // namespace apilab
