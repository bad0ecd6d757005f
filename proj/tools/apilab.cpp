// apilab: generate Garnet problems, run the policy-iteration variants, sweep
// grids, compute concentrability reports and verify the bounds on traces.
//
// Exit codes: 0 ok, 1 usage, 2 I/O, 3 numerical invariant, 4 partial sweep
// failure, 5 bound violation.

#include "apilab/apilab.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace apilab;

enum Exit { ok = 0, usage = 1, io = 2, numerical = 3, partial = 4, violation = 5 };

/// Expands `--config file.json` into command-line tokens. Keys are long option
/// names ("n-coeffs" or "n_coeffs"); options already on the command line win.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    std::optional<std::string> path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].starts_with("--config=")) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (!path) return args;
    const json j = read_json_file(*path);
    if (!j.is_object()) throw ConfigError("config " + *path + ": expected a JSON object");
    auto given = [&](const std::string& flag) {
        for (const auto& a : args)
            if (a == flag || a.starts_with(flag + "=")) return true;
        return false;
    };
    auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    for (const auto& [key, value] : j.items()) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (given(flag)) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back(flag);
            continue;
        }
        args.push_back(flag);
        if (value.is_array()) {
            for (const auto& v : value) args.push_back(scalar(v));
        } else {
            args.push_back(scalar(value));
        }
    }
    return args;
}

struct ProblemArgs {
    std::string mdp_path;
    std::string garnet;
    std::uint64_t seed = 0;
    std::optional<double> gamma;
    std::string mu = "uniform";
    std::string nu = "uniform";

    void add(CLI::App* app) {
        auto* src = app->add_option("--mdp", mdp_path, "MDP JSON file written by 'generate'");
        app->add_option("--garnet", garnet, "Garnet parameters G(ns,na,b,p), generated on the fly")->excludes(src);
        app->add_option("--seed", seed, "Garnet seed");
        app->add_option("--gamma", gamma, "Discount factor (default 0.99, or the file's)");
        app->add_option("--mu", mu, "Loss distribution: uniform or a JSON file");
        app->add_option("--nu", nu, "Greedy distribution: uniform, occupancy (d_{pi*,mu}) or a JSON file");
    }
};

struct LoadedProblem {
    Problem problem;
    std::uint64_t seed;
};

Distribution load_distribution(const std::string& spec, std::size_t n) {
    if (spec == "uniform") return Distribution::uniform(n);
    const json j = read_json_file(spec);
    const Vector p = vector_from_json(j.is_object() ? j.at("probs") : j);
    if (static_cast<std::size_t>(p.size()) != n) throw ConfigError("distribution in " + spec + " has the wrong size");
    return Distribution(p);
}

LoadedProblem load_problem(const ProblemArgs& a) {
    MdpFile source = [&] {
        if (!a.mdp_path.empty()) {
            MdpFile f = load_mdp(a.mdp_path);
            if (a.gamma) f.mdp = f.mdp.with_gamma(*a.gamma);
            return f;
        }
        if (a.garnet.empty()) throw ConfigError("one of --mdp or --garnet is required");
        GarnetParams g = parse_garnet(a.garnet);
        g.seed = a.seed;
        Garnet garnet = generate_garnet(g, a.gamma.value_or(0.99));
        return MdpFile{std::move(garnet.mdp), std::move(garnet.features)};
    }();
    Mdp mdp = std::move(source.mdp);
    const std::size_t n = mdp.n_states();
    Distribution mu = load_distribution(a.mu, n);
    if (a.nu == "occupancy") {
        // nu = d_{pi*,mu} needs the optimum first.
        const OptimalSolution opt = optimal_solve(mdp);
        Distribution nu = discounted_occupancy(mdp, opt.pi_star, mu);
        return {Problem::make(std::move(mdp), std::move(mu), std::move(nu), std::move(source.features)), a.seed};
    }
    Distribution nu = load_distribution(a.nu, n);
    return {Problem::make(std::move(mdp), std::move(mu), std::move(nu), std::move(source.features)), a.seed};
}

std::size_t default_jobs() {
    if (const char* env = std::getenv("APILAB_JOBS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
        std::cerr << "ignoring invalid APILAB_JOBS=" << env << '\n';
    }
    return 1;
}

// generate ------------------------------------------------------------------

struct GenerateArgs {
    std::string garnet;
    std::uint64_t seed = 0;
    double gamma = 0.99;
    std::string out = "mdp.json";
};

int cmd_generate(const GenerateArgs& a) {
    GarnetParams g = parse_garnet(a.garnet);
    g.seed = a.seed;
    const Garnet garnet = generate_garnet(g, a.gamma);
    save_mdp(a.out, garnet.mdp, garnet.features);
    std::cout << g.label() << " seed=" << a.seed << " gamma=" << format_double(a.gamma)
              << " fingerprint=" << mdp_fingerprint(garnet.mdp) << " -> " << a.out << '\n';
    return ok;
}

// run -----------------------------------------------------------------------

struct RunArgs {
    ProblemArgs problem;
    std::string alg;
    std::size_t iters = 30;
    double rho = 0.1;
    double alpha = 0.1;
    std::string advantage = "exact";
    std::size_t max_iters = 0;
    std::string basis = "fourier";
    std::string n_coeffs;  // number, "full", or empty for the feature count
    double noise = 0.05;
    std::string noise_scale = "relative";
    std::uint64_t run_seed = 0;
    std::string pi0 = "zero";
    bool record_timing = false;
    std::string out = "trace.csv";
};

GreedyConfig greedy_from(const std::string& basis, const std::string& n_coeffs, double noise, const std::string& scale,
                         std::uint64_t seed, const Problem& p) {
    GreedyConfig g;
    g.basis = parse_basis(basis);
    const std::size_t n = p.mdp.n_states();
    if (n_coeffs == "full") {
        g.n_coeffs = n;
    } else if (n_coeffs.empty()) {
        g.n_coeffs = p.features ? static_cast<std::size_t>(p.features->cols()) : n;
    } else {
        try {
            std::size_t used = 0;
            g.n_coeffs = std::stoul(n_coeffs, &used);
            if (used != n_coeffs.size()) throw std::invalid_argument(n_coeffs);
        } catch (const std::exception&) {
            throw ConfigError("--n-coeffs must be a positive integer or 'full'");
        }
    }
    g.noise = noise;
    g.noise_scale = parse_noise_scale(scale);
    g.seed = seed;
    g.validate(n);
    return g;
}

json greedy_json(const GreedyConfig& g) {
    return json{{"basis", to_string(g.basis)},
                {"n_coeffs", g.n_coeffs},
                {"noise", g.noise},
                {"noise_scale", to_string(g.noise_scale)},
                {"seed", g.seed}};
}

AdvantageMode parse_advantage(const std::string& s) {
    if (s == "exact") return AdvantageMode::exact;
    if (s == "noisy") return AdvantageMode::noisy;
    throw ConfigError("--advantage must be exact or noisy");
}

int cmd_run(const RunArgs& a) {
    const Algorithm alg = parse_algorithm(a.alg);
    const AdvantageMode adv = parse_advantage(a.advantage);
    if (a.pi0 != "zero" && a.pi0 != "optimal") throw ConfigError("--pi0 must be zero or optimal");
    const LoadedProblem lp = load_problem(a.problem);
    const Problem& p = lp.problem;
    const GreedyConfig greedy = greedy_from(a.basis, a.n_coeffs, a.noise, a.noise_scale, lp.seed, p);
    const RunOptions opts{lp.seed, a.run_seed, a.record_timing};
    const DeterministicPolicy pi0 =
        a.pi0 == "optimal" ? p.optimum.pi_star : DeterministicPolicy::constant(p.mdp.n_states(), 0);

    RunTrace t;
    switch (alg) {
        case Algorithm::dpi: t = run_dpi(p, pi0, a.iters, greedy, opts); break;
        case Algorithm::cpi: {
            CpiConfig cfg{.rho = a.rho, .advantage_mode = adv, .max_iters = a.max_iters};
            t = run_cpi(p, pi0, cfg, greedy, opts);
            break;
        }
        case Algorithm::cpi_plus: t = run_cpi_plus(p, pi0, a.rho, a.iters, greedy, opts, adv); break;
        case Algorithm::cpi_alpha: t = run_cpi_alpha(p, pi0, a.alpha, a.iters, greedy, opts); break;
        case Algorithm::nsdpi:
            if (a.pi0 != "zero") std::cerr << "note: nsdpi starts from the empty policy; --pi0 ignored\n";
            t = run_nsdpi(p, a.iters, greedy, opts);
            break;
    }
    const TraceProvenance prov{mdp_fingerprint(p.mdp), distribution_fingerprint(p.mu), distribution_fingerprint(p.nu),
                               greedy_json(greedy)};
    save_trace(a.out, t, prov);
    std::cout << to_string(alg) << " iterations=" << t.records.back().k;
    if (t.stop_iteration) std::cout << " stop=" << *t.stop_iteration;
    std::cout << " final_loss=" << format_double(t.records.back().loss) << " -> " << a.out << '\n';
    if (t.projection_warning) std::cerr << "warning: rank-deficient projection; trailing basis columns dropped\n";
    return ok;
}

// sweep ---------------------------------------------------------------------

struct SweepArgs {
    std::string spec;
    std::size_t jobs = 1;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool full_scale = false;
    bool quiet = false;
};

int cmd_sweep(const SweepArgs& a) {
    SweepSpec spec = sweep_spec_from_json(read_json_file(a.spec));
    if (a.full_scale) spec = full_scale(std::move(spec));
    if (!a.out.empty()) spec.out_dir = a.out;
    if (a.seed) spec.seed = *a.seed;
    const SweepResult res = run_sweep(spec, a.jobs, a.quiet ? nullptr : &std::cerr);
    write_sweep_outputs(res, spec.out_dir);
    const ExperimentFindings f = experiment_findings(res);
    std::cout << "sweep: " << res.cells.size() << " cells -> " << spec.out_dir << '\n';
    if (f.cpi_plus_runs) std::cout << "cpi-plus stops below 20 iterations: " << f.fast_stop_fraction() << '\n';
    if (f.std_cells) std::cout << "nsdpi std <= dpi std: " << f.std_fraction() << '\n';
    if (f.mdps_compared) std::cout << "cpi-alpha final mean <= dpi: " << f.mean_fraction() << '\n';
    if (!res.complete()) {
        std::cerr << "sweep: some cells failed, see sweep.json\n";
        return partial;
    }
    return ok;
}

// analyze -------------------------------------------------------------------

struct AnalyzeArgs {
    ProblemArgs problem;
    std::optional<std::size_t> horizon;
    std::string out = "report.json";
};

int cmd_analyze(const AnalyzeArgs& a) {
    const LoadedProblem lp = load_problem(a.problem);
    const Problem& p = lp.problem;
    const AnalysisReport r = analyze(p.mdp, p.optimum, p.mu, p.nu, a.horizon);
    write_json_file(a.out, analysis_to_json(r));
    const auto& c = r.coefficients;
    auto show = [](const Extended& e) { return e.is_infinite() ? std::string("inf") : format_double(e.value()); };
    std::cout << "H=" << c.horizon << " C_pistar=" << show(c.c_pistar_exact) << " C1_pistar<=" << show(c.c1_pistar.upper)
              << " C1<=" << show(c.c1.upper) << " C2<=" << show(c.c2.upper) << " -> " << a.out << '\n';
    for (const auto& o : r.ordering) {
        std::cout << "  " << o.name << ": " << (o.vacuous ? "vacuous" : o.pass ? "pass" : "FAIL") << '\n';
    }
    return all_pass(r.ordering) ? ok : violation;
}

// verify --------------------------------------------------------------------

struct VerifyArgs {
    std::string trace;
    std::string report;
    std::string out;
    std::string summary;
};

int cmd_verify(const VerifyArgs& a) {
    const LoadedTrace lt = load_trace(a.trace);
    const AnalysisReport rep = analysis_from_json(read_json_file(a.report));
    const auto& tp = lt.provenance;
    const auto& rc = rep.context;
    if (tp.mdp_fingerprint != rc.mdp_fingerprint || tp.mu_fingerprint != rc.mu_fingerprint ||
        tp.nu_fingerprint != rc.nu_fingerprint) {
        std::cerr << "verify: trace and report describe different problems (fingerprint mismatch)\n";
        return usage;
    }
    BoundReport br = verify_trace(lt.trace, rep.coefficients, rep.loss_context());
    const std::string out = a.out.empty() ? a.trace + ".bounds.csv" : a.out;
    const std::string summary = a.summary.empty() ? out + ".json" : a.summary;
    write_text_file(out, bound_report_csv(br));
    write_json_file(summary, bound_summary_json(br));
    std::cout << "rows=" << br.rows.size() << " pass=" << br.count(BoundStatus::pass)
              << " fail=" << br.count(BoundStatus::fail) << " marginal=" << br.count(BoundStatus::marginal)
              << " vacuous=" << br.count(BoundStatus::vacuous) << " -> " << out << '\n';
    for (const auto& row : br.rows) {
        if (row.status == BoundStatus::fail || row.status == BoundStatus::marginal) {
            std::cerr << to_string(row.status) << ": " << row.bound_id << " k=" << row.k << " lhs=" << format_double(row.lhs)
                      << " rhs=" << format_double(row.rhs) << '\n';
        }
    }
    return br.ok() ? ok : violation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Approximate policy iteration lab"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Generate a Garnet MDP and write it as JSON");
    g->add_option("garnet", gen.garnet, "G(ns,na,b,p)")->required();
    g->add_option("--seed", gen.seed, "Generator seed");
    g->add_option("--gamma", gen.gamma, "Discount factor");
    g->add_option("--out", gen.out, "Output path");

    RunArgs run;
    auto* r = app.add_subcommand("run", "Run one algorithm and write its trace CSV");
    run.problem.add(r);
    r->add_option("--alg", run.alg, "dpi | cpi | cpi-plus | cpi-alpha | nsdpi")->required();
    r->add_option("--iters", run.iters, "Iterations K (cpi uses --max-iters)");
    r->add_option("--rho", run.rho, "CPI threshold rho");
    r->add_option("--alpha", run.alpha, "CPI(alpha) step");
    r->add_option("--advantage", run.advantage, "exact | noisy");
    r->add_option("--max-iters", run.max_iters, "CPI safety cap (0 = default)");
    r->add_option("--basis", run.basis, "fourier | random | identity");
    r->add_option("--n-coeffs", run.n_coeffs, "Basis size, or 'full'");
    r->add_option("--noise", run.noise, "Noise amplitude iota");
    r->add_option("--noise-scale", run.noise_scale, "relative | absolute");
    r->add_option("--run-seed", run.run_seed, "Run substream seed");
    r->add_option("--pi0", run.pi0, "Initial policy: zero | optimal");
    r->add_flag("--record-timing", run.record_timing, "Fill the wallclock_ms column");
    r->add_option("--out", run.out, "Trace CSV path (header JSON goes next to it)");

    SweepArgs sw;
    sw.jobs = default_jobs();
    auto* s = app.add_subcommand("sweep", "Run a grid sweep from a JSON spec");
    s->add_option("spec", sw.spec, "Sweep spec JSON")->required();
    s->add_option("--jobs", sw.jobs, "Worker threads (default $APILAB_JOBS or 1)")->check(CLI::PositiveNumber);
    s->add_option("--out", sw.out, "Output directory (overrides the spec)");
    s->add_option("--seed", sw.seed, "Base seed (overrides the spec)");
    s->add_flag("--full-scale", sw.full_scale, "Use the published 100/200-state grid with 30 x 30 runs");
    s->add_flag("--quiet", sw.quiet, "No progress lines");

    AnalyzeArgs an;
    auto* a = app.add_subcommand("analyze", "Compute concentrability coefficients");
    an.problem.add(a);
    a->add_option("--horizon", an.horizon, "Truncation horizon H (default: tails below 1e-6)");
    a->add_option("--out", an.out, "Report JSON path");

    VerifyArgs ve;
    auto* v = app.add_subcommand("verify", "Check a trace against the bounds");
    v->add_option("--trace", ve.trace, "Trace CSV")->required();
    v->add_option("--report", ve.report, "Report JSON from 'analyze'")->required();
    v->add_option("--out", ve.out, "Bound report CSV (default <trace>.bounds.csv)");
    v->add_option("--summary", ve.summary, "Summary JSON (default <out>.json)");

    std::string config_path;  // consumed by expand_config, listed for --help
    for (auto* sub : {g, r, s, a, v}) sub->add_option("--config", config_path, "JSON file with option values; flags win");

    std::vector<std::string> args;
    try {
        args = expand_config(argc, argv);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return io;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    }
    std::vector<char*> cargs;
    for (auto& x : args) cargs.push_back(x.data());

    try {
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::FileError& e) {
        std::cerr << e.what() << '\n';
        return io;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    try {
        if (*g) return cmd_generate(gen);
        if (*r) return cmd_run(run);
        if (*s) return cmd_sweep(sw);
        if (*a) return cmd_analyze(an);
        if (*v) return cmd_verify(ve);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return io;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return io;
    }
    return usage;
}
