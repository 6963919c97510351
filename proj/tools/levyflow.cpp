// levyflow: forward solves of the space-fractional advection-dispersion
// equation, drift-parameter fitting against plume concentration data, and
// inverse-CDF sampling of the associated process.
//
// Exit codes: 0 success, 1 computation failure, 2 usage/config error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "levyflow/core.hpp"
#include "levyflow/fit.hpp"
#include "levyflow/io.hpp"
#include "levyflow/sampling.hpp"
#include "levyflow/solver.hpp"
#include "levyflow/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

levyflow::FadeParams params_from_config(const levyflow::RunConfig& cfg) {
    levyflow::FadeParams p;
    p.x_left = cfg.get_double("x_left", 0.0);
    p.x_right = cfg.get_double("x_right");
    p.lambda = cfg.get_double("lambda");
    p.gamma = cfg.get_double("gamma");
    p.b = cfg.get_double("b");
    p.mass_constant = cfg.get_double("mass_constant", 1.0);
    p.drift.a0 = cfg.get_double("a0", 0.0);
    p.drift.a1 = cfg.get_double("a1", 0.0);
    p.drift.a2 = cfg.get_double("a2", 0.0);
    p.drift.a3 = cfg.get_double("a3", 0.0);
    p.drift.x_mid = cfg.get_double("x_mid", 0.5 * (p.x_left + p.x_right));
    p.validate();
    return p;
}

levyflow::SolveOptions solve_options_from_config(const levyflow::RunConfig& cfg) {
    levyflow::SolveOptions opts;
    opts.substeps = static_cast<std::size_t>(cfg.get_u64("substeps", 4));
    opts.negativity_tol = cfg.get_double("negativity_tol", opts.negativity_tol);
    opts.iterative = cfg.get_bool("iterative", false);
    return opts;
}

levyflow::SpaceTimeGrid grid_from_config(const levyflow::RunConfig& cfg,
                                         const levyflow::FadeParams& p, double t_end) {
    const auto cells = static_cast<std::size_t>(cfg.get_u64("cells", 600));
    const double dt = cfg.get_double("dt", 1.0);
    return levyflow::SpaceTimeGrid(p.x_left, p.x_right, cells,
                                   levyflow::SpaceTimeGrid::uniform_times(t_end, dt));
}

std::string format_time_tag(double t) {
    std::ostringstream os;
    os << t;
    std::string s = os.str();
    for (char& c : s)
        if (c == '.') c = 'p';
    return s;
}

void write_snapshot_csv(const levyflow::DensitySnapshot& snap, const levyflow::SpaceTimeGrid& grid,
                        double mass_constant, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << std::setprecision(17) << "x,p,c\n";
    for (std::size_t i = 0; i < snap.values.size(); ++i)
        out << grid.node(i) << ',' << snap.values[i] << ',' << mass_constant * snap.values[i]
            << '\n';
}

void write_plot_csv(const levyflow::DensitySnapshot& snap, const levyflow::SpaceTimeGrid& grid,
                    double mass_constant, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << std::setprecision(17) << "x,c\n";
    for (std::size_t i = 0; i < snap.values.size(); ++i)
        out << grid.node(i) << ',' << mass_constant * snap.values[i] << '\n';
}

json params_to_json(const levyflow::FadeParams& p) {
    return json{{"lambda", p.lambda},
                {"gamma", p.gamma},
                {"b", p.b},
                {"a0", p.drift.a0},
                {"a1", p.drift.a1},
                {"a2", p.drift.a2},
                {"a3", p.drift.a3},
                {"x_mid", p.drift.x_mid},
                {"x_left", p.x_left},
                {"x_right", p.x_right},
                {"mass_constant", p.mass_constant}};
}

int run_solve(const std::string& config_path, const std::string& out_dir) {
    const auto cfg = levyflow::RunConfig::load(config_path);
    const auto params = params_from_config(cfg);
    std::vector<double> output_times = cfg.get_double_list("output_times");
    if (output_times.empty()) throw UsageError("solve: output_times must name at least one time");
    double t_end = 0.0;
    for (double t : output_times) t_end = std::max(t_end, t);
    const auto grid = grid_from_config(cfg, params, t_end);
    const double y0 = cfg.get_double("y0");
    const auto opts = solve_options_from_config(cfg);

    const auto t0 = std::chrono::steady_clock::now();
    const levyflow::ForwardSolution sol = levyflow::solve_forward(
        params, grid, levyflow::initial_point_source(grid, y0), output_times, opts);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(out_dir);
    for (const auto& snap : sol.snapshots) {
        const std::string tag = format_time_tag(snap.time);
        write_snapshot_csv(snap, grid, params.mass_constant,
                           fs::path(out_dir) / ("snapshot_t" + tag + ".csv"));
        write_plot_csv(snap, grid, params.mass_constant,
                       fs::path(out_dir) / ("plot_t" + tag + ".csv"));
    }
    std::cout << "solve: wrote " << sol.snapshots.size() << " snapshot(s) to " << out_dir << " in "
              << std::fixed << std::setprecision(2) << seconds << " s\n";
    return 0;
}

int run_fit(const std::string& config_path, const std::string& data_path, std::string pair_name,
            const std::string& appendix_seed, const std::string& out_dir) {
    const auto cfg = levyflow::RunConfig::load(config_path);
    levyflow::FadeParams params = params_from_config(cfg);
    levyflow::ObservationSet raw = levyflow::load_observations(data_path);
    raw.validate(params.x_left, params.x_right);

    if (pair_name.empty()) pair_name = cfg.has("pair") ? cfg.get_string("pair") : "a01";
    levyflow::FitPair pair;
    if (pair_name == "a01")
        pair = levyflow::FitPair::a0a1;
    else if (pair_name == "a23")
        pair = levyflow::FitPair::a2a3;
    else
        throw UsageError("fit: --pair must be a01 or a23 (one pair per pass)");

    // Constant-drift seeds from the prior constant-coefficient fits.
    if (!appendix_seed.empty()) {
        double v;
        if (appendix_seed == "day224")
            v = 0.196051;
        else if (appendix_seed == "day328")
            v = 0.2276768;
        else
            throw UsageError("fit: --seed-from-appendix must be day224 or day328");
        if (pair == levyflow::FitPair::a0a1) {
            params.drift.a0 = v;
            params.drift.a1 = 0.0;
        } else {
            params.drift.a2 = v;
            params.drift.a3 = 0.0;
        }
    }

    // Density scale: shared K from the config when present, otherwise
    // estimated per time group from the data.
    levyflow::ObservationSet scaled = raw;
    std::vector<double> ks;
    for (auto& g : scaled.groups) {
        const double k = cfg.has("mass_constant")
                             ? cfg.get_double("mass_constant")
                             : levyflow::estimate_mass_constant(g, params.x_left, params.x_right);
        ks.push_back(k);
        for (auto& pt : g.points) pt.c /= k;
    }

    double t_end = 0.0;
    for (const auto& g : scaled.groups) t_end = std::max(t_end, g.time);

    levyflow::FitProblem prob{scaled, params,
                              grid_from_config(cfg, params, t_end),
                              {},
                              solve_options_from_config(cfg),
                              pair};
    prob.initial = levyflow::initial_point_source(prob.grid, cfg.get_double("y0"));
    prob.fd_delta_rel = cfg.get_double("fd_delta_rel", prob.fd_delta_rel);
    prob.armijo_rho = cfg.get_double("armijo_rho", prob.armijo_rho);
    prob.armijo_sigma = cfg.get_double("armijo_sigma", prob.armijo_sigma);
    prob.penalty0 = cfg.get_double("penalty0", prob.penalty0);
    prob.tol = cfg.get_double("tol", prob.tol);
    prob.max_iter = static_cast<std::size_t>(cfg.get_u64("max_iter", prob.max_iter));
    prob.armijo_max_backtracks =
        static_cast<std::size_t>(cfg.get_u64("max_backtracks", prob.armijo_max_backtracks));
    prob.adaptive_penalty = cfg.get_bool("adaptive_penalty", false);

    const levyflow::Alpha start = pair == levyflow::FitPair::a0a1
                                      ? levyflow::Alpha{params.drift.a0, params.drift.a1}
                                      : levyflow::Alpha{params.drift.a2, params.drift.a3};

    fs::create_directories(out_dir);
    json report;
    report["tool_version"] = levyflow::version;
    report["config"] = json(cfg.values());
    report["pair"] = pair_name;
    report["mass_constants"] = ks;
    report["seed_alpha"] = {start[0], start[1]};

    auto trace_to_json = [](const std::vector<levyflow::FitTraceEntry>& entries) {
        json arr = json::array();
        for (const auto& e : entries)
            arr.push_back({{"iteration", e.iteration},
                           {"alpha", {e.alpha[0], e.alpha[1]}},
                           {"objective", e.objective},
                           {"penalty", e.penalty},
                           {"step", e.step_length},
                           {"direction", {e.direction[0], e.direction[1]}}});
        return arr;
    };

    const auto t0 = std::chrono::steady_clock::now();
    levyflow::FitResult res;
    try {
        res = levyflow::fit(prob, start);
    } catch (const levyflow::FitError& e) {
        report["status"] = "failed";
        report["error"] = e.what();
        report["alpha_at_failure"] = {e.alpha[0], e.alpha[1]};
        report["trace"] = trace_to_json(e.trace_so_far);
        std::ofstream(fs::path(out_dir) / "fit_report.json") << report.dump(2) << '\n';
        std::cerr << "fit: " << e.what() << '\n';
        return 1;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const levyflow::FadeParams fitted = prob.with_alpha(res.alpha);
    report["status"] = res.converged ? "converged" : "iteration-limit";
    report["fitted_params"] = params_to_json(fitted);
    report["objective"] = res.objective;
    report["iterations"] = res.iterations;
    report["seconds"] = seconds;
    report["trace"] = trace_to_json(res.trace.entries);

    // fitted-vs-observed table over every input observation
    std::vector<double> obs_times;
    for (const auto& g : raw.groups) obs_times.push_back(g.time);
    const levyflow::ForwardSolution sol =
        levyflow::solve_forward(fitted, prob.grid, prob.initial, obs_times, prob.solve_options);
    std::ofstream table(fs::path(out_dir) / "fitted_vs_observed.csv");
    table << std::setprecision(17) << "time,x,observed_c,fitted_c\n";
    json jtable = json::array();
    for (std::size_t g = 0; g < raw.groups.size(); ++g) {
        for (const auto& pt : raw.groups[g].points) {
            const double fitted_c =
                ks[g] * levyflow::eval_piecewise_linear(sol.snapshots[g], prob.grid, pt.x);
            table << raw.groups[g].time << ',' << pt.x << ',' << pt.c << ',' << fitted_c << '\n';
            jtable.push_back({{"time", raw.groups[g].time},
                              {"x", pt.x},
                              {"observed_c", pt.c},
                              {"fitted_c", fitted_c}});
        }
    }
    report["fitted_vs_observed"] = jtable;
    std::ofstream(fs::path(out_dir) / "fit_report.json") << report.dump(2) << '\n';

    std::cout << "fit: " << report["status"].get<std::string>() << " after " << res.iterations
              << " iteration(s); objective " << std::scientific << std::setprecision(6)
              << res.objective << "; alpha = (" << res.alpha[0] << ", " << res.alpha[1] << ")\n";
    return 0;
}

int run_sample(const std::string& config_path, std::optional<std::size_t> n_override,
               std::optional<std::uint64_t> seed_override, std::optional<double> time_override,
               const std::string& out_dir) {
    const auto cfg = levyflow::RunConfig::load(config_path);
    const auto params = params_from_config(cfg);
    const std::size_t n =
        n_override ? *n_override : static_cast<std::size_t>(cfg.get_u64("sample_n", 1000));
    if (n == 0) throw UsageError("sample: need a positive sample size");
    const std::uint64_t seed = seed_override ? *seed_override : cfg.get_u64("seed", 1);
    const double t_sample = time_override ? *time_override : cfg.get_double("sample_time");

    const auto grid = grid_from_config(cfg, params, t_sample);
    const auto opts = solve_options_from_config(cfg);
    const double y0 = cfg.get_double("y0");
    const levyflow::ForwardSolution sol = levyflow::solve_forward(
        params, grid, levyflow::initial_point_source(grid, y0), {t_sample}, opts);
    const levyflow::DensitySnapshot& snap = sol.snapshots.back();

    // Sample the surviving-mass-conditioned law: normalize the snapshot before
    // building the CDF so draws always span the full unit interval.
    const double mass = levyflow::trapezoid_mass(snap, grid);
    if (!(mass > 0.0)) throw std::runtime_error("sample: solved density has no mass");
    std::vector<double> nodes(grid.node_count()), dens(grid.node_count());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        nodes[i] = grid.node(i);
        dens[i] = snap.values[i] / mass;
    }
    const levyflow::EmpiricalCdf cdf = levyflow::build_cdf(nodes, dens);
    const levyflow::SampleBatch batch = levyflow::sample(cdf, n, seed, t_sample);

    fs::create_directories(out_dir);
    const std::string tag = format_time_tag(t_sample);
    levyflow::write_sample_csv(batch, params, fs::path(out_dir) / ("sample_t" + tag + ".csv"));

    // histogram with the fitted pdf overlay column
    const auto bins = static_cast<std::size_t>(cfg.get_u64("bins", 50));
    std::vector<double> edges(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k)
        edges[k] = params.x_left +
                   (params.x_right - params.x_left) * static_cast<double>(k) / static_cast<double>(bins);
    const auto hist = levyflow::empirical_density(batch, edges);
    std::ofstream out(fs::path(out_dir) / ("histogram_t" + tag + ".csv"));
    out << std::setprecision(17) << "bin_left,bin_right,empirical_density,fitted_pdf\n";
    for (std::size_t k = 0; k < bins; ++k) {
        const double center = 0.5 * (edges[k] + edges[k + 1]);
        double pdf = levyflow::eval_piecewise_linear(snap, grid, center) / mass;
        out << edges[k] << ',' << edges[k + 1] << ',' << hist[k] << ',' << pdf << '\n';
    }
    std::cout << "sample: " << n << " draw(s) at t = " << t_sample << " (seed " << seed
              << ", snapshot mass " << std::setprecision(6) << mass << ") written to " << out_dir
              << '\n';
    return 0;
}

int run_report(const std::string& sample_path, const std::string& interval_spec, double confidence,
               const std::string& out_dir) {
    const auto comma = interval_spec.find(',');
    if (comma == std::string::npos)
        throw UsageError("report: --interval expects 'a,b'");
    double a, b;
    try {
        a = std::stod(interval_spec.substr(0, comma));
        b = std::stod(interval_spec.substr(comma + 1));
    } catch (const std::exception&) {
        throw UsageError("report: cannot parse --interval '" + interval_spec + "'");
    }
    if (!(a < b)) throw UsageError("report: interval requires a < b");
    const levyflow::SampleBatch batch = levyflow::load_sample_csv(sample_path);
    const auto ci = levyflow::interval_probability_ci(batch, a, b, confidence);

    std::cout << std::setprecision(10) << "P(Y in (" << a << ", " << b << ")) ~= " << ci.estimate
              << "  [" << ci.lower << ", " << ci.upper << "] at " << confidence * 100
              << "% confidence (n = " << batch.values.size() << ")\n";

    fs::create_directories(out_dir);
    json j{{"tool_version", levyflow::version},
           {"sample_file", sample_path},
           {"n", batch.values.size()},
           {"seed", batch.seed},
           {"time", batch.time},
           {"interval", {a, b}},
           {"confidence", confidence},
           {"estimate", ci.estimate},
           {"lower", ci.lower},
           {"upper", ci.upper}};
    std::ofstream(fs::path(out_dir) / "interval_report.json") << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"space-fractional advection-dispersion toolkit"};
    app.set_version_flag("--version", levyflow::version);
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", data_path, pair_name, appendix_seed;
    std::string sample_path, interval_spec;
    double confidence = 0.95;
    std::optional<std::size_t> n_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<double> time_override;

    auto* solve_cmd = app.add_subcommand("solve", "solve the forward equation and write snapshots");
    solve_cmd->add_option("--config", config_path, "configuration file")->required();
    solve_cmd->add_option("--out", out_dir, "output directory");

    auto* fit_cmd = app.add_subcommand("fit", "fit drift parameters to observed concentrations");
    fit_cmd->add_option("--config", config_path, "configuration file")->required();
    fit_cmd->add_option("--data", data_path, "observation CSV (time,x,concentration[,weight])")
        ->required();
    fit_cmd->add_option("--pair", pair_name, "which coefficient pair to fit: a01 or a23");
    fit_cmd->add_option("--seed-from-appendix", appendix_seed,
                        "seed the pair from the constant-coefficient fits: day224 or day328");
    fit_cmd->add_option("--out", out_dir, "output directory");

    auto* sample_cmd = app.add_subcommand("sample", "draw i.i.d. samples from a solved density");
    sample_cmd->add_option("--config", config_path, "configuration file")->required();
    sample_cmd->add_option("--n", n_override, "number of draws");
    sample_cmd->add_option("--seed", seed_override, "RNG seed");
    sample_cmd->add_option("--time", time_override, "sampling time (days)");
    sample_cmd->add_option("--out", out_dir, "output directory");

    auto* report_cmd =
        app.add_subcommand("report", "interval probability with its confidence interval");
    report_cmd->add_option("--sample", sample_path, "sample CSV from the sample subcommand")
        ->required();
    report_cmd->add_option("--interval", interval_spec, "interval 'a,b'")->required();
    report_cmd->add_option("--confidence", confidence, "confidence level in (0,1)");
    report_cmd->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (solve_cmd->parsed()) return run_solve(config_path, out_dir);
        if (fit_cmd->parsed()) return run_fit(config_path, data_path, pair_name, appendix_seed, out_dir);
        if (sample_cmd->parsed())
            return run_sample(config_path, n_override, seed_override, time_override, out_dir);
        if (report_cmd->parsed()) return run_report(sample_path, interval_spec, confidence, out_dir);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const levyflow::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
