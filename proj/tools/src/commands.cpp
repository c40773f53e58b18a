#include "emtp2_cli/commands.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emtp2/hr_model.hpp"
#include "emtp2/solver.hpp"
#include "emtp2/tail_pipeline.hpp"
#include "emtp2_cli/io.hpp"

namespace emtp2::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct FitArgs {
    std::string input;
    std::string output_dir;
    std::string input_kind;
    double quantile = 0.9;
    double gap_tol = FitConfig{}.gap_tol;
    int max_sweeps = FitConfig{}.max_sweeps;
    double zero_tol = FitConfig{}.zero_tol;
    int gap_check_every = FitConfig{}.gap_check_every;
    std::uint64_t seed = 0;
};

struct SimulateArgs {
    std::string gamma;
    std::string output_dir;
    int root = 0;
    bool full = false;
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

struct CheckArgs {
    std::string gamma;
    std::string output_dir;
    std::uint64_t seed = 0;
};

struct BenchArgs {
    std::vector<int> dims;
    int reps = 1;
    std::uint64_t seed = 0;
    double gap_tol = 1e-5;
    int max_sweeps = FitConfig{}.max_sweeps;
    std::string output_dir;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << text;
}

void prepare_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error("cannot create output directory " + dir + ": " + ec.message());
    }
}

json edges_as_pairs(const std::vector<Edge>& edges) {
    json arr = json::array();
    for (const Edge& e : edges) {
        arr.push_back({e.i + 1, e.j + 1});
    }
    return arr;
}

void add_fit_options(CLI::App& sub, FitArgs& a, const std::string& default_kind) {
    a.input_kind = default_kind;
    sub.add_option("--input", a.input, "Variogram CSV or raw data CSV")->required()->check(CLI::ExistingFile);
    sub.add_option("--output-dir", a.output_dir, "Directory for the result bundle")->required();
    sub.add_option("--input-kind", a.input_kind, "Input kind")
        ->check(CLI::IsMember({"variogram", "raw"}))
        ->capture_default_str();
    sub.add_option("--quantile", a.quantile, "Exceedance quantile p for raw input")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    sub.add_option("--gap-tol", a.gap_tol, "Duality gap tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub.add_option("--max-sweeps", a.max_sweeps, "Maximum number of sweeps")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub.add_option("--zero-tol", a.zero_tol, "Relative edge detection threshold on Q")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub.add_option("--gap-check-every", a.gap_check_every, "Sweeps between duality gap checks")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub.add_option("--seed", a.seed, "Random seed (unused by fit)")->capture_default_str();
}

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
    if (a.quantile <= 0.0 || a.quantile >= 1.0) {
        throw ParseError("--quantile must lie strictly between 0 and 1");
    }
    FitConfig cfg;
    cfg.gap_tol = a.gap_tol;
    cfg.max_sweeps = a.max_sweeps;
    cfg.zero_tol = a.zero_tol;
    cfg.gap_check_every = a.gap_check_every;
    cfg.validate();

    json input{{"kind", a.input_kind}, {"path", a.input}};
    Variogram gbar;
    std::optional<EmpiricalVariogram> empirical;
    if (a.input_kind == "raw") {
        const RawDataset raw(read_matrix_csv(fs::path(a.input)));
        const ExceedanceSet exc = select_exceedances(normalize_margins(raw), a.quantile);
        empirical = variogram_combined(exc);
        gbar = empirical->gbar;
        input["quantile"] = a.quantile;
        input["threshold"] = exc.threshold;
        input["rows"] = raw.rows();
        input["exceedances"] = exc.size();
        json degenerate = json::array();
        for (std::size_t k : empirical->degenerate_roots) {
            degenerate.push_back(k + 1);
        }
        input["degenerate_roots"] = degenerate;
    } else {
        std::string warning;
        gbar = read_variogram(fs::path(a.input), &warning);
        if (!warning.empty()) {
            err << "warning: " << warning << '\n';
        }
    }

    const FitResult res = fit(gbar, cfg);

    prepare_dir(a.output_dir);
    const fs::path dir(a.output_dir);
    if (empirical) {
        write_matrix_csv(dir / "gbar.csv", gbar.matrix());
    }
    write_matrix_csv(dir / "gamma_hat.csv", res.gamma_hat.matrix());
    write_matrix_csv(dir / "theta_hat.csv", res.theta_hat.theta().matrix());
    write_text(dir / "graph.json", graph_json(gbar.dim(), res.graph));
    write_text(dir / "graph.dot", graph_dot(gbar.dim(), res.graph));

    json report;
    report["d"] = gbar.dim();
    report["converged"] = res.converged;
    report["sweeps"] = res.sweeps;
    report["wall_time_seconds"] = res.seconds;
    json trace = json::array();
    for (const GapRecord& r : res.gap_trace) {
        trace.push_back({{"sweep", r.sweep}, {"gap", r.gap}, {"certified_gap", r.certified_gap},
                         {"seconds", r.seconds}});
    }
    report["gap_trace"] = trace;
    report["kkt"] = {{"min_q", res.kkt.min_q},
                     {"max_gamma_violation", res.kkt.max_gamma_violation},
                     {"max_comp_slack", res.kkt.max_comp_slack},
                     {"gap", res.kkt.gap},
                     {"certified_gap", res.kkt.certified_gap},
                     {"support", edges_as_pairs(res.graph)}};
    report["config"] = {{"gap_tol", cfg.gap_tol},         {"sweep_tol", cfg.sweep_tol},
                        {"max_sweeps", cfg.max_sweeps},   {"zero_tol", cfg.zero_tol},
                        {"qp_tol", cfg.qp_tol},           {"qp_max_iter", cfg.qp_max_iter},
                        {"gap_check_every", cfg.gap_check_every}, {"seed", a.seed}};
    report["input"] = input;
    write_text(dir / "report.json", report.dump(2) + "\n");

    out << (res.converged ? "converged" : "not converged") << " after " << res.sweeps << " sweeps, gap "
        << res.kkt.gap << ", " << res.graph.size() << " edges\n";
    return res.converged ? kExitOk : kExitNotConverged;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
    if (a.n < 1) {
        throw ParseError("--n must be positive");
    }
    if (!a.full && a.root < 1) {
        throw ParseError("one of --root k (k >= 1) or --full is required");
    }
    std::string warning;
    const Variogram gamma = read_variogram(fs::path(a.gamma), &warning);
    if (!warning.empty()) {
        err << "warning: " << warning << '\n';
    }
    if (!a.full && static_cast<std::size_t>(a.root) > gamma.dim()) {
        throw ParseError("--root exceeds the dimension " + std::to_string(gamma.dim()));
    }
    const HRModel model(gamma);
    const SimBatch batch = a.full ? simulate_pareto(model, a.n, a.seed)
                                  : simulate_root_conditioned(model, static_cast<std::size_t>(a.root - 1), a.n,
                                                              a.seed);
    prepare_dir(a.output_dir);
    write_matrix_csv(fs::path(a.output_dir) / "samples.csv", batch.samples);
    out << "wrote " << a.n << " samples\n";
    return kExitOk;
}

int cmd_check(const CheckArgs& a, std::ostream& out, std::ostream& err) {
    std::string warning;
    const Variogram gamma = read_variogram(fs::path(a.gamma), &warning);
    if (!warning.empty()) {
        err << "warning: " << warning << '\n';
    }
    const VariogramReport rep = check_variogram(gamma);
    const bool emtp2 = rep.strictly_cnd && is_emtp2(gamma_to_theta(gamma));
    json j{{"strictly_cnd", rep.strictly_cnd},
           {"positive_offdiag", rep.positive_offdiag},
           {"is_metric", rep.is_metric},
           {"is_emtp2", emtp2}};
    if (!a.output_dir.empty()) {
        prepare_dir(a.output_dir);
        write_text(fs::path(a.output_dir) / "report.json", j.dump(2) + "\n");
    }
    out << j.dump(2) << '\n';
    return kExitOk;
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    FitConfig cfg;
    cfg.gap_tol = a.gap_tol;
    cfg.max_sweeps = a.max_sweeps;
    cfg.validate();
    for (int d : a.dims) {
        if (d < 3) {
            throw ParseError("--dims entries must be at least 3");
        }
    }
    prepare_dir(a.output_dir);
    std::ofstream timings(fs::path(a.output_dir) / "timings.csv");
    std::ofstream traces(fs::path(a.output_dir) / "gap_trace.csv");
    if (!timings || !traces) {
        throw Error("cannot write benchmark output in " + a.output_dir);
    }
    timings << "dim,rep,seconds,gap,certified_gap,sweeps,converged\n";
    traces << "dim,rep,sweep,gap,certified_gap,seconds\n";
    timings.precision(17);
    traces.precision(17);
    bool all_converged = true;
    for (int d : a.dims) {
        for (int rep = 0; rep < a.reps; ++rep) {
            std::seed_seq seq{static_cast<std::uint32_t>(a.seed), static_cast<std::uint32_t>(a.seed >> 32),
                              static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(rep)};
            std::mt19937_64 rng(seq);
            const Variogram gbar = random_sphere_variogram(static_cast<std::size_t>(d), rng);
            const FitResult res = fit(gbar, cfg);
            all_converged = all_converged && res.converged;
            timings << d << ',' << rep << ',' << res.seconds << ',' << res.kkt.gap << ',' << res.kkt.certified_gap
                    << ',' << res.sweeps << ',' << (res.converged ? 1 : 0) << '\n';
            for (const GapRecord& r : res.gap_trace) {
                traces << d << ',' << rep << ',' << r.sweep << ',' << r.gap << ',' << r.certified_gap << ','
                       << r.seconds << '\n';
            }
            out << "d=" << d << " rep=" << rep << " time=" << res.seconds << "s gap=" << res.kkt.gap << '\n';
        }
    }
    return all_converged ? kExitOk : kExitNotConverged;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Husler-Reiss EMTP2 estimation"};
    app.name("emtp2");
    app.require_subcommand(1);

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the EMTP2 estimator to a variogram or raw data");
    add_fit_options(*fit_cmd, fit_args, "variogram");

    FitArgs pipe_args;
    auto* pipe_cmd = app.add_subcommand("pipeline", "Raw data to fitted graph: margins, exceedances, variogram, fit");
    add_fit_options(*pipe_cmd, pipe_args, "raw");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate from a Husler-Reiss model");
    sim_cmd->add_option("--gamma,--input", sim_args.gamma, "Variogram CSV")->required()->check(CLI::ExistingFile);
    auto* root_opt = sim_cmd->add_option("--root", sim_args.root, "Conditioning root (1-based)");
    auto* full_opt = sim_cmd->add_flag("--full", sim_args.full, "Sample the full Pareto law");
    root_opt->excludes(full_opt);
    sim_cmd->add_option("--n", sim_args.n, "Number of samples")->required();
    sim_cmd->add_option("--seed", sim_args.seed, "Random seed")->capture_default_str();
    sim_cmd->add_option("--output-dir", sim_args.output_dir, "Directory for samples.csv")->required();

    CheckArgs check_args;
    auto* check_cmd = app.add_subcommand("check", "Validity, metric and EMTP2 checks of a variogram");
    check_cmd->add_option("--gamma,--input", check_args.gamma, "Variogram CSV")->required()->check(CLI::ExistingFile);
    check_cmd->add_option("--output-dir", check_args.output_dir, "Directory for report.json");
    check_cmd->add_option("--seed", check_args.seed, "Random seed (unused)");

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Time the estimator on random sphere variograms");
    bench_cmd->add_option("--dims", bench_args.dims, "Dimensions")->required()->delimiter(',');
    bench_cmd->add_option("--reps", bench_args.reps, "Repetitions per dimension")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench_cmd->add_option("--seed", bench_args.seed, "Random seed")->capture_default_str();
    bench_cmd->add_option("--gap-tol", bench_args.gap_tol, "Duality gap tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench_cmd->add_option("--max-sweeps", bench_args.max_sweeps, "Maximum sweeps")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench_cmd->add_option("--output-dir", bench_args.output_dir, "Directory for timings.csv and gap_trace.csv")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitParseError;
    }

    try {
        if (fit_cmd->parsed()) {
            return cmd_fit(fit_args, out, err);
        }
        if (pipe_cmd->parsed()) {
            return cmd_fit(pipe_args, out, err);
        }
        if (sim_cmd->parsed()) {
            return cmd_simulate(sim_args, out, err);
        }
        if (check_cmd->parsed()) {
            return cmd_check(check_args, out, err);
        }
        if (bench_cmd->parsed()) {
            return cmd_bench(bench_args, out);
        }
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitParseError;
    } catch (const ExistenceError& e) {
        err << "error: " << e.what() << " (offending pair " << e.i() + 1 << ", " << e.j() + 1 << ")\n";
        return kExitInvalidInput;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalidInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace emtp2::cli
