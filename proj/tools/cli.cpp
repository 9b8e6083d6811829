#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "relerr/error.hpp"
#include "relerr/model_selection.hpp"
#include "relerr/sim_engine.hpp"
#include "relerr/solver.hpp"

namespace relerr::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string scenario;
    std::string data;
    std::string out;
    std::string method = "lare";
    std::string methods = "lare,lpre,lad,ls";
    std::string penalty = "mcp";
    std::optional<double> lambda;
    std::optional<std::size_t> cv;
    std::string grid = "200,1e-10";
    double gamma = kDefaultGamma;
    double tol = 1e-6;
    std::uint64_t seed = 1;
    std::optional<std::size_t> threads;
    bool hierarchy_refit = false;
    bool standardize = false;
    std::optional<double> prescreen;
    std::optional<std::string> stability;
    std::size_t replicates = 20;
    std::optional<std::string> correlations;
    bool full = false;
};

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

std::pair<std::size_t, double> parse_grid(const std::string& text) {
    const auto parts = split(text, ',');
    if (parts.size() != 2) throw ConfigError(fmt::format("--grid expects <size>,<ratio>, got '{}'", text));
    try {
        return {std::stoul(parts[0]), std::stod(parts[1])};
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("--grid expects <size>,<ratio>, got '{}'", text));
    }
}

std::pair<std::size_t, std::size_t> parse_stability(const std::string& text) {
    const auto parts = split(text, ',');
    if (parts.size() != 2) {
        throw ConfigError(fmt::format("--stability expects <B>,<drop>, got '{}'", text));
    }
    try {
        return {std::stoul(parts[0]), std::stoul(parts[1])};
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("--stability expects <B>,<drop>, got '{}'", text));
    }
}

std::size_t resolve_threads(const Options& o) {
    if (o.threads) return std::max<std::size_t>(*o.threads, 1);
    if (const char* env = std::getenv("RELERR_THREADS")) {
        try {
            return std::max<std::size_t>(std::stoul(env), 1);
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("RELERR_THREADS must be a positive integer, got '{}'", env));
        }
    }
    return 1;
}

SolverConfig solver_config(const Options& o) {
    SolverConfig c;
    c.tol = o.tol;
    c.seed = o.seed;
    c.validate();
    return c;
}

// Honors SOURCE_DATE_EPOCH so manifests can be made reproducible too.
std::string timestamp() {
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) now = static_cast<std::time_t>(std::atoll(epoch));
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw Error(fmt::format("cannot write '{}'", path.string()));
    return f;
}

void close_output(std::ofstream& f, const fs::path& path) {
    f.close();
    if (!f) throw Error(fmt::format("failed writing '{}'", path.string()));
}

void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& args,
                    const std::vector<std::pair<std::string, std::string>>& fields) {
    const auto path = dir / "manifest.txt";
    auto f = open_output(path);
    f << "command=" << command << '\n';
    for (const auto& [k, v] : fields) f << k << '=' << v << '\n';
    f << "output=" << dir.string() << '\n';
    f << "timestamp=" << timestamp() << '\n';
    f << "argv=";
    for (std::size_t i = 0; i < args.size(); ++i) f << (i ? " " : "") << args[i];
    f << '\n';
    close_output(f, path);
}

fs::path prepare_out(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(fmt::format("cannot create output directory '{}': {}", out, ec.message()));
    return dir;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) s += (i ? sep : "") + items[i];
    return s;
}

// Lift a coefficient vector over a gene subset back to the full gene index space.
CoefficientVector expand_genes(const CoefficientVector& theta, std::size_t p_full,
                               const std::vector<std::size_t>& gene_ids) {
    const auto& map = theta.index_map();
    const CoordinateMap full(map.q(), p_full);
    CoefficientVector out(full);
    for (std::size_t i = 0; i < map.d(); ++i) {
        auto c = map.coordinate(i);
        if (c.kind != CoordinateKind::Env) c.k = gene_ids[c.k];
        out[full.index_of(c)] = theta[i];
    }
    return out;
}

void cmd_simulate(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
    ScenarioConfig scenario = parse_scenario_file(o.scenario);
    const auto dir = prepare_out(o.out);
    const auto sim = generate_dataset(scenario);

    const auto data_path = dir / "data.csv";
    auto data = open_output(data_path);
    write_dataset_csv(data, sim.data);
    close_output(data, data_path);

    const auto truth_path = dir / "truth.csv";
    auto truth = open_output(truth_path);
    write_coefficients_csv(truth, sim.theta_true, "value", false);
    close_output(truth, truth_path);

    write_manifest(dir, "simulate", args,
                   {{"scenario", o.scenario},
                    {"seed", std::to_string(scenario.seed)},
                    {"c_max", fmt::format("{:.17g}", sim.c_max)},
                    {"censoring_rate", fmt::format("{:.6f}", sim.censoring_rate)}});
    out << fmt::format("wrote {} rows ({} events) to {}\n", sim.data.n(), sim.data.events(),
                       data_path.string());
}

struct FitOutcome {
    SurvivalDataset sorted;
    std::vector<std::size_t> gene_ids;
    std::size_t p_full = 0;
    InteractionDesign design;
    KMWeights weights;
    FitResult fit;
    double lambda = 0.0;
    std::optional<CvResult> cv;
    std::optional<PrescreenResult> screen;
};

FitOutcome run_fit(const Options& o, LossKind kind, PenaltyKind penalty_kind, std::size_t threads,
                   std::ostream& err) {
    const auto raw = read_dataset_csv(o.data);
    if (raw.events() == 0) throw DataError("no events; weights identically zero");
    FitOutcome r;
    r.sorted = sort_by_time(raw);
    r.p_full = r.sorted.p();
    r.gene_ids.resize(r.p_full);
    std::iota(r.gene_ids.begin(), r.gene_ids.end(), std::size_t{0});
    if (o.prescreen) {
        r.screen = prescreen(r.sorted, *o.prescreen);
        for (const auto& w : r.screen->warnings) err << "warning: " << w << '\n';
        if (r.screen->kept.empty()) {
            throw DataError(fmt::format("prescreen at p <= {} kept no genes", *o.prescreen));
        }
        r.gene_ids = r.screen->kept;
        r.sorted = r.sorted.select_genes(r.gene_ids);
    }
    if (o.standardize) r.sorted = standardize_covariates(r.sorted);
    r.design = build_design(r.sorted);
    r.weights = kaplan_meier_weights(r.sorted);
    const auto config = solver_config(o);

    if (o.lambda) {
        r.lambda = *o.lambda;
        const PenaltySpec pen{penalty_kind, r.lambda, o.gamma};
        r.fit = fit_penalized(r.design, r.sorted, r.weights, kind, pen, config);
    } else {
        const auto [size, ratio] = parse_grid(o.grid);
        const double lmax = lambda_max(r.design, r.sorted, r.weights, kind, config);
        auto grid = lambda_grid(lmax, size, ratio);
        const EvalProtocol defaults;
        const auto max_active = static_cast<std::size_t>(defaults.max_active_fraction *
                                                         static_cast<double>(r.sorted.events()));
        auto path = lambda_path(r.design, r.sorted, r.weights, kind, penalty_kind, grid, o.gamma, true,
                                config, max_active);
        grid.resize(path.size());
        CvOptions cvo;
        cvo.folds = o.cv.value_or(5);
        cvo.seed = o.seed;
        cvo.threads = threads;
        cvo.gamma = o.gamma;
        r.cv = cross_validate(r.design, r.sorted, kind, penalty_kind, grid, config, cvo);
        r.fit = std::move(path[r.cv->opt_index]);
        r.lambda = r.cv->lambda_opt;
    }
    if (o.hierarchy_refit) {
        r.fit = hierarchy_refit(r.fit, r.design, r.sorted, r.weights, kind, config);
        if (r.fit.diagnostics.refit_refused) err << "warning: " << r.fit.diagnostics.note << '\n';
    }
    return r;
}

void write_fit_outputs(const fs::path& dir, const Options& o, const FitOutcome& r, LossKind kind,
                       PenaltyKind penalty_kind) {
    const auto theta = expand_genes(r.fit.theta_hat, r.p_full, r.gene_ids);
    const auto coef_path = dir / "coefficients.csv";
    auto coef = open_output(coef_path);
    write_coefficients_csv(coef, theta, "estimate", false);
    close_output(coef, coef_path);

    const auto diag_path = dir / "diagnostics.txt";
    auto diag = open_output(diag_path);
    const double loss = penalized_objective(kind, PenaltySpec{penalty_kind, 0.0, o.gamma}, r.fit.theta_hat,
                                            r.design, r.sorted, r.weights);
    const double objective = penalized_objective(kind, PenaltySpec{penalty_kind, r.lambda, o.gamma},
                                                 r.fit.theta_hat, r.design, r.sorted, r.weights);
    diag << fmt::format("method={}\npenalty={}\nlambda={:.17g}\ngamma={}\n", to_string(kind),
                        to_string(penalty_kind), r.lambda, o.gamma);
    diag << fmt::format("mm_iterations={}\nconverged={}\nobjective={:.17g}\nloss={:.17g}\nnonzeros={}\n",
                        r.fit.mm_iterations, r.fit.converged, objective, loss, theta.nnz());
    diag << fmt::format("n={}\nevents={}\ngenes_used={}\n", r.sorted.n(), r.sorted.events(), r.sorted.p());
    diag << fmt::format("newton_failures={}\nunfreezes={}\nstalled={}\n", r.fit.diagnostics.newton_failures,
                        r.fit.diagnostics.unfreezes, r.fit.diagnostics.stalled);
    if (o.hierarchy_refit) {
        diag << fmt::format("hierarchy_refit={}\n", r.fit.diagnostics.refit_refused ? "refused" : "applied");
    }
    if (!r.fit.diagnostics.note.empty()) diag << "note=" << r.fit.diagnostics.note << '\n';
    if (r.cv) {
        diag << fmt::format("cv_folds={}\ncv_retries={}\ncv_opt_index={}\n", r.cv->fold_curves.size(),
                            r.cv->retries, r.cv->opt_index);
    }
    close_output(diag, diag_path);
}

void write_stability(const fs::path& dir, const Options& o, const FitOutcome& r, LossKind kind,
                     PenaltyKind penalty_kind, std::size_t threads) {
    const auto [B, drop] = parse_stability(o.stability.value_or("200,10"));
    const PenaltySpec pen{penalty_kind, r.lambda, o.gamma};
    auto report = stability_selection(r.design, r.sorted, kind, pen, B, drop, solver_config(o), o.seed, threads);
    const CoefficientVector freq(report.map, Eigen::Map<const Eigen::VectorXd>(
                                                 report.frequency.data(),
                                                 static_cast<Eigen::Index>(report.frequency.size())));
    const auto full = expand_genes(freq, r.p_full, r.gene_ids);
    report.map = full.index_map();
    report.frequency.assign(full.values().data(), full.values().data() + full.values().size());
    const auto path = dir / "stability.csv";
    auto f = open_output(path);
    write_stability_csv(f, report);
    close_output(f, path);
}

std::vector<std::pair<std::string, std::string>> fit_fields(const Options& o, const FitOutcome& r) {
    std::vector<std::pair<std::string, std::string>> fields{
        {"input", o.data},
        {"method", o.method},
        {"penalty", o.penalty},
        {"gamma", fmt::format("{}", o.gamma)},
        {"tol", fmt::format("{}", o.tol)},
        {"seed", std::to_string(o.seed)},
        {"lambda", fmt::format("{:.17g}", r.lambda)},
    };
    if (!o.lambda) {
        fields.emplace_back("cv_folds", std::to_string(o.cv.value_or(5)));
        fields.emplace_back("grid", o.grid);
    }
    if (o.prescreen) fields.emplace_back("prescreen", fmt::format("{}", *o.prescreen));
    if (o.hierarchy_refit) fields.emplace_back("hierarchy_refit", "true");
    if (o.standardize) fields.emplace_back("standardize", "true");
    if (o.stability) fields.emplace_back("stability", *o.stability);
    return fields;
}

void cmd_fit(const Options& o, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const auto kind = parse_loss_kind(o.method);
    const auto penalty_kind = parse_penalty_kind(o.penalty);
    const auto threads = resolve_threads(o);
    const auto dir = prepare_out(o.out);
    const auto r = run_fit(o, kind, penalty_kind, threads, err);
    write_fit_outputs(dir, o, r, kind, penalty_kind);
    if (o.stability) write_stability(dir, o, r, kind, penalty_kind, threads);
    write_manifest(dir, "fit", args, fit_fields(o, r));
    out << fmt::format("lambda={:.6g} nonzeros={} converged={}\n", r.lambda, r.fit.theta_hat.nnz(),
                       r.fit.converged);
}

void cmd_stability(const Options& o, const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
    const auto kind = parse_loss_kind(o.method);
    const auto penalty_kind = parse_penalty_kind(o.penalty);
    const auto threads = resolve_threads(o);
    const auto dir = prepare_out(o.out);
    Options so = o;
    so.hierarchy_refit = false;
    if (!so.stability) so.stability = "200,10";
    const auto r = run_fit(so, kind, penalty_kind, threads, err);
    write_stability(dir, so, r, kind, penalty_kind, threads);
    write_manifest(dir, "stability", args, fit_fields(so, r));
    out << fmt::format("stability at lambda={:.6g} written to {}\n", r.lambda, (dir / "stability.csv").string());
}

void cmd_bench(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
    ScenarioConfig scenario = parse_scenario_file(o.scenario);
    EvalProtocol protocol;
    protocol.methods.clear();
    for (const auto& m : split(o.methods, ',')) protocol.methods.push_back(parse_loss_kind(m));
    if (protocol.methods.empty()) throw ConfigError("--methods needs at least one method");
    protocol.replicates = o.replicates;
    std::tie(protocol.grid_size, protocol.ratio) = parse_grid(o.grid);
    protocol.folds = o.cv.value_or(5);
    protocol.gamma = o.gamma;
    protocol.threads = resolve_threads(o);
    protocol.solver = solver_config(o);

    std::vector<CorrelationSpec> correlations{scenario.correlation};
    if (o.full) {
        scenario.n = 200;
        scenario.p = 500;
        scenario.q = 5;
        scenario.n_env_signals = 5;
        scenario.n_gene_signals = 10;
        scenario.n_interaction_signals = 20;
        protocol.replicates = 200;
        correlations = {CorrelationSpec::independent(), CorrelationSpec::ar(0.2), CorrelationSpec::ar(0.8),
                        CorrelationSpec::band1(), CorrelationSpec::band2()};
    }
    if (o.correlations) {
        correlations.clear();
        for (const auto& token : split(*o.correlations, ',')) correlations.push_back(CorrelationSpec::parse(token));
    }

    const auto dir = prepare_out(o.out);
    std::vector<ReplicateSummary> summaries;
    std::vector<MetricsRow> rows;
    for (const auto& corr : correlations) {
        ScenarioConfig sc = scenario;
        sc.correlation = corr;
        summaries.push_back(run_replicates(sc, protocol));
        const auto r = metrics_rows(summaries.back());
        rows.insert(rows.end(), r.begin(), r.end());
        for (const auto& m : summaries.back().methods) {
            out << fmt::format("{:<12} {:<5} AUC {:.3f}({:.3f}) SE {:.3f}({:.3f}) TPR {:.3f}({:.3f}) "
                               "FPR {:.3f}({:.3f}) failures {}\n",
                               corr.to_string(), to_string(m.method), m.auc.mean, m.auc.sd, m.se.mean,
                               m.se.sd, m.tpr.mean, m.tpr.sd, m.fpr.mean, m.fpr.sd, m.failures);
        }
    }

    const auto summary_path = dir / "summary.csv";
    auto summary = open_output(summary_path);
    write_summary_csv(summary, summaries);
    close_output(summary, summary_path);

    const auto rep_path = dir / "replicates.csv";
    auto rep = open_output(rep_path);
    write_metrics_csv(rep, rows);
    close_output(rep, rep_path);

    std::vector<std::string> corr_tokens;
    for (const auto& c : correlations) corr_tokens.push_back(c.to_string());
    write_manifest(dir, "bench", args,
                   {{"scenario", o.scenario},
                    {"methods", o.methods},
                    {"replicates", std::to_string(protocol.replicates)},
                    {"correlations", join(corr_tokens, ",")},
                    {"cv_folds", std::to_string(protocol.folds)},
                    {"grid", fmt::format("{},{}", protocol.grid_size, protocol.ratio)},
                    {"gamma", fmt::format("{}", o.gamma)},
                    {"seed", std::to_string(scenario.seed)},
                    {"full", o.full ? "true" : "false"}});
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Penalized relative-error estimation for censored G x E survival data", "relerr"};
    app.require_subcommand(1);

    auto add_solver = [&o](CLI::App* cmd) {
        cmd->add_option("--method", o.method, "Loss: lare, lpre, lad or ls")->capture_default_str();
        cmd->add_option("--penalty", o.penalty, "Penalty: mcp or lasso")->capture_default_str();
        cmd->add_option("--grid", o.grid, "Lambda grid as <size>,<ratio>")->capture_default_str();
        cmd->add_option("--gamma", o.gamma, "MCP concavity")->capture_default_str();
        cmd->add_option("--tol", o.tol, "MM convergence tolerance")->capture_default_str();
        cmd->add_option("--seed", o.seed, "Seed for folds and resampling")->capture_default_str();
        cmd->add_option("--threads", o.threads, "Worker threads (default: RELERR_THREADS or 1)");
        cmd->add_option("--out", o.out, "Output directory")->required();
    };
    auto add_standardize = [&o](CLI::App* cmd) {
        cmd->add_flag("--standardize", o.standardize,
                      "Center and scale every covariate column before fitting (estimates on that scale)");
    };

    auto* simulate = app.add_subcommand("simulate", "Generate a dataset from a scenario file");
    simulate->add_option("scenario", o.scenario, "Scenario file (key=value)")->required();
    simulate->add_option("--out", o.out, "Output directory")->required();

    auto* fit = app.add_subcommand("fit", "Fit a penalized model to a dataset CSV");
    fit->add_option("data", o.data, "Dataset CSV (time,status,x*,z*)")->required();
    add_solver(fit);
    auto* lambda_opt = fit->add_option("--lambda", o.lambda, "Fixed tuning parameter");
    auto* cv_opt = fit->add_option("--cv", o.cv, "Choose lambda by K-fold cross-validation (default 5)");
    lambda_opt->excludes(cv_opt);
    fit->add_flag("--hierarchy-refit", o.hierarchy_refit, "Add parents of selected interactions and refit");
    fit->add_option("--prescreen", o.prescreen, "Marginal screening p-value threshold");
    fit->add_option("--stability", o.stability, "Also run stability selection with <B>,<drop>");
    add_standardize(fit);

    auto* stability = app.add_subcommand("stability", "Stability selection frequencies");
    stability->add_option("data", o.data, "Dataset CSV")->required();
    add_solver(stability);
    auto* s_lambda = stability->add_option("--lambda", o.lambda, "Fixed tuning parameter");
    auto* s_cv = stability->add_option("--cv", o.cv, "Choose lambda by K-fold cross-validation (default 5)");
    s_lambda->excludes(s_cv);
    stability->add_option("--stability", o.stability, "<B>,<drop> (default 200,10)");
    stability->add_option("--prescreen", o.prescreen, "Marginal screening p-value threshold");
    add_standardize(stability);

    auto* bench = app.add_subcommand("bench", "Replicated method comparison on simulated data");
    bench->add_option("scenario", o.scenario, "Scenario file (key=value)")->required();
    add_solver(bench);
    bench->add_option("--methods", o.methods, "Comma-separated losses")->capture_default_str();
    bench->add_option("--replicates,-R", o.replicates, "Number of replicates")->capture_default_str();
    bench->add_option("--cv", o.cv, "Cross-validation folds (default 5)");
    bench->add_option("--correlations", o.correlations,
                      "Comma-separated correlation structures (default: the scenario's)");
    bench->add_flag("--full", o.full, "Full-scale run: p=500, R=200, all five correlation structures");

    std::vector<std::string> argv_rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(argv_rest.begin(), argv_rest.end());
    try {
        app.parse(argv_rest);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*simulate) cmd_simulate(o, args, out);
        else if (*fit) cmd_fit(o, args, out, err);
        else if (*stability) cmd_stability(o, args, out, err);
        else if (*bench) cmd_bench(o, args, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace relerr::cli
