#include "relerr/sim_engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include "relerr/error.hpp"
#include "relerr/parallel.hpp"
#include "relerr/rng.hpp"

namespace relerr {

namespace {

// Stream identifiers for the counter-based generator.
enum Stream : std::uint64_t {
    kStreamEnv = 1,
    kStreamGenes = 2,
    kStreamCoefficients = 3,
    kStreamPairs = 4,
    kStreamErrors = 5,
    kStreamCensoring = 6,
};

constexpr const char* kCorrelationTokens = "{independent, ar:<rho>, band1, band2}";

double parse_number(std::string_view key, std::string_view text) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError(fmt::format("scenario key '{}': '{}' is not a number", key, text));
    }
    return v;
}

std::size_t parse_count(std::string_view key, std::string_view text) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError(fmt::format("scenario key '{}': '{}' is not a nonnegative integer", key, text));
    }
    return v;
}

bool parse_flag(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError(fmt::format("scenario key '{}': expected true or false, got '{}'", key, text));
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

CorrelationSpec CorrelationSpec::parse(std::string_view token) {
    if (token == "independent") return independent();
    if (token == "band1") return band1();
    if (token == "band2") return band2();
    if (token.starts_with("ar:")) {
        const auto rest = token.substr(3);
        double rho = 0.0;
        const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), rho);
        if (ec == std::errc() && ptr == rest.data() + rest.size() && !rest.empty() && rho > -1.0 &&
            rho < 1.0) {
            return ar(rho);
        }
    }
    throw ConfigError(
        fmt::format("unknown correlation '{}'; accepted values are {}", token, kCorrelationTokens));
}

std::string CorrelationSpec::to_string() const {
    switch (kind) {
        case Kind::Independent: return "independent";
        case Kind::AR: return fmt::format("ar:{}", rho);
        case Kind::Band1: return "band1";
        case Kind::Band2: return "band2";
    }
    return "unknown";
}

Eigen::MatrixXd correlation_matrix(const CorrelationSpec& spec, std::size_t p) {
    if (p == 0) throw ConfigError("correlation_matrix needs p >= 1");
    const auto n = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto lag = std::abs(j - k);
            if (lag == 0) continue;
            double r = 0.0;
            switch (spec.kind) {
                case CorrelationSpec::Kind::Independent: break;
                case CorrelationSpec::Kind::AR: r = std::pow(spec.rho, static_cast<double>(lag)); break;
                case CorrelationSpec::Kind::Band1: r = lag == 1 ? 0.3 : 0.0; break;
                case CorrelationSpec::Kind::Band2: r = lag == 1 ? 0.6 : (lag == 2 ? 0.3 : 0.0); break;
            }
            sigma(j, k) = r;
        }
    }
    return sigma;
}

Eigen::MatrixXd correlation_factor(const CorrelationSpec& spec, std::size_t p) {
    const Eigen::MatrixXd sigma = correlation_matrix(spec, p);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw ConfigError(fmt::format("correlation '{}' is not positive definite at p = {}",
                                      spec.to_string(), p));
    }
    return llt.matrixL();
}

void ScenarioConfig::validate() const {
    if (n < 2) throw ConfigError("scenario: n must be at least 2");
    if (p < 1 || q < 1) throw ConfigError("scenario: p and q must be at least 1");
    if (!(coef_low <= coef_high)) throw ConfigError("scenario: coef_low must not exceed coef_high");
    if (!(target_censor_rate >= 0.0 && target_censor_rate < 1.0)) {
        throw ConfigError("scenario: censor must lie in [0, 1)");
    }
    if (n_env_signals > q) {
        throw ConfigError(fmt::format("scenario: {} env signals but q = {}", n_env_signals, q));
    }
    if (n_gene_signals > p) {
        throw ConfigError(fmt::format("scenario: {} gene signals but p = {}", n_gene_signals, p));
    }
    const std::size_t pair_genes = restrict_interactions ? n_gene_signals : p;
    if (n_interaction_signals > q * pair_genes) {
        throw ConfigError(fmt::format("scenario: {} interaction signals but only {} eligible pairs",
                                      n_interaction_signals, q * pair_genes));
    }
    if (correlation.kind == CorrelationSpec::Kind::AR && !(std::abs(correlation.rho) < 1.0)) {
        throw ConfigError("scenario: AR rho must lie in (-1, 1)");
    }
}

ScenarioConfig parse_scenario(std::istream& in) {
    static constexpr const char* kKeys =
        "n, p, q, correlation, error, censor, dichotomize, seed, env_signals, gene_signals, "
        "interaction_signals, coef_low, coef_high, restrict_interactions";
    ScenarioConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto view = std::string_view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(fmt::format("scenario line {}: expected key=value, got '{}'", lineno, view));
        }
        const auto key = trim(view.substr(0, eq));
        const auto value = trim(view.substr(eq + 1));
        if (key == "n") c.n = parse_count(key, value);
        else if (key == "p") c.p = parse_count(key, value);
        else if (key == "q") c.q = parse_count(key, value);
        else if (key == "correlation") c.correlation = CorrelationSpec::parse(value);
        else if (key == "error") {
            if (value == "normal") c.error_law = ErrorLaw::StdNormalLog;
            else if (value == "uniform") c.error_law = ErrorLaw::Uniform22Log;
            else throw ConfigError(fmt::format("scenario key 'error': '{}' not in {{normal, uniform}}", value));
        }
        else if (key == "censor") c.target_censor_rate = parse_number(key, value);
        else if (key == "dichotomize") c.dichotomize = parse_flag(key, value);
        else if (key == "seed") c.seed = parse_count(key, value);
        else if (key == "env_signals") c.n_env_signals = parse_count(key, value);
        else if (key == "gene_signals") c.n_gene_signals = parse_count(key, value);
        else if (key == "interaction_signals") c.n_interaction_signals = parse_count(key, value);
        else if (key == "coef_low") c.coef_low = parse_number(key, value);
        else if (key == "coef_high") c.coef_high = parse_number(key, value);
        else if (key == "restrict_interactions") c.restrict_interactions = parse_flag(key, value);
        else throw ConfigError(fmt::format("unknown scenario key '{}'; accepted keys: {}", key, kKeys));
    }
    c.validate();
    return c;
}

ScenarioConfig parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open scenario file '{}'", path));
    return parse_scenario(in);
}

std::string format_scenario(const ScenarioConfig& c) {
    return fmt::format(
        "n={}\np={}\nq={}\ncorrelation={}\nerror={}\ncensor={}\ndichotomize={}\nseed={}\n"
        "env_signals={}\ngene_signals={}\ninteraction_signals={}\ncoef_low={}\ncoef_high={}\n"
        "restrict_interactions={}\n",
        c.n, c.p, c.q, c.correlation.to_string(),
        c.error_law == ErrorLaw::StdNormalLog ? "normal" : "uniform", c.target_censor_rate,
        c.dichotomize, c.seed, c.n_env_signals, c.n_gene_signals, c.n_interaction_signals, c.coef_low,
        c.coef_high, c.restrict_interactions);
}

int dichotomize_level(double z) {
    if (z < -1.0) return 0;
    if (z < 0.5) return 1;
    return 2;
}

double expected_censoring(std::span<const double> event_times, double c_max) {
    double total = 0.0;
    for (const double t : event_times) total += std::min(t / c_max, 1.0);
    return total / static_cast<double>(event_times.size());
}

double calibrate_censoring(std::span<const double> event_times, double target,
                           std::vector<std::string>* warnings) {
    if (event_times.empty()) throw DataError("calibrate_censoring: no event times");
    if (!(target >= 0.0 && target < 1.0)) {
        throw ConfigError(fmt::format("censoring target must lie in [0, 1), got {}", target));
    }
    const double t_max = *std::max_element(event_times.begin(), event_times.end());
    if (target == 0.0) {
        if (warnings) warnings->push_back("censoring target 0 is unreachable with uniform censoring; using 10 * max(t)");
        return 10.0 * t_max;
    }
    const double t_min = *std::min_element(event_times.begin(), event_times.end());
    // expected_censoring decreases in c_max: 1 below t_min, -> 0 as c_max grows.
    double lo = std::log(t_min);
    double hi = std::log(t_max / target) + 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (expected_censoring(event_times, std::exp(mid)) > target) lo = mid;
        else hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

SimulatedData generate_dataset(const ScenarioConfig& config) {
    config.validate();
    const auto n = static_cast<Eigen::Index>(config.n);
    const auto p = static_cast<Eigen::Index>(config.p);
    const auto q = static_cast<Eigen::Index>(config.q);

    Eigen::MatrixXd env(n, q);
    {
        CounterRng rng(config.seed, kStreamEnv);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < q; ++j) env(i, j) = rng.normal();
    }

    Eigen::MatrixXd genes(n, p);
    {
        const Eigen::MatrixXd factor = correlation_factor(config.correlation, config.p);
        CounterRng rng(config.seed, kStreamGenes);
        Eigen::VectorXd g(p);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < p; ++k) g[k] = rng.normal();
            genes.row(i) = (factor.triangularView<Eigen::Lower>() * g).transpose();
        }
    }
    if (config.dichotomize) {
        for (Eigen::Index k = 0; k < p; ++k) {
            for (Eigen::Index i = 0; i < n; ++i) genes(i, k) = dichotomize_level(genes(i, k));
            const double mean = genes.col(k).mean();
            genes.col(k).array() -= mean;
            const double sd = std::sqrt(genes.col(k).squaredNorm() / static_cast<double>(n - 1));
            if (sd > 0.0) genes.col(k) /= sd;
        }
    }

    const CoordinateMap map(config.q, config.p);
    CoefficientVector theta(map);
    {
        std::vector<std::size_t> signal;
        for (std::size_t j = 0; j < config.n_env_signals; ++j) signal.push_back(map.env_index(j));
        for (std::size_t k = 0; k < config.n_gene_signals; ++k) signal.push_back(map.gene_index(k));
        const std::size_t pair_genes = config.restrict_interactions ? config.n_gene_signals : config.p;
        std::vector<std::size_t> pairs;
        for (std::size_t j = 0; j < config.q; ++j)
            for (std::size_t k = 0; k < pair_genes; ++k) pairs.push_back(map.interaction_index(j, k));
        CounterRng pick(config.seed, kStreamPairs);
        for (std::size_t i = 0; i < config.n_interaction_signals; ++i) {
            std::swap(pairs[i], pairs[i + pick.index(pairs.size() - i)]);
        }
        std::sort(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(config.n_interaction_signals));
        signal.insert(signal.end(), pairs.begin(),
                      pairs.begin() + static_cast<std::ptrdiff_t>(config.n_interaction_signals));
        CounterRng mag(config.seed, kStreamCoefficients);
        for (const auto idx : signal) theta[idx] = mag.uniform(config.coef_low, config.coef_high);
    }

    const InteractionDesign design = build_design(env, genes);
    const Eigen::VectorXd eta = design.matrix() * theta.values();
    std::vector<double> t(config.n);
    {
        CounterRng rng(config.seed, kStreamErrors);
        for (std::size_t i = 0; i < config.n; ++i) {
            const double log_eps =
                config.error_law == ErrorLaw::StdNormalLog ? rng.normal() : rng.uniform(-2.0, 2.0);
            t[i] = std::exp(eta[static_cast<Eigen::Index>(i)] + log_eps);
        }
    }

    std::vector<double> y = t;
    std::vector<int> status(config.n, 1);
    double c_max = std::numeric_limits<double>::infinity();
    if (config.target_censor_rate > 0.0) {
        c_max = calibrate_censoring(t, config.target_censor_rate);
        CounterRng rng(config.seed, kStreamCensoring);
        for (std::size_t i = 0; i < config.n; ++i) {
            const double c = rng.uniform() * c_max;
            if (c < t[i]) {
                y[i] = c > 0.0 ? c : std::numeric_limits<double>::denorm_min();
                status[i] = 0;
            }
        }
    }

    SimulatedData out;
    out.data = sort_by_time(SurvivalDataset(std::move(y), std::move(status), std::move(env), std::move(genes)));
    out.theta_true = std::move(theta);
    out.c_max = c_max;
    out.censoring_rate = 1.0 - static_cast<double>(out.data.events()) / static_cast<double>(config.n);
    return out;
}

MetricSummary summarize(std::span<const double> values) {
    MetricSummary s;
    s.count = values.size();
    if (values.empty()) return s;
    // Kahan-compensated sums keep the aggregate independent of accumulation order to ~1 ulp.
    auto kahan = [](std::span<const double> xs, auto&& f) {
        double sum = 0.0, comp = 0.0;
        for (const double x : xs) {
            const double yv = f(x) - comp;
            const double tv = sum + yv;
            comp = (tv - sum) - yv;
            sum = tv;
        }
        return sum;
    };
    s.mean = kahan(values, [](double x) { return x; }) / static_cast<double>(values.size());
    if (values.size() > 1) {
        const double mean = s.mean;
        const double ss = kahan(values, [mean](double x) { return (x - mean) * (x - mean); });
        s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

ReplicateSummary run_replicates(const ScenarioConfig& config, const EvalProtocol& protocol) {
    config.validate();
    if (protocol.replicates == 0) throw ConfigError("run_replicates needs R >= 1");
    if (protocol.methods.empty()) throw ConfigError("run_replicates needs at least one method");

    const std::size_t M = protocol.methods.size();
    ReplicateSummary summary;
    summary.scenario = config;
    summary.records.resize(protocol.replicates * M);

    parallel_for(protocol.replicates, protocol.threads, [&](std::size_t r) {
        ScenarioConfig rc = config;
        rc.seed = config.seed + r;
        SimulatedData sim;
        std::string data_error;
        try {
            sim = generate_dataset(rc);
        } catch (const std::exception& e) {
            data_error = e.what();
        }
        for (std::size_t m = 0; m < M; ++m) {
            auto& rec = summary.records[r * M + m];
            rec.replicate = r;
            rec.method = protocol.methods[m];
            if (!data_error.empty()) {
                rec.failed = true;
                rec.error = data_error;
                continue;
            }
            rec.censoring_rate = sim.censoring_rate;
            try {
                const auto design = build_design(sim.data);
                const auto weights = kaplan_meier_weights(sim.data);
                const double lmax = lambda_max(design, sim.data, weights, rec.method, protocol.solver);
                auto grid = lambda_grid(lmax, protocol.grid_size, protocol.ratio);
                const auto max_active = static_cast<std::size_t>(
                    protocol.max_active_fraction * static_cast<double>(sim.data.events()));
                const auto path = lambda_path(design, sim.data, weights, rec.method, PenaltyKind::MCP, grid,
                                              protocol.gamma, true, protocol.solver, max_active);
                grid.resize(path.size());
                if (protocol.compute_auc) rec.auc = auc_over_path(path, sim.theta_true);
                if (protocol.compute_cv) {
                    CvOptions cv;
                    cv.folds = protocol.folds;
                    cv.seed = derive_seed(rc.seed, 0xC5);
                    cv.gamma = protocol.gamma;
                    const auto res = cross_validate(design, sim.data, rec.method, PenaltyKind::MCP, grid,
                                                    protocol.solver, cv);
                    rec.lambda_opt = res.lambda_opt;
                    const auto metrics = selection_metrics(path[res.opt_index].theta_hat, sim.theta_true);
                    rec.se = metrics.se;
                    rec.tpr = metrics.tpr;
                    rec.fpr = metrics.fpr;
                }
            } catch (const std::exception& e) {
                rec.failed = true;
                rec.error = e.what();
            }
        }
    });

    for (std::size_t m = 0; m < M; ++m) {
        MethodSummary ms;
        ms.method = protocol.methods[m];
        std::vector<double> auc, se, tpr, fpr;
        for (std::size_t r = 0; r < protocol.replicates; ++r) {
            const auto& rec = summary.records[r * M + m];
            if (rec.failed) {
                ++ms.failures;
                continue;
            }
            if (rec.auc) auc.push_back(*rec.auc);
            if (rec.se) se.push_back(*rec.se);
            if (rec.tpr) tpr.push_back(*rec.tpr);
            if (rec.fpr) fpr.push_back(*rec.fpr);
        }
        ms.auc = summarize(auc);
        ms.se = summarize(se);
        ms.tpr = summarize(tpr);
        ms.fpr = summarize(fpr);
        summary.methods.push_back(ms);
    }
    return summary;
}

std::vector<MetricsRow> metrics_rows(const ReplicateSummary& summary) {
    std::vector<MetricsRow> rows;
    const auto label = summary.scenario.correlation.to_string();
    for (const auto& rec : summary.records) {
        MetricsRow row;
        row.method = to_string(rec.method);
        row.scenario = label;
        row.replicate = rec.replicate;
        if (!rec.failed) {
            row.auc = rec.auc;
            row.se = rec.se;
            row.tpr = rec.tpr;
            row.fpr = rec.fpr;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_summary_csv(std::ostream& out, std::span<const ReplicateSummary> summaries) {
    out << "correlation,method,auc_mean,auc_sd,se_mean,se_sd,tpr_mean,tpr_sd,fpr_mean,fpr_sd,"
           "replicates,failures\n";
    for (const auto& s : summaries) {
        for (const auto& m : s.methods) {
            out << fmt::format("{},{},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{},{}\n",
                               s.scenario.correlation.to_string(), to_string(m.method), m.auc.mean,
                               m.auc.sd, m.se.mean, m.se.sd, m.tpr.mean, m.tpr.sd, m.fpr.mean, m.fpr.sd,
                               std::max({m.auc.count, m.se.count}), m.failures);
        }
    }
}

}  // namespace relerr
