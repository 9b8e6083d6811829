// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.
//
//   relerr_acceptance              run every criterion
//   relerr_acceptance --only 1,3   run a subset
//   relerr_acceptance --threads 4  worker threads for replicated runs

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "oracle.hpp"
#include "relerr/loss_functions.hpp"
#include "relerr/model_selection.hpp"
#include "relerr/penalties.hpp"
#include "relerr/sim_engine.hpp"
#include "relerr/solver.hpp"
#include "relerr/survival_data.hpp"

namespace {

using namespace relerr;
namespace rt = relerr::testing;

constexpr std::array kAllLosses{LossKind::LARE, LossKind::LPRE, LossKind::LAD, LossKind::LS};

struct Outcome {
    bool pass = true;
    std::vector<std::string> details;

    void check(bool ok, std::string what) {
        if (!ok) pass = false;
        details.push_back(fmt::format("{} {}", ok ? "ok  " : "FAIL", what));
    }
    void info(std::string what) { details.push_back("     " + std::move(what)); }
};

struct Context {
    std::size_t threads = 1;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Cross-validated fit on the evaluation protocol's truncated grid.
struct CvFit {
    FitResult fit;
    std::vector<FitResult> path;
    double lambda = 0.0;
};

CvFit cv_fit(const InteractionDesign& design, const SurvivalDataset& data, const KMWeights& weights,
             LossKind kind, std::uint64_t seed, std::size_t threads) {
    const EvalProtocol protocol;
    const SolverConfig config;
    const double lmax = lambda_max(design, data, weights, kind, config);
    auto grid = lambda_grid(lmax, protocol.grid_size, protocol.ratio);
    const auto max_active =
        static_cast<std::size_t>(protocol.max_active_fraction * static_cast<double>(data.events()));
    CvFit out;
    out.path = lambda_path(design, data, weights, kind, PenaltyKind::MCP, grid, protocol.gamma, true, config,
                           max_active);
    grid.resize(out.path.size());
    CvOptions cvo;
    cvo.folds = protocol.folds;
    cvo.seed = seed;
    cvo.threads = threads;
    cvo.gamma = protocol.gamma;
    const auto cv = cross_validate(design, data, kind, PenaltyKind::MCP, grid, config, cvo);
    out.fit = out.path[cv.opt_index];
    out.lambda = cv.lambda_opt;
    return out;
}

// The mixed penalized fits shared by the descent and hierarchy criteria.
struct MixedFit {
    rt::Instance inst;
    LossKind kind;
    PenaltySpec penalty;
    FitResult fit;
};

std::vector<MixedFit> mixed_fits() {
    constexpr std::array fractions{0.02, 0.05, 0.1, 0.2, 0.4};
    std::vector<MixedFit> fits;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto inst = rt::random_instance({.n = 60, .q = 2, .p = 4, .sparsity = 0.5}, 1000 + seed);
        for (std::size_t m = 0; m < kAllLosses.size(); ++m) {
            const auto kind = kAllLosses[m];
            const double lmax = lambda_max(inst.design, inst.data, inst.weights, kind);
            const PenaltySpec penalty{(seed + m) % 2 ? PenaltyKind::Lasso : PenaltyKind::MCP,
                                      fractions[(seed + m) % fractions.size()] * lmax, kDefaultGamma};
            auto fit = fit_penalized(inst.design, inst.data, inst.weights, kind, penalty, SolverConfig{});
            fits.push_back({inst, kind, penalty, std::move(fit)});
        }
    }
    return fits;
}

ScenarioConfig scaled_scenario(const CorrelationSpec& corr, bool dichotomize) {
    ScenarioConfig sc;
    sc.n = 200;
    sc.p = 50;
    sc.q = 5;
    sc.n_env_signals = 2;
    sc.n_gene_signals = 4;
    sc.n_interaction_signals = 8;
    sc.correlation = corr;
    sc.error_law = ErrorLaw::StdNormalLog;
    sc.dichotomize = dichotomize;
    sc.seed = dichotomize ? 7001 : 6001;
    return sc;
}

const MethodSummary& method_of(const ReplicateSummary& s, LossKind kind) {
    for (const auto& m : s.methods) {
        if (m.method == kind) return m;
    }
    throw std::runtime_error("method missing from summary");
}

void report_summary(Outcome& o, const std::string& label, const ReplicateSummary& s) {
    for (const auto& m : s.methods) {
        o.info(fmt::format("{:<12} {:<5} AUC {:.3f}({:.3f}) TPR {:.3f}({:.3f}) FPR {:.3f}({:.3f}) "
                           "SE {:.3f}({:.3f}) failures {}",
                           label, to_string(m.method), m.auc.mean, m.auc.sd, m.tpr.mean, m.tpr.sd, m.fpr.mean,
                           m.fpr.sd, m.se.mean, m.se.sd, m.failures));
    }
}

// 1. Unpenalized solver minimum against brute force.
Outcome oracle_equivalence(const Context&) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    SolverConfig config;
    config.tol = 1e-10;
    config.max_mm_iters = 20000;
    double worst = 0.0;
    std::size_t failures = 0;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        // d = 3 (q = p = 1) or d = 5 (q = 1, p = 2).
        const std::size_t p = seed % 2 ? 2 : 1;
        const std::size_t n = 15 + seed % 16;
        const auto inst = rt::random_instance({.n = n, .q = 1, .p = p}, 500 + seed);
        for (auto kind : kAllLosses) {
            const auto fit = fit_penalized(inst.design, inst.data, inst.weights, kind, {PenaltyKind::MCP, 0.0},
                                           config);
            const double solver = rt::reference_objective(kind, fit.theta_hat.values(), inst);
            const auto brute = rt::brute_force_minimum(kind, inst, seed);
            const double gap = rel_gap(solver, brute.value);
            worst = std::max(worst, gap);
            if (gap > 1e-6) {
                ++failures;
                o.info(fmt::format("seed {} n {} d {} {}: solver {:.12g} brute {:.12g} rel gap {:.2e}", seed, n,
                                   inst.design.d(), to_string(kind), solver, brute.value, gap));
            }
        }
    }
    const double elapsed = seconds_since(start);
    o.check(failures == 0, fmt::format("100 instance-loss pairs within 1e-6 relative (worst {:.2e})", worst));
    o.check(elapsed < 120.0, fmt::format("runtime {:.1f} s < 120 s", elapsed));
    return o;
}

// 2. Monotone MM traces and coordinatewise stationarity.
Outcome mm_descent(const Context&) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    const auto fits = mixed_fits();
    std::size_t trace_violations = 0, stationarity_violations = 0, unconverged = 0;
    double worst_rise = 0.0;
    std::mt19937_64 gen(2);
    for (const auto& f : fits) {
        const auto& trace = f.fit.objective_trace;
        for (std::size_t s = 1; s < trace.size(); ++s) {
            worst_rise = std::max(worst_rise, trace[s] - trace[s - 1]);
            if (trace[s] > trace[s - 1] + 1e-10) ++trace_violations;
        }
        if (!f.fit.converged) ++unconverged;
        const Eigen::VectorXd theta = f.fit.theta_hat.values();
        const double base = rt::reference_objective(f.kind, theta, f.inst, f.penalty.kind, f.penalty.lambda);
        std::vector<Eigen::Index> coords(static_cast<std::size_t>(theta.size()));
        std::iota(coords.begin(), coords.end(), Eigen::Index{0});
        std::shuffle(coords.begin(), coords.end(), gen);
        coords.resize(std::min<std::size_t>(coords.size(), 20));
        for (const auto j : coords) {
            for (double step : {-1e-5, 1e-5}) {
                Eigen::VectorXd moved = theta;
                moved[j] += step;
                const double value =
                    rt::reference_objective(f.kind, moved, f.inst, f.penalty.kind, f.penalty.lambda);
                if (value < base - 1e-8 * (1.0 + std::abs(base))) {
                    ++stationarity_violations;
                    o.info(fmt::format("{} lambda {:.3g} coordinate {}: step {} lowers objective by {:.2e}",
                                       to_string(f.kind), f.penalty.lambda, j, step, base - value));
                }
            }
        }
    }
    const double elapsed = seconds_since(start);
    o.check(trace_violations == 0, fmt::format("{} traces nonincreasing within 1e-10 (largest rise {:.2e})",
                                               fits.size(), worst_rise));
    o.check(stationarity_violations == 0, "no +-1e-5 coordinate move lowers the final objective");
    o.info(fmt::format("{} fits stopped at the iteration cap", unconverged));
    o.check(elapsed < 300.0, fmt::format("runtime {:.1f} s < 300 s", elapsed));
    return o;
}

// 3. Kaplan-Meier weights.
Outcome km_weights(const Context&) {
    Outcome o;
    // Product formula evaluated by hand.
    const std::vector<std::pair<std::vector<int>, std::vector<double>>> cases{
        {{1}, {1.0}},
        {{0, 1}, {0.0, 1.0}},
        {{1, 0, 1}, {1.0 / 3.0, 0.0, 2.0 / 3.0}},
        {{1, 1, 1, 1}, {1.0 / 4.0, 1.0 / 4.0, 1.0 / 4.0, 1.0 / 4.0}},
        {{0, 0, 1}, {0.0, 0.0, 1.0}},
        {{1, 0, 0, 1}, {1.0 / 4.0, 0.0, 0.0, 3.0 / 4.0}},
        {{0, 1, 0, 1, 1}, {0.0, 1.0 / 4.0, 0.0, 3.0 / 8.0, 3.0 / 8.0}},
        {{1, 1, 0, 1, 0}, {1.0 / 5.0, 1.0 / 5.0, 0.0, 3.0 / 10.0, 0.0}},
        {{0, 1, 1, 0, 1, 1}, {0.0, 1.0 / 5.0, 1.0 / 5.0, 0.0, 3.0 / 10.0, 3.0 / 10.0}},
        {{1, 0, 1, 0, 1, 0}, {1.0 / 6.0, 0.0, 5.0 / 24.0, 0.0, 5.0 / 16.0, 0.0}},
    };
    std::size_t mismatches = 0;
    for (const auto& [status, expected] : cases) {
        const auto w = kaplan_meier_weights(status);
        const auto exact = rt::km_weights_rational(status);
        for (std::size_t i = 0; i < status.size(); ++i) {
            if (std::abs(w[i] - expected[i]) > 1e-15 || exact[i] != expected[i]) ++mismatches;
        }
    }
    o.check(mismatches == 0, "10 hand-evaluated status patterns match to 1e-15");
    const std::vector<int> all_events(1000, 1);
    const auto w = kaplan_meier_weights(all_events);
    double worst = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, std::abs(w[i] - 1e-3));
    o.check(worst < 1e-15, fmt::format("n = 1000 without censoring gives 1/n (max deviation {:.1e})", worst));
    return o;
}

// 4. Closed forms against numerical integration and differentiation.
Outcome closed_forms(const Context&) {
    Outcome o;
    using boost::math::quadrature::gauss_kronrod;
    double worst_value = 0.0, worst_deriv = 0.0;
    for (const auto& [lambda, gamma] : std::vector<std::pair<double, double>>{{1.0, 6.0}, {0.3, 3.0}, {0.05, 1.5}}) {
        const PenaltySpec spec{PenaltyKind::MCP, lambda, gamma};
        const auto integrand = [&](double x) { return std::max(lambda - x / gamma, 0.0); };
        const auto integral = [&](double t) {
            const double a = std::abs(t);
            // Split at the knot so the quadrature never straddles the kink.
            const double knot = std::min(a, gamma * lambda);
            double v = knot > 0.0 ? gauss_kronrod<double, 31>::integrate(integrand, 0.0, knot) : 0.0;
            if (a > knot) v += gauss_kronrod<double, 31>::integrate(integrand, knot, a);
            return v;
        };
        const double top = 2.0 * gamma * lambda;
        for (int i = 0; i < 1000; ++i) {
            const double t = top * i / 999.0 * (i % 2 ? -1.0 : 1.0);
            worst_value = std::max(worst_value, std::abs(penalty_value(t, spec) - integral(t)));
            const double a = std::abs(t);
            if (a > 1e-5) {
                const double numeric = rt::central_difference(integral, a, 1e-6);
                worst_deriv = std::max(worst_deriv, std::abs(penalty_derivative(a, spec) - numeric));
            }
        }
    }
    o.check(worst_value < 1e-6, fmt::format("MCP value vs quadrature on 3 x 1000 points (max err {:.1e})", worst_value));
    o.check(worst_deriv < 1e-6,
            fmt::format("MCP derivative vs numerical derivative of the integral (max err {:.1e})", worst_deriv));

    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> log_y(-3.0, 3.0), offset(-2.0, 2.0);
    double worst_grad = 0.0, worst_hess = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double y = std::exp(log_y(gen));
        const double eta = std::log(y) + offset(gen);
        const auto d = lpre_eta_derivatives(y, eta);
        const auto loss = [&](double e) { return rt::reference_loss(LossKind::LPRE, y, e); };
        const auto grad = [&](double e) { return lpre_eta_derivatives(y, e).grad; };
        const double h = 1e-5;
        const double g_num = rt::central_difference(loss, eta, h);
        const double h_num = rt::central_difference(grad, eta, h);
        worst_grad = std::max(worst_grad, std::abs(d.grad - g_num) / std::max(std::abs(g_num), 1.0));
        worst_hess = std::max(worst_hess, std::abs(d.hess - h_num) / std::max(std::abs(h_num), 1.0));
    }
    o.check(worst_grad < 1e-6, fmt::format("LPRE gradient vs finite differences (max rel err {:.1e})", worst_grad));
    o.check(worst_hess < 1e-6, fmt::format("LPRE hessian vs finite differences (max rel err {:.1e})", worst_hess));
    return o;
}

// 5. Loss majorizers dominate and touch.
Outcome majorization(const Context&) {
    Outcome o;
    const auto inst = rt::random_instance({.n = 25, .q = 1, .p = 2, .censor_prob = 0.2}, 55);
    std::mt19937_64 gen(5);
    std::normal_distribution<double> norm(0.0, 0.7);
    const CoordinateMap map = inst.design.index_map();
    std::size_t lare_below = 0, lad_below = 0;
    double worst_touch = 0.0;
    for (int i = 0; i < 10000; ++i) {
        CoefficientVector theta(map), theta_s(map);
        for (std::size_t j = 0; j < map.d(); ++j) {
            theta[j] = norm(gen);
            theta_s[j] = norm(gen);
        }
        const double lare = weighted_objective(LossKind::LARE, theta, inst.design, inst.data, inst.weights);
        const double lad = weighted_objective(LossKind::LAD, theta, inst.design, inst.data, inst.weights);
        if (lare_majorizer(theta, theta_s, inst.design, inst.data, inst.weights) < lare - 1e-12 * (1 + lare)) {
            ++lare_below;
        }
        if (lad_majorizer(theta, theta_s, inst.design, inst.data, inst.weights) < lad - 1e-12 * (1 + lad)) {
            ++lad_below;
        }
        const double lare_s = weighted_objective(LossKind::LARE, theta_s, inst.design, inst.data, inst.weights);
        const double lad_s = weighted_objective(LossKind::LAD, theta_s, inst.design, inst.data, inst.weights);
        worst_touch = std::max(worst_touch, std::abs(lare_majorizer(theta_s, theta_s, inst.design, inst.data,
                                                                    inst.weights) - lare_s));
        worst_touch = std::max(worst_touch, std::abs(lad_majorizer(theta_s, theta_s, inst.design, inst.data,
                                                                   inst.weights) - lad_s));
    }
    o.check(lare_below == 0, "LARE majorizer dominates on 1e4 pairs");
    o.check(lad_below == 0, "LAD majorizer dominates on 1e4 pairs");
    o.check(worst_touch <= 1e-10, fmt::format("majorizers touch at theta = theta_s (max gap {:.1e})", worst_touch));
    return o;
}

// 6. Scaled simulation with continuous genes.
Outcome scaled_simulation(const Context& ctx) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    EvalProtocol protocol;
    protocol.methods = {LossKind::LARE, LossKind::LPRE, LossKind::LAD, LossKind::LS};
    protocol.replicates = 20;
    protocol.threads = ctx.threads;
    const auto ind = run_replicates(scaled_scenario(CorrelationSpec::independent(), false), protocol);
    const auto ar = run_replicates(scaled_scenario(CorrelationSpec::ar(0.8), false), protocol);
    report_summary(o, "independent", ind);
    report_summary(o, "ar:0.8", ar);
    for (auto kind : {LossKind::LARE, LossKind::LPRE}) {
        const double a = method_of(ar, kind).auc.mean, b = method_of(ind, kind).auc.mean;
        o.check(a > b, fmt::format("{} AUC ar:0.8 {:.3f} > independent {:.3f}", to_string(kind), a, b));
    }
    for (const auto* s : {&ind, &ar}) {
        for (const auto& m : s->methods) {
            const auto label = fmt::format("{} {}", s->scenario.correlation.to_string(), to_string(m.method));
            o.check(m.auc.mean >= 0.75, fmt::format("{} mean AUC {:.3f} >= 0.75", label, m.auc.mean));
            o.check(m.tpr.mean >= 0.5, fmt::format("{} mean TPR {:.3f} >= 0.5", label, m.tpr.mean));
            o.check(m.failures == 0, fmt::format("{} replicate failures {}", label, m.failures));
        }
    }
    const double elapsed = seconds_since(start);
    o.check(elapsed < 1800.0, fmt::format("runtime {:.0f} s < 1800 s", elapsed));
    return o;
}

// 7. Dichotomized genes.
Outcome dichotomized(const Context& ctx) {
    Outcome o;
    ScenarioConfig big;
    big.n = 100000;
    big.p = 5;
    big.q = 1;
    big.n_env_signals = 1;
    big.n_gene_signals = 1;
    big.n_interaction_signals = 1;
    big.dichotomize = true;
    big.seed = 77;
    const auto sim = generate_dataset(big);
    // Standardization keeps the level order, so the smallest value is level 0.
    std::array<std::size_t, 3> counts{};
    const auto& genes = sim.data.genes();
    for (Eigen::Index k = 0; k < genes.cols(); ++k) {
        std::set<double> levels(genes.col(k).data(), genes.col(k).data() + genes.rows());
        if (levels.size() != 3) {
            o.check(false, fmt::format("gene {} has {} distinct values", k + 1, levels.size()));
            return o;
        }
        const std::vector<double> sorted(levels.begin(), levels.end());
        for (Eigen::Index i = 0; i < genes.rows(); ++i) {
            const double v = genes(i, k);
            ++counts[v == sorted[0] ? 0 : v == sorted[1] ? 1 : 2];
        }
    }
    const auto phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    const std::array<double, 3> expected{phi(-1.0), phi(0.5) - phi(-1.0), 1.0 - phi(0.5)};
    const double total = static_cast<double>(genes.size());
    for (std::size_t l = 0; l < 3; ++l) {
        const double prop = static_cast<double>(counts[l]) / total;
        o.check(std::abs(prop - expected[l]) <= 0.01,
                fmt::format("level {} proportion {:.4f} vs {:.4f}", l, prop, expected[l]));
    }

    const auto start = std::chrono::steady_clock::now();
    EvalProtocol protocol;
    protocol.methods = {LossKind::LARE, LossKind::LAD};
    protocol.replicates = 20;
    protocol.threads = ctx.threads;
    for (const auto& corr : {CorrelationSpec::independent(), CorrelationSpec::ar(0.8)}) {
        const auto s = run_replicates(scaled_scenario(corr, true), protocol);
        report_summary(o, corr.to_string(), s);
        const double lare = method_of(s, LossKind::LARE).tpr.mean, lad = method_of(s, LossKind::LAD).tpr.mean;
        o.check(lare >= lad - 0.05,
                fmt::format("{} LARE TPR {:.3f} >= LAD TPR {:.3f} - 0.05", corr.to_string(), lare, lad));
    }
    o.info(fmt::format("scaled run {:.0f} s", seconds_since(start)));
    return o;
}

// 8. Censoring calibration at full scale.
Outcome censoring(const Context&) {
    Outcome o;
    for (auto law : {ErrorLaw::StdNormalLog, ErrorLaw::Uniform22Log}) {
        std::vector<double> rates;
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            ScenarioConfig sc;
            sc.error_law = law;
            sc.seed = seed;
            rates.push_back(generate_dataset(sc).censoring_rate);
        }
        const auto s = summarize(rates);
        const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
        const auto label = law == ErrorLaw::StdNormalLog ? "normal" : "uniform";
        o.check(std::abs(s.mean - 0.2) <= 0.04,
                fmt::format("{} errors: mean censoring {:.4f} (sd {:.4f}, range {:.3f}..{:.3f}) within 0.2 +- 0.04",
                            label, s.mean, s.sd, *lo, *hi));
    }
    return o;
}

// 9. Stability selection.
Outcome stability(const Context& ctx) {
    Outcome o;
    {
        const auto inst = rt::random_instance({.n = 50, .q = 2, .p = 5, .sparsity = 0.5}, 9);
        for (auto kind : kAllLosses) {
            const double lmax = lambda_max(inst.design, inst.data, inst.weights, kind);
            const PenaltySpec pen{PenaltyKind::MCP, 0.1 * lmax, kDefaultGamma};
            const auto full = fit_penalized(inst.design, inst.data, inst.weights, kind, pen, SolverConfig{});
            const auto report =
                stability_selection(inst.design, inst.data, kind, pen, 4, 0, SolverConfig{}, 3, ctx.threads);
            bool exact = true;
            for (std::size_t j = 0; j < report.frequency.size(); ++j) {
                exact = exact && report.frequency[j] == (full.theta_hat[j] != 0.0 ? 1.0 : 0.0);
            }
            o.check(exact, fmt::format("{} drop = 0 reproduces the full-data support ({} selected)",
                                       to_string(kind), full.theta_hat.nnz()));
        }
    }
    ScenarioConfig sc;
    sc.n = 200;
    sc.p = 20;
    sc.q = 2;
    sc.n_env_signals = 1;
    sc.n_gene_signals = 1;
    sc.n_interaction_signals = 1;
    sc.coef_low = 1.2;
    sc.coef_high = 1.2;
    sc.seed = 909;
    const auto sim = generate_dataset(sc);
    const auto design = build_design(sim.data);
    const auto weights = kaplan_meier_weights(sim.data);
    for (auto kind : {LossKind::LARE, LossKind::LPRE}) {
        const auto cv = cv_fit(design, sim.data, weights, kind, 11, ctx.threads);
        const auto report = stability_selection(design, sim.data, kind, {PenaltyKind::MCP, cv.lambda, kDefaultGamma},
                                                50, 10, SolverConfig{}, 12, ctx.threads);
        for (std::size_t j = 0; j < sim.theta_true.d(); ++j) {
            if (sim.theta_true[j] == 0.0) continue;
            const auto c = design.index_map().coordinate(j);
            o.check(report.frequency[j] >= 0.8,
                    fmt::format("{} planted {} ({}, {}) frequency {:.2f} >= 0.8 at CV lambda {:.3g}",
                                to_string(kind), to_string(c.kind), c.j + 1, c.k + 1, report.frequency[j],
                                cv.lambda));
        }
    }
    return o;
}

// 10. Strong hierarchy after refit.
Outcome hierarchy(const Context& ctx) {
    Outcome o;
    std::size_t checked = 0, violations = 0, refused = 0, had_orphans = 0;
    const auto verify = [&](const FitResult& fit, const InteractionDesign& design, const SurvivalDataset& data,
                            const KMWeights& weights, LossKind kind) {
        const auto& map = design.index_map();
        if (!satisfies_strong_hierarchy(fit.theta_hat.support(), map)) ++had_orphans;
        const auto refit = hierarchy_refit(fit, design, data, weights, kind, SolverConfig{});
        ++checked;
        if (refit.diagnostics.refit_refused) {
            ++refused;
            return;
        }
        const auto support = refit.theta_hat.support();
        const auto closure = hierarchy_closure(fit.theta_hat.support(), map);
        const bool covers = std::includes(support.begin(), support.end(), closure.begin(), closure.end());
        if (!satisfies_strong_hierarchy(support, map) || !covers) ++violations;
    };
    for (const auto& f : mixed_fits()) verify(f.fit, f.inst.design, f.inst.data, f.inst.weights, f.kind);
    for (const auto& corr : {CorrelationSpec::independent(), CorrelationSpec::ar(0.8)}) {
        auto sc = scaled_scenario(corr, false);
        for (std::uint64_t r = 0; r < 2; ++r) {
            sc.seed = 8100 + r;
            const auto sim = generate_dataset(sc);
            const auto design = build_design(sim.data);
            const auto weights = kaplan_meier_weights(sim.data);
            for (auto kind : kAllLosses) {
                const auto cv = cv_fit(design, sim.data, weights, kind, r, ctx.threads);
                verify(cv.fit, design, sim.data, weights, kind);
                for (std::size_t i = 10; i < cv.path.size(); i += 10) verify(cv.path[i], design, sim.data, weights, kind);
            }
        }
    }
    o.info(fmt::format("{} fits checked, {} violated strong hierarchy before the refit", checked, had_orphans));
    o.check(refused == 0, fmt::format("{} refits refused", refused));
    o.check(violations == 0, fmt::format("{} refit supports violate strong hierarchy", violations));
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::vector<int> only;
    std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
    app.add_option("--threads", threads, "Worker threads for replicated runs")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome(const Context&)>>> criteria{
        {"oracle equivalence", oracle_equivalence},
        {"MM descent", mm_descent},
        {"Kaplan-Meier weights", km_weights},
        {"closed forms", closed_forms},
        {"majorization", majorization},
        {"scaled simulation, continuous genes", scaled_simulation},
        {"scaled simulation, dichotomized genes", dichotomized},
        {"censoring calibration", censoring},
        {"stability selection", stability},
        {"hierarchy refit", hierarchy},
    };
    const Context ctx{std::max<std::size_t>(threads, 1)};
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[i].second(ctx);
        } catch (const std::exception& e) {
            out.check(false, fmt::format("threw: {}", e.what()));
        }
        for (const auto& line : out.details) std::cout << "    " << line << '\n';
        std::cout << fmt::format("criterion {:>2} {:<40} {} ({:.1f} s)", id, criteria[i].first,
                                 out.pass ? "PASS" : "FAIL", seconds_since(start))
                  << std::endl;
        all = all && out.pass;
    }
    return all ? 0 : 1;
}
