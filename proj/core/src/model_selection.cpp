#include "relerr/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "relerr/error.hpp"
#include "relerr/parallel.hpp"
#include "relerr/rng.hpp"

namespace relerr {

SelectionMetrics selection_metrics(const CoefficientVector& estimate, const CoefficientVector& truth) {
    if (estimate.d() != truth.d()) {
        throw DimensionError(fmt::format("estimate has length {}, truth has {}", estimate.d(), truth.d()));
    }
    SelectionMetrics m;
    m.se = (estimate.values() - truth.values()).squaredNorm();
    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
    for (std::size_t j = 0; j < truth.d(); ++j) {
        const bool selected = estimate[j] != 0.0;
        if (truth[j] != 0.0) {
            selected ? ++tp : ++fn;
        } else {
            selected ? ++fp : ++tn;
        }
    }
    if (tp + fn > 0) m.tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (fp + tn > 0) m.fpr = static_cast<double>(fp) / static_cast<double>(fp + tn);
    return m;
}

double auc_from_points(std::vector<std::pair<double, double>> points) {
    points.emplace_back(0.0, 0.0);
    points.emplace_back(1.0, 1.0);
    std::map<double, double> best;  // fpr -> max tpr
    for (const auto& [fpr, tpr] : points) {
        auto [it, inserted] = best.emplace(fpr, tpr);
        if (!inserted) it->second = std::max(it->second, tpr);
    }
    double area = 0.0;
    auto prev = best.begin();
    for (auto it = std::next(best.begin()); it != best.end(); ++it) {
        area += (it->first - prev->first) * 0.5 * (it->second + prev->second);
        prev = it;
    }
    return area;
}

double auc_over_path(std::span<const FitResult> path, const CoefficientVector& truth) {
    if (path.empty()) throw ConfigError("auc_over_path: empty path");
    std::vector<std::pair<double, double>> points;
    points.reserve(path.size());
    for (const auto& fit : path) {
        const auto m = selection_metrics(fit.theta_hat, truth);
        points.emplace_back(m.fpr.value_or(0.0), m.tpr.value_or(0.0));
    }
    return auc_from_points(std::move(points));
}

std::vector<std::size_t> stratified_folds(std::span<const int> status, std::size_t folds,
                                          std::uint64_t seed) {
    if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (folds > status.size()) {
        throw ConfigError(fmt::format("{} folds requested for {} observations", folds, status.size()));
    }
    std::vector<std::size_t> events, censored;
    for (std::size_t i = 0; i < status.size(); ++i) (status[i] == 1 ? events : censored).push_back(i);
    CounterRng rng(seed, 0xF01D);
    auto shuffle = [&rng](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
    };
    shuffle(events);
    shuffle(censored);
    std::vector<std::size_t> fold_of(status.size());
    std::size_t slot = 0;
    for (const auto i : events) fold_of[i] = slot++ % folds;
    for (const auto i : censored) fold_of[i] = slot++ % folds;
    return fold_of;
}

namespace {

bool folds_have_events(std::span<const std::size_t> fold_of, std::span<const int> status,
                       std::size_t folds) {
    std::vector<std::size_t> held(folds, 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < status.size(); ++i) {
        if (status[i] == 1) {
            ++held[fold_of[i]];
            ++total;
        }
    }
    // Each held-out fold and its complement must contain an event.
    return std::all_of(held.begin(), held.end(), [&](std::size_t e) { return e > 0 && e < total; });
}

}  // namespace

CvResult cross_validate(const InteractionDesign& design, const SurvivalDataset& sorted, LossKind kind,
                        PenaltyKind penalty_kind, const std::vector<double>& grid,
                        const SolverConfig& config, const CvOptions& options) {
    if (!sorted.is_sorted()) throw DataError("cross_validate expects time-sorted data");
    if (design.n() != sorted.n()) {
        throw DimensionError(fmt::format("design rows {}, dataset rows {}", design.n(), sorted.n()));
    }
    if (grid.empty()) throw ConfigError("cross_validate: empty lambda grid");
    const std::size_t K = options.folds;

    CvResult result;
    result.grid = grid;
    const std::span<const int> status(sorted.status());
    if (!options.fold_assignment.empty()) {
        if (options.fold_assignment.size() != sorted.n()) {
            throw DimensionError("fold assignment length differs from the number of observations");
        }
        for (const auto f : options.fold_assignment) {
            if (f >= K) throw ConfigError(fmt::format("fold label {} outside [0, {})", f, K));
        }
        if (!folds_have_events(options.fold_assignment, status, K)) {
            throw DataError("explicit fold assignment leaves a fold without events");
        }
        result.fold_of = options.fold_assignment;
    } else {
        constexpr std::size_t kMaxRetries = 10;
        for (std::size_t attempt = 0;; ++attempt) {
            const auto seed = attempt == 0 ? options.seed : derive_seed(options.seed, attempt);
            result.fold_of = stratified_folds(status, K, seed);
            if (folds_have_events(result.fold_of, status, K)) break;
            if (attempt == kMaxRetries) {
                throw DataError(fmt::format(
                    "could not form {} folds with events in every fold after {} retries", K, kMaxRetries));
            }
            ++result.retries;
        }
    }

    result.fold_curves.assign(K, std::vector<double>(grid.size(), 0.0));
    parallel_for(K, options.threads, [&](std::size_t k) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < sorted.n(); ++i) (result.fold_of[i] == k ? test : train).push_back(i);
        const auto train_data = sorted.subset(train);
        const auto train_design = design.subset_rows(train);
        const auto test_data = sorted.subset(test);
        const auto test_design = design.subset_rows(test);
        const auto train_w = kaplan_meier_weights(train_data);
        const auto test_w = kaplan_meier_weights(test_data);
        const auto path = lambda_path(train_design, train_data, train_w, kind, penalty_kind, grid,
                                      options.gamma, true, config);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            result.fold_curves[k][g] =
                weighted_objective(kind, path[g].theta_hat, test_design, test_data, test_w);
        }
    });

    result.curve.assign(grid.size(), 0.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) total += result.fold_curves[k][g];
        result.curve[g] = total / static_cast<double>(K);
    }
    // Largest lambda among minimizers.
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        const bool better = result.curve[g] < result.curve[best];
        const bool tie_larger = result.curve[g] == result.curve[best] && grid[g] > grid[best];
        if (better || tie_larger) best = g;
    }
    result.opt_index = best;
    result.lambda_opt = grid[best];
    return result;
}

std::vector<std::size_t> hierarchy_closure(std::span<const std::size_t> active, const CoordinateMap& map) {
    std::vector<char> in(map.d(), 0);
    for (const auto j : active) in.at(j) = 1;
    for (const auto j : active) {
        const auto c = map.coordinate(j);
        if (c.kind == CoordinateKind::Interaction) {
            in[map.env_index(c.j)] = 1;
            in[map.gene_index(c.k)] = 1;
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < in.size(); ++j) {
        if (in[j]) out.push_back(j);
    }
    return out;
}

bool satisfies_strong_hierarchy(std::span<const std::size_t> active, const CoordinateMap& map) {
    std::vector<char> in(map.d(), 0);
    for (const auto j : active) in.at(j) = 1;
    for (const auto j : active) {
        const auto c = map.coordinate(j);
        if (c.kind == CoordinateKind::Interaction &&
            (!in[map.env_index(c.j)] || !in[map.gene_index(c.k)])) {
            return false;
        }
    }
    return true;
}

FitResult hierarchy_refit(const FitResult& fit, const InteractionDesign& design,
                          const SurvivalDataset& dataset, const KMWeights& weights, LossKind kind,
                          const SolverConfig& config) {
    const auto& map = design.index_map();
    const auto support = hierarchy_closure(fit.active_set, map);
    std::size_t events = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) events += weights[i] > 0.0 ? 1 : 0;
    if (support.size() >= events) {
        FitResult refused = fit;
        refused.diagnostics.refit_refused = true;
        refused.diagnostics.note = fmt::format(
            "hierarchy refit refused: support size {} is not below the {} events", support.size(), events);
        return refused;
    }
    std::vector<char> mask(design.d(), 0);
    for (const auto j : support) mask[j] = 1;
    CoordinateDescent engine(design, dataset, weights, kind, config);
    engine.set_free_mask(mask);
    Eigen::VectorXd start = fit.theta_hat.values();
    for (std::size_t j = 0; j < design.d(); ++j) {
        if (!mask[j]) start[static_cast<Eigen::Index>(j)] = 0.0;
    }
    auto refit = run_mm(engine, map, PenaltySpec{PenaltyKind::MCP, 0.0, kDefaultGamma}, config, start,
                        /*hard_threshold=*/false);
    refit.lambda = fit.lambda;
    refit.active_set = support;
    return refit;
}

StabilityReport stability_selection(const InteractionDesign& design, const SurvivalDataset& sorted,
                                    LossKind kind, const PenaltySpec& penalty, std::size_t B,
                                    std::size_t drop, const SolverConfig& config, std::uint64_t seed,
                                    std::size_t threads) {
    if (!sorted.is_sorted()) throw DataError("stability_selection expects time-sorted data");
    if (drop >= sorted.n()) {
        throw ConfigError(fmt::format("drop = {} must be below n = {}", drop, sorted.n()));
    }
    if (B == 0) throw ConfigError("stability_selection needs B >= 1");
    constexpr std::size_t kMaxRedraws = 10;
    const std::size_t n = sorted.n();

    std::vector<std::vector<std::size_t>> supports(B);
    std::vector<std::size_t> redraws(B, 0);
    parallel_for(B, threads, [&](std::size_t b) {
        std::vector<std::size_t> keep;
        for (std::size_t attempt = 0;; ++attempt) {
            CounterRng rng(derive_seed(seed, b), attempt);
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            for (std::size_t i = 0; i < drop; ++i) std::swap(perm[i], perm[i + rng.index(n - i)]);
            std::vector<char> removed(n, 0);
            for (std::size_t i = 0; i < drop; ++i) removed[perm[i]] = 1;
            keep.clear();
            std::size_t events = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!removed[i]) {
                    keep.push_back(i);
                    events += static_cast<std::size_t>(sorted.status()[i]);
                }
            }
            if (events > 0) break;
            if (attempt == kMaxRedraws) {
                throw DataError(fmt::format("resample {} has no events after {} redraws", b, kMaxRedraws));
            }
            ++redraws[b];
        }
        const auto data = sorted.subset(keep);
        const auto sub_design = design.subset_rows(keep);
        const auto w = kaplan_meier_weights(data);
        supports[b] = fit_penalized(sub_design, data, w, kind, penalty, config).active_set;
    });

    StabilityReport report;
    report.map = design.index_map();
    report.B = B;
    report.drop = drop;
    report.frequency.assign(design.d(), 0.0);
    for (std::size_t b = 0; b < B; ++b) {
        for (const auto j : supports[b]) report.frequency[j] += 1.0;
        report.redraws += redraws[b];
    }
    for (auto& f : report.frequency) f /= static_cast<double>(B);
    return report;
}

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw DataError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

PrescreenResult prescreen(const SurvivalDataset& sorted, double p_threshold) {
    if (!(p_threshold > 0.0 && p_threshold <= 1.0)) {
        throw ConfigError(fmt::format("prescreen threshold must lie in (0, 1], got {}", p_threshold));
    }
    if (!sorted.is_sorted()) throw DataError("prescreen expects time-sorted data");
    const auto km = kaplan_meier_weights(sorted);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < sorted.n(); ++i) {
        if (km[i] > 0.0) rows.push_back(i);
    }
    const double n_eff = static_cast<double>(rows.size());
    double wsum = 0.0;
    for (const auto i : rows) wsum += km[i];

    PrescreenResult out;
    const std::size_t p = sorted.p();
    out.p_values.assign(p, 1.0);
    out.iqr.assign(p, 0.0);
    for (std::size_t k = 0; k < p; ++k) {
        const auto col = sorted.genes().col(static_cast<Eigen::Index>(k));
        out.iqr[k] = quantile(std::vector<double>(col.begin(), col.end()), 0.75) -
                     quantile(std::vector<double>(col.begin(), col.end()), 0.25);
    }
    out.iqr_median = p > 0 ? quantile(out.iqr, 0.5) : 0.0;

    for (std::size_t k = 0; k < p; ++k) {
        const auto col = sorted.genes().col(static_cast<Eigen::Index>(k));
        if (col.maxCoeff() == col.minCoeff()) {
            out.warnings.push_back(fmt::format("gene z{} is constant; excluded", k + 1));
            continue;
        }
        if (rows.size() <= 2) continue;
        // Frequency weights scaled to sum to the number of events.
        double zbar = 0.0, ybar = 0.0;
        for (const auto i : rows) {
            const double v = km[i] / wsum;
            zbar += v * col[static_cast<Eigen::Index>(i)];
            ybar += v * std::log(sorted.times()[i]);
        }
        double sxx = 0.0, sxy = 0.0;
        for (const auto i : rows) {
            const double v = km[i] / wsum * n_eff;
            const double dz = col[static_cast<Eigen::Index>(i)] - zbar;
            sxx += v * dz * dz;
            sxy += v * dz * (std::log(sorted.times()[i]) - ybar);
        }
        if (!(sxx > 0.0)) continue;
        const double slope = sxy / sxx;
        double rss = 0.0;
        for (const auto i : rows) {
            const double v = km[i] / wsum * n_eff;
            const double r = std::log(sorted.times()[i]) - ybar - slope * (col[static_cast<Eigen::Index>(i)] - zbar);
            rss += v * r * r;
        }
        const double dof = n_eff - 2.0;
        const double se = std::sqrt(rss / dof / sxx);
        if (!(se > 0.0)) {
            out.p_values[k] = 0.0;
        } else {
            const double t = std::abs(slope / se);
            boost::math::students_t_distribution<double> dist(dof);
            out.p_values[k] = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
        }
    }
    for (std::size_t k = 0; k < p; ++k) {
        if (out.p_values[k] <= p_threshold && out.iqr[k] > out.iqr_median) out.kept.push_back(k);
    }
    return out;
}

namespace {

std::string optional_field(const std::optional<double>& v) {
    return v ? fmt::format("{:.17g}", *v) : std::string("NA");
}

}  // namespace

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
    out << "method,scenario,replicate,auc,se,tpr,fpr\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{},{},{},{},{}\n", r.method, r.scenario, r.replicate,
                           optional_field(r.auc), optional_field(r.se), optional_field(r.tpr),
                           optional_field(r.fpr));
    }
}

void write_stability_csv(std::ostream& out, const StabilityReport& report) {
    out << "coordinate_kind,j,k,frequency\n";
    for (std::size_t i = 0; i < report.frequency.size(); ++i) {
        const auto c = report.map.coordinate(i);
        const std::size_t j = c.kind == CoordinateKind::Gene ? 0 : c.j + 1;
        const std::size_t k = c.kind == CoordinateKind::Env ? 0 : c.k + 1;
        out << fmt::format("{},{},{},{:.17g}\n", to_string(c.kind), j, k, report.frequency[i]);
    }
}

}  // namespace relerr
