#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relerr/solver.hpp"

namespace relerr {

struct SelectionMetrics {
    double se = 0.0;             // squared L2 estimation error
    std::optional<double> tpr;   // absent when the truth has no nonzeros
    std::optional<double> fpr;   // absent when the truth has no zeros
};

SelectionMetrics selection_metrics(const CoefficientVector& estimate, const CoefficientVector& truth);

// ROC area from (fpr, tpr) points plus the (0,0) and (1,1) endpoints; at equal
// fpr only the largest tpr is kept. Order of the input does not matter.
double auc_from_points(std::vector<std::pair<double, double>> points);
double auc_over_path(std::span<const FitResult> path, const CoefficientVector& truth);

// Round-robin assignment within events and within censored rows after a
// seeded shuffle of each group.
std::vector<std::size_t> stratified_folds(std::span<const int> status, std::size_t folds,
                                          std::uint64_t seed);

struct CvOptions {
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    double gamma = kDefaultGamma;
    // Explicit fold labels in [0, folds); empty means stratified_folds(seed).
    std::vector<std::size_t> fold_assignment;
};

struct CvResult {
    double lambda_opt = 0.0;
    std::size_t opt_index = 0;
    std::vector<double> grid;
    std::vector<double> curve;                    // mean held-out loss per lambda
    std::vector<std::vector<double>> fold_curves;  // [fold][lambda]
    std::vector<std::size_t> fold_of;
    std::size_t retries = 0;
};

/// K-fold cross-validation over a shared, decreasing lambda grid. Each fold is
/// scored by the held-out weighted loss of the fitting criterion, with
/// Kaplan-Meier weights recomputed inside the held-out rows. Ties in the mean
/// curve resolve to the larger lambda.
CvResult cross_validate(const InteractionDesign& design, const SurvivalDataset& sorted, LossKind kind,
                        PenaltyKind penalty_kind, const std::vector<double>& grid,
                        const SolverConfig& config, const CvOptions& options);

/// Strong-hierarchy refit: adds the main effects of every selected interaction
/// to the support and minimizes the unpenalized weighted loss over it.
FitResult hierarchy_refit(const FitResult& fit, const InteractionDesign& design,
                          const SurvivalDataset& dataset, const KMWeights& weights, LossKind kind,
                          const SolverConfig& config);

// Support closure used by hierarchy_refit.
std::vector<std::size_t> hierarchy_closure(std::span<const std::size_t> active, const CoordinateMap& map);
bool satisfies_strong_hierarchy(std::span<const std::size_t> active, const CoordinateMap& map);

struct StabilityReport {
    CoordinateMap map;
    std::vector<double> frequency;
    std::size_t B = 0;
    std::size_t drop = 0;
    std::size_t redraws = 0;
};

/// Refits at a fixed lambda after removing `drop` random subjects, B times,
/// and reports how often each coordinate is selected.
StabilityReport stability_selection(const InteractionDesign& design, const SurvivalDataset& sorted,
                                    LossKind kind, const PenaltySpec& penalty, std::size_t B,
                                    std::size_t drop, const SolverConfig& config, std::uint64_t seed,
                                    std::size_t threads = 1);

struct PrescreenResult {
    std::vector<std::size_t> kept;
    std::vector<double> p_values;
    std::vector<double> iqr;
    double iqr_median = 0.0;
    std::vector<std::string> warnings;
};

/// Marginal gene screen: keep gene k when the Wald p-value of its slope in the
/// KM-weighted least-squares fit of log y on (1, z_k) is <= p_threshold and its
/// interquartile range exceeds the median interquartile range over all genes.
PrescreenResult prescreen(const SurvivalDataset& sorted, double p_threshold);

// Linear-interpolation quantile (type 7) of unsorted values.
double quantile(std::vector<double> values, double prob);

struct MetricsRow {
    std::string method;
    std::string scenario;
    std::size_t replicate = 0;
    std::optional<double> auc;
    std::optional<double> se;
    std::optional<double> tpr;
    std::optional<double> fpr;
};

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);
void write_stability_csv(std::ostream& out, const StabilityReport& report);

}  // namespace relerr
