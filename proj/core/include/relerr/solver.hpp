#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "relerr/cd_engine.hpp"
#include "relerr/loss_functions.hpp"
#include "relerr/penalties.hpp"
#include "relerr/survival_data.hpp"

namespace relerr {

struct FitDiagnostics {
    std::size_t newton_failures = 0;
    std::size_t unfreezes = 0;
    std::size_t init_iterations = 0;  // MM iterations spent on the internal Lasso start
    bool stalled = false;         // an MM step was rejected for raising the objective
    bool refit_refused = false;   // hierarchy refit skipped (support too large)
    std::string note;
};

struct FitResult {
    CoefficientVector theta_hat;
    std::vector<double> objective_trace;  // penalized objective at theta^(0), theta^(1), ...
    std::size_t mm_iterations = 0;
    bool converged = false;
    std::vector<std::size_t> active_set;
    double lambda = 0.0;
    FitDiagnostics diagnostics;
};

double penalized_objective(LossKind kind, const PenaltySpec& penalty, const CoefficientVector& theta,
                           const InteractionDesign& design, const SurvivalDataset& dataset,
                           const KMWeights& weights);

/// Penalized relative-error (or LS/LAD) estimation by MM with coordinate descent.
///
/// Starting from theta_init (or the Lasso estimate at the same lambda), each
/// MM iteration rebuilds the loss majorizer and the local quadratic penalty
/// approximation at the current iterate, then runs `max_cd_passes` coordinate
/// sweeps. Iteration stops once the L2 change between iterates drops below
/// `tol` and no frozen coordinate violates its zero-stationarity condition.
/// Entries below eps_zero in magnitude are set to exactly zero on output.
FitResult fit_penalized(const InteractionDesign& design, const SurvivalDataset& dataset,
                        const KMWeights& weights, LossKind kind, const PenaltySpec& penalty,
                        const SolverConfig& config,
                        const std::optional<CoefficientVector>& theta_init = std::nullopt);

// Lasso estimate at `lambda` from the all-zero vector.
CoefficientVector lasso_init(const InteractionDesign& design, const SurvivalDataset& dataset,
                             const KMWeights& weights, LossKind kind, double lambda,
                             const SolverConfig& config);

// Lower-level entry reusing a prepared engine (path fits, refits on a column subset).
FitResult run_mm(CoordinateDescent& engine, const CoordinateMap& map, const PenaltySpec& penalty,
                 const SolverConfig& config, const std::optional<Eigen::VectorXd>& theta_init,
                 bool hard_threshold = true);

// max_j |dQ/dtheta_j| at theta = 0: the smallest lambda at which zero is stationary.
double lambda_max(const InteractionDesign& design, const SurvivalDataset& dataset,
                  const KMWeights& weights, LossKind kind, const SolverConfig& config = {});

// Log-spaced from lmax down to ratio * lmax; a single 0 when lmax == 0.
std::vector<double> lambda_grid(double lmax, std::size_t grid_size, double ratio);

struct PathOptions {
    std::size_t grid_size = 100;
    double ratio = 0.01;
    double gamma = kDefaultGamma;
    bool warm_start = true;
    // Stop after the first fit whose active set exceeds this size (0: full grid).
    std::size_t max_active = 0;
};

std::vector<FitResult> lambda_path(const InteractionDesign& design, const SurvivalDataset& dataset,
                                   const KMWeights& weights, LossKind kind, PenaltyKind penalty_kind,
                                   const PathOptions& options, const SolverConfig& config);

// Path over an explicit, decreasing lambda grid. With max_active > 0 the path
// ends early, after the first fit with more than max_active nonzeros.
std::vector<FitResult> lambda_path(const InteractionDesign& design, const SurvivalDataset& dataset,
                                   const KMWeights& weights, LossKind kind, PenaltyKind penalty_kind,
                                   const std::vector<double>& grid, double gamma, bool warm_start,
                                   const SolverConfig& config, std::size_t max_active = 0);

}  // namespace relerr
