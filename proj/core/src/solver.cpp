#include "relerr/solver.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "relerr/error.hpp"

namespace relerr {

namespace {

// Objective decrease between frozen-coordinate checks below which MM is treated as stalled.
constexpr double kStallDecrease = 1e-7;

}  // namespace

double penalized_objective(LossKind kind, const PenaltySpec& penalty, const CoefficientVector& theta,
                           const InteractionDesign& design, const SurvivalDataset& dataset,
                           const KMWeights& weights) {
    double total = weighted_objective(kind, theta, design, dataset, weights);
    for (std::size_t j = 0; j < theta.d(); ++j) total += penalty_value(theta[j], penalty);
    return total;
}

FitResult run_mm(CoordinateDescent& engine, const CoordinateMap& map, const PenaltySpec& penalty,
                 const SolverConfig& config, const std::optional<Eigen::VectorXd>& theta_init,
                 bool hard_threshold) {
    config.validate();
    engine.set_penalty(penalty);
    engine.set_theta(theta_init ? *theta_init : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(engine.d())));

    FitResult result;
    result.lambda = penalty.lambda;
    double current = engine.objective();
    if (std::isnan(current)) throw NumericalError("objective is NaN at the initial iterate");
    result.objective_trace.push_back(current);

    bool force_check = false;
    double at_check = current;
    for (std::size_t s = 0; s < config.max_mm_iters; ++s) {
        engine.build_surrogate();
        const bool check = force_check || s % config.kkt_every == 0;
        const Eigen::VectorXd previous = engine.theta();
        PassReport report;
        for (std::size_t pass = 0; pass < config.max_cd_passes; ++pass) {
            const auto r = engine.cd_pass(check && pass == 0);
            report.unfrozen += r.unfrozen;
            report.newton_failures += r.newton_failures;
        }
        if (config.block_step) engine.block_step();
        result.diagnostics.unfreezes += report.unfrozen;
        result.diagnostics.newton_failures += report.newton_failures;

        const double next = engine.objective();
        if (std::isnan(next)) {
            throw NumericalError(fmt::format("objective is NaN at MM iteration {}", s + 1));
        }
        // A clamped majorizer denominator can let the objective creep up; keep the
        // last iterate in that case.
        if (!(next <= current + 1e-12 * (1.0 + std::abs(current)))) {
            engine.set_theta(previous);
            result.diagnostics.stalled = true;
            result.converged = true;
            break;
        }
        result.objective_trace.push_back(next);
        current = next;
        ++result.mm_iterations;

        const double change = (engine.theta() - previous).norm();
        if (change < config.tol) {
            if (check && report.unfrozen == 0) {
                // A residual pinned at its kink holds the majorized steps near zero;
                // stop only when no single coordinate can still lower the objective.
                if (engine.polish(config.tol) == 0) {
                    result.converged = true;
                    break;
                }
                current = engine.objective();
                result.objective_trace.push_back(current);
            }
            force_check = true;
        } else {
            force_check = false;
            // Near a point where several residuals sit on their kinks the majorized
            // steps shrink geometrically; finish with exact coordinate moves.
            if (check && s > 0 && at_check - current < kStallDecrease * (1.0 + std::abs(current))) {
                engine.polish(config.tol);
                const double polished = engine.objective();
                if (polished < current) {
                    current = polished;
                    result.objective_trace.push_back(current);
                }
            }
        }
        if (check) at_check = current;
    }

    if (!result.converged) {
        engine.polish(config.tol);
        const double polished = engine.objective();
        if (polished < current) result.objective_trace.push_back(polished);
    }

    Eigen::VectorXd theta = engine.theta();
    if (hard_threshold) {
        for (Eigen::Index j = 0; j < theta.size(); ++j) {
            if (std::abs(theta[j]) < config.eps_zero) theta[j] = 0.0;
        }
    }
    result.theta_hat = CoefficientVector(map, std::move(theta));
    result.active_set = result.theta_hat.support();
    return result;
}

FitResult fit_penalized(const InteractionDesign& design, const SurvivalDataset& dataset,
                        const KMWeights& weights, LossKind kind, const PenaltySpec& penalty,
                        const SolverConfig& config,
                        const std::optional<CoefficientVector>& theta_init) {
    penalty.validate();
    CoordinateDescent engine(design, dataset, weights, kind, config);
    std::optional<Eigen::VectorXd> start;
    if (theta_init) {
        if (theta_init->d() != design.d()) {
            throw DimensionError(fmt::format("theta_init has length {}, design has {} columns",
                                             theta_init->d(), design.d()));
        }
        start = theta_init->values();
    } else {
        const PenaltySpec lasso{PenaltyKind::Lasso, penalty.lambda, penalty.gamma};
        const auto init = run_mm(engine, design.index_map(), lasso, config, std::nullopt);
        auto fit = run_mm(engine, design.index_map(), penalty, config, init.theta_hat.values());
        fit.diagnostics.init_iterations = init.mm_iterations;
        return fit;
    }
    return run_mm(engine, design.index_map(), penalty, config, start);
}

CoefficientVector lasso_init(const InteractionDesign& design, const SurvivalDataset& dataset,
                             const KMWeights& weights, LossKind kind, double lambda,
                             const SolverConfig& config) {
    CoordinateDescent engine(design, dataset, weights, kind, config);
    const PenaltySpec lasso{PenaltyKind::Lasso, lambda, kDefaultGamma};
    return run_mm(engine, design.index_map(), lasso, config, std::nullopt).theta_hat;
}

double lambda_max(const InteractionDesign& design, const SurvivalDataset& dataset,
                  const KMWeights& weights, LossKind kind, const SolverConfig& config) {
    CoordinateDescent engine(design, dataset, weights, kind, config);
    engine.build_surrogate();
    const Eigen::VectorXd g = engine.loss_gradient();
    return g.size() == 0 ? 0.0 : g.cwiseAbs().maxCoeff();
}

std::vector<double> lambda_grid(double lmax, std::size_t grid_size, double ratio) {
    if (grid_size < 2) throw ConfigError("grid_size must be at least 2");
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ConfigError(fmt::format("grid ratio must lie in (0, 1), got {}", ratio));
    }
    if (!(lmax > 0.0)) return {0.0};
    std::vector<double> grid(grid_size);
    const double step = std::log(ratio) / static_cast<double>(grid_size - 1);
    for (std::size_t k = 0; k < grid_size; ++k) {
        grid[k] = lmax * std::exp(step * static_cast<double>(k));
    }
    grid.front() = lmax;
    return grid;
}

std::vector<FitResult> lambda_path(const InteractionDesign& design, const SurvivalDataset& dataset,
                                   const KMWeights& weights, LossKind kind, PenaltyKind penalty_kind,
                                   const std::vector<double>& grid, double gamma, bool warm_start,
                                   const SolverConfig& config, std::size_t max_active) {
    CoordinateDescent engine(design, dataset, weights, kind, config);
    std::vector<FitResult> path;
    path.reserve(grid.size());
    std::optional<Eigen::VectorXd> warm;
    for (const double lambda : grid) {
        const PenaltySpec penalty{penalty_kind, lambda, gamma};
        std::optional<Eigen::VectorXd> start = warm_start ? warm : std::nullopt;
        std::size_t init_iterations = 0;
        if (!start) {
            const PenaltySpec lasso{PenaltyKind::Lasso, lambda, gamma};
            const auto init = run_mm(engine, design.index_map(), lasso, config, std::nullopt);
            start = init.theta_hat.values();
            init_iterations = init.mm_iterations;
        }
        auto fit = run_mm(engine, design.index_map(), penalty, config, start);
        fit.diagnostics.init_iterations = init_iterations;
        warm = fit.theta_hat.values();
        const bool saturated = max_active > 0 && fit.active_set.size() > max_active;
        path.push_back(std::move(fit));
        if (saturated) break;
    }
    return path;
}

std::vector<FitResult> lambda_path(const InteractionDesign& design, const SurvivalDataset& dataset,
                                   const KMWeights& weights, LossKind kind, PenaltyKind penalty_kind,
                                   const PathOptions& options, const SolverConfig& config) {
    const double lmax = lambda_max(design, dataset, weights, kind, config);
    const auto grid = lambda_grid(lmax, options.grid_size, options.ratio);
    return lambda_path(design, dataset, weights, kind, penalty_kind, grid, options.gamma,
                       options.warm_start, config, options.max_active);
}

}  // namespace relerr
