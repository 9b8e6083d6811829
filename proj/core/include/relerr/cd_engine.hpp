#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "relerr/loss_functions.hpp"
#include "relerr/penalties.hpp"
#include "relerr/survival_data.hpp"

namespace relerr {

// How the penalty enters the per-coordinate slice of the MM surrogate.
//  Exact: the penalty itself, with zero checked as an explicit candidate.
//  LocalQuadratic: c_j/2 theta_j^2 with c_j = phi'(|theta_s,j|)/|theta_s,j|; coordinates with
//  |theta_s,j| < eps_zero are frozen and revisited every kkt_every iterations.
enum class PenaltySurrogate { Exact, LocalQuadratic };

struct SolverConfig {
    double tol = 1e-6;            // L2 change between consecutive MM iterates
    std::size_t max_mm_iters = 500;
    std::size_t max_cd_passes = 1;  // CD passes per majorizer
    std::size_t newton_max = 20;    // Newton steps per coordinate
    double eps_zero = 1e-6;
    double eps_denom = kDefaultEpsDenom;
    std::size_t kkt_every = 10;  // MM iterations between frozen-coordinate checks
    PenaltySurrogate penalty_surrogate = PenaltySurrogate::Exact;
    // After the CD passes, take a damped Newton step on the surrogate jointly over
    // the nonzero coordinates. Single-coordinate moves cannot leave the
    // hyperplane of a row whose majorizer weight is near 1/eps_denom.
    bool block_step = true;
    std::uint64_t seed = 0;

    void validate() const;
};

struct PassReport {
    std::size_t updated = 0;
    std::size_t unfrozen = 0;
    std::size_t zeroed = 0;
    std::size_t newton_failures = 0;
};

/// Coordinate descent over the MM surrogate
///
///   S(theta; theta_s) = Qbar(theta; theta_s) + sum_{j quad} [phi(theta_s,j) + c_j/2 (theta_j^2 - theta_s,j^2)]
///                                            + sum_{j exact} phi(theta_j),
///
/// where Qbar is the loss majorizer (LARE, LAD) or the loss itself (LPRE, LS)
/// and c_j is the local quadratic penalty coefficient. With the Exact penalty
/// surrogate every coordinate is in the exact set; with LocalQuadratic only
/// the frozen ones are. S dominates the penalized objective and equals it at
/// theta_s, so every accepted coordinate move is a descent step for the
/// penalized objective too.
///
/// Only rows with positive weight are kept; the linear predictor of those rows
/// is maintained incrementally so a coordinate update costs O(n) per Newton step.
class CoordinateDescent {
public:
    CoordinateDescent(const InteractionDesign& design, const SurvivalDataset& dataset,
                      const KMWeights& weights, LossKind kind, const SolverConfig& config);

    std::size_t d() const noexcept { return static_cast<std::size_t>(u_.cols()); }
    std::size_t rows() const noexcept { return static_cast<std::size_t>(u_.rows()); }
    LossKind kind() const noexcept { return kind_; }

    // Coordinates outside the mask stay at zero and are never visited.
    void set_free_mask(std::vector<char> mask);
    bool is_free(std::size_t j) const noexcept { return free_.empty() || free_[j] != 0; }

    void set_penalty(const PenaltySpec& spec);
    const PenaltySpec& penalty() const noexcept { return penalty_; }

    void set_theta(const Eigen::VectorXd& theta);
    const Eigen::VectorXd& theta() const noexcept { return theta_; }

    // Rebuild loss-majorizer weights and penalty coefficients at the current theta.
    void build_surrogate();
    // True when coordinate j carries the exact penalty in the current surrogate.
    bool exact(std::size_t j) const noexcept { return exact_[j] != 0; }

    double loss() const;       // weighted loss at current theta
    double objective() const;  // loss + sum_j phi(theta_j)
    double surrogate() const;  // S(theta; theta_s) at current theta

    // Gradient of the majorized loss at the current theta (equals the loss
    // gradient when theta == theta_s away from kinks).
    Eigen::VectorXd loss_gradient() const;

    // Minimizer of the surrogate restricted to coordinate j (not applied).
    double coordinate_update_1d(std::size_t j);
    void apply(std::size_t j, double value);

    // One sweep j = 0..d-1. Exact-penalty coordinates sitting at zero are
    // visited only when check_frozen is set, and move off zero when their
    // slice gradient exceeds the penalty slope.
    PassReport cd_pass(bool check_frozen);

    // Newton step on the surrogate over the free coordinates that are nonzero
    // (or carry a quadratic penalty). The step is cut where the first exact
    // coordinate reaches zero, which is then set to zero, and halved until the
    // surrogate decreases. Returns true when the step was accepted.
    bool block_step();

    // For LARE and LAD: sweeps that move each free coordinate to the first
    // local minimum of the true penalized objective along its descent direction,
    // repeated until no move in a sweep reaches tol / 1000. Returns the number
    // of moves of at least tol.
    std::size_t polish(double tol, std::size_t max_sweeps = 20);

private:
    struct SliceEval {
        double f = 0.0;
        double g = 0.0;
        double h = 0.0;
        double gn = 0.0;
    };
    enum class PenaltyMode { Quadratic, Exact };

    SliceEval eval_loss_slice(std::size_t j, double delta) const;
    double penalty_part(std::size_t j, double t, PenaltyMode mode, double& g, double& h) const;
    // Safeguarded Newton on the slice; branch != 0 restricts to sign(t) == branch.
    double newton_1d(std::size_t j, double t0, PenaltyMode mode, int branch, bool& failed, double& f_out);
    void exact_update(std::size_t j, bool allow_activation, PassReport& report);
    double slice_total(std::size_t j, double t, PenaltyMode mode) const;
    // True penalized objective with coordinate j moved by delta, less the
    // penalty terms of the other coordinates.
    double objective_along(std::size_t j, double delta) const;
    // One-sided derivative of the true objective along coordinate j at delta
    // (side = +1 from the right, -1 from the left); LARE and LAD only.
    double slope_along(std::size_t j, double delta, double side) const;
    // Move along coordinate j to the first local minimum of the true objective.
    double kinked_minimum_1d(std::size_t j) const;
    // Majorized-loss gradient and Gauss-Newton curvature of row i at eta.
    void row_derivatives(std::size_t i, double eta, double& g, double& h) const;
    void refresh_exp();
    bool uses_exp() const noexcept { return kind_ == LossKind::LARE || kind_ == LossKind::LPRE; }

    Eigen::MatrixXd u_;  // positive-weight rows only
    std::vector<double> y_;
    std::vector<double> log_y_;
    std::vector<double> inv_y_;
    std::vector<double> w_;
    LossKind kind_;
    SolverConfig config_;
    PenaltySpec penalty_;

    Eigen::VectorXd theta_;
    Eigen::VectorXd eta_;
    Eigen::VectorXd exp_eta_;  // clamped exp(eta_) and its reciprocal, kept in step with eta_
    Eigen::VectorXd exp_neg_eta_;
    // Majorizer coefficients per row: LARE uses (a, b, c), LAD (a, c), LS/LPRE use w.
    std::vector<double> coef_a_;
    std::vector<double> coef_b_;
    std::vector<double> coef_c_;
    Eigen::VectorXd theta_s_;
    std::vector<double> quad_;      // c_j for live coordinates
    std::vector<char> exact_;
    std::vector<char> free_;
};

}  // namespace relerr
