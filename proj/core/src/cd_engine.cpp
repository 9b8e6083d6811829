#include "relerr/cd_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include "relerr/error.hpp"

namespace relerr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kStationary = 1e-12;
constexpr int kMaxHalvings = 40;
// Relative residual below which a row counts as sitting on its kink.
constexpr double kOnKink = 1e-13;

inline double clamped_exp(double eta) { return std::exp(std::clamp(eta, -kEtaClamp, kEtaClamp)); }

}  // namespace

void SolverConfig::validate() const {
    if (!(tol > 0.0)) throw ConfigError(fmt::format("tol must be positive, got {}", tol));
    if (max_mm_iters == 0) throw ConfigError("max_mm_iters must be at least 1");
    if (max_cd_passes == 0) throw ConfigError("max_cd_passes must be at least 1");
    if (newton_max == 0) throw ConfigError("newton_max must be at least 1");
    if (!(eps_zero > 0.0)) throw ConfigError("eps_zero must be positive");
    if (!(eps_denom > 0.0)) throw ConfigError("eps_denom must be positive");
    if (kkt_every == 0) throw ConfigError("kkt_every must be at least 1");
}

CoordinateDescent::CoordinateDescent(const InteractionDesign& design, const SurvivalDataset& dataset,
                                     const KMWeights& weights, LossKind kind,
                                     const SolverConfig& config)
    : kind_(kind), config_(config) {
    config_.validate();
    if (design.n() != dataset.n() || weights.size() != dataset.n()) {
        throw DimensionError(fmt::format("design rows {}, dataset rows {}, weights {}", design.n(),
                                         dataset.n(), weights.size()));
    }
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        if (weights[i] > 0.0) keep.push_back(static_cast<Eigen::Index>(i));
    }
    if (keep.empty()) throw DataError("no events; weights identically zero");
    u_.resize(static_cast<Eigen::Index>(keep.size()), design.matrix().cols());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        u_.row(static_cast<Eigen::Index>(r)) = design.matrix().row(keep[r]);
        const auto i = static_cast<std::size_t>(keep[r]);
        y_.push_back(dataset.times()[i]);
        log_y_.push_back(std::log(dataset.times()[i]));
        inv_y_.push_back(1.0 / dataset.times()[i]);
        w_.push_back(weights[i]);
    }
    const auto m = keep.size();
    coef_a_.assign(m, 0.0);
    coef_b_.assign(m, 0.0);
    coef_c_.assign(m, 0.0);
    theta_ = Eigen::VectorXd::Zero(u_.cols());
    theta_s_ = theta_;
    eta_ = Eigen::VectorXd::Zero(u_.rows());
    exp_eta_ = Eigen::VectorXd::Ones(u_.rows());
    exp_neg_eta_ = Eigen::VectorXd::Ones(u_.rows());
    quad_.assign(d(), 0.0);
    exact_.assign(d(), 0);
}

void CoordinateDescent::refresh_exp() {
    if (!uses_exp()) return;
    for (Eigen::Index r = 0; r < eta_.size(); ++r) {
        exp_eta_[r] = clamped_exp(eta_[r]);
        exp_neg_eta_[r] = 1.0 / exp_eta_[r];
    }
}

void CoordinateDescent::set_free_mask(std::vector<char> mask) {
    if (!mask.empty() && mask.size() != d()) {
        throw DimensionError(fmt::format("free mask has length {}, expected {}", mask.size(), d()));
    }
    free_ = std::move(mask);
    for (std::size_t j = 0; j < d(); ++j) {
        if (!is_free(j)) theta_[static_cast<Eigen::Index>(j)] = 0.0;
    }
    eta_.noalias() = u_ * theta_;
    refresh_exp();
}

void CoordinateDescent::set_penalty(const PenaltySpec& spec) {
    spec.validate();
    penalty_ = spec;
}

void CoordinateDescent::set_theta(const Eigen::VectorXd& theta) {
    if (static_cast<std::size_t>(theta.size()) != d()) {
        throw DimensionError(fmt::format("theta has length {}, expected {}", theta.size(), d()));
    }
    theta_ = theta;
    for (std::size_t j = 0; j < d(); ++j) {
        if (!is_free(j)) theta_[static_cast<Eigen::Index>(j)] = 0.0;
    }
    eta_.noalias() = u_ * theta_;
    refresh_exp();
}

void CoordinateDescent::build_surrogate() {
    // Fresh product so incremental drift never accumulates across MM steps.
    eta_.noalias() = u_ * theta_;
    refresh_exp();
    theta_s_ = theta_;
    const double eps = config_.eps_denom;
    for (std::size_t i = 0; i < rows(); ++i) {
        const double eta = eta_[static_cast<Eigen::Index>(i)];
        switch (kind_) {
            case LossKind::LARE: {
                const double e = clamped_exp(eta);
                const double d1 = std::max(std::abs(1.0 - e / y_[i]), eps);
                const double d2 = std::max(std::abs(1.0 - y_[i] / e), eps);
                coef_a_[i] = w_[i] / (2.0 * d1);
                coef_b_[i] = w_[i] / (2.0 * d2);
                coef_c_[i] = 0.5 * w_[i] * (d1 + d2);
                break;
            }
            case LossKind::LAD: {
                const double rs = std::max(std::abs(log_y_[i] - eta), eps);
                coef_a_[i] = w_[i] / (2.0 * rs);
                coef_c_[i] = 0.5 * w_[i] * rs;
                break;
            }
            case LossKind::LS:
            case LossKind::LPRE:
                coef_a_[i] = w_[i];
                break;
        }
    }
    const bool no_penalty = penalty_.lambda == 0.0;
    for (std::size_t j = 0; j < d(); ++j) {
        if (no_penalty) {
            quad_[j] = 0.0;
            exact_[j] = 0;
            continue;
        }
        if (config_.penalty_surrogate == PenaltySurrogate::Exact) {
            exact_[j] = 1;
            quad_[j] = 0.0;
            continue;
        }
        const auto c = local_quadratic_coefficient(theta_[static_cast<Eigen::Index>(j)], penalty_,
                                                   config_.eps_zero);
        exact_[j] = c ? 0 : 1;
        quad_[j] = c.value_or(0.0);
    }
}

CoordinateDescent::SliceEval CoordinateDescent::eval_loss_slice(std::size_t j, double delta) const {
    const auto col = u_.col(static_cast<Eigen::Index>(j));
    const auto m = static_cast<Eigen::Index>(rows());
    double f = 0.0, g = 0.0, h = 0.0, gn = 0.0;
    switch (kind_) {
        case LossKind::LPRE:
            for (Eigen::Index r = 0; r < m; ++r) {
                const double uij = col[r];
                const double eta = eta_[r] + uij * delta;
                if (!(std::abs(eta) < kEtaClamp)) return {kInf, 0.0, 0.0, 0.0};
                double e = exp_eta_[r], einv = exp_neg_eta_[r];
                if (delta != 0.0) {
                    e = std::exp(eta);
                    einv = 1.0 / e;
                }
                const double up = e * inv_y_[r];
                const double dn = y_[r] * einv;
                const double a = coef_a_[r];
                f += a * (up + dn - 2.0);
                g += uij * a * (up - dn);
                h += uij * uij * a * (up + dn);
            }
            gn = h;
            break;
        case LossKind::LARE:
            for (Eigen::Index r = 0; r < m; ++r) {
                const double uij = col[r];
                const double eta = eta_[r] + uij * delta;
                if (!(std::abs(eta) < kEtaClamp)) return {kInf, 0.0, 0.0, 0.0};
                double e = exp_eta_[r], einv = exp_neg_eta_[r];
                if (delta != 0.0) {
                    e = std::exp(eta);
                    einv = 1.0 / e;
                }
                const double pr = e * inv_y_[r];
                const double vr = y_[r] * einv;
                const double a = coef_a_[r];
                const double b = coef_b_[r];
                f += a * (1.0 - pr) * (1.0 - pr) + b * (1.0 - vr) * (1.0 - vr) + coef_c_[r];
                g += uij * (-2.0 * a * (1.0 - pr) * pr + 2.0 * b * (1.0 - vr) * vr);
                const double u2 = uij * uij;
                h += u2 * (2.0 * a * pr * (2.0 * pr - 1.0) + 2.0 * b * vr * (2.0 * vr - 1.0));
                gn += u2 * (2.0 * a * pr * pr + 2.0 * b * vr * vr);
            }
            break;
        case LossKind::LS:
        case LossKind::LAD:
            for (Eigen::Index r = 0; r < m; ++r) {
                const double uij = col[r];
                const double res = log_y_[r] - eta_[r] - uij * delta;
                const double a = coef_a_[r];
                f += a * res * res + coef_c_[r];
                g -= 2.0 * uij * a * res;
                h += 2.0 * uij * uij * a;
            }
            gn = h;
            break;
    }
    return {f, g, h, gn};
}

double CoordinateDescent::penalty_part(std::size_t j, double t, PenaltyMode mode, double& g,
                                       double& h) const {
    if (mode == PenaltyMode::Quadratic) {
        g = quad_[j] * t;
        h = quad_[j];
        return 0.5 * quad_[j] * t * t;
    }
    const double a = std::abs(t);
    const double sign = t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
    g = sign * penalty_derivative(a, penalty_);
    h = penalty_curvature(a, penalty_);
    return penalty_value(t, penalty_);
}

double CoordinateDescent::slice_total(std::size_t j, double t, PenaltyMode mode) const {
    const double delta = t - theta_[static_cast<Eigen::Index>(j)];
    const auto s = eval_loss_slice(j, delta);
    double g, h;
    return s.f + penalty_part(j, t, mode, g, h);
}

double CoordinateDescent::newton_1d(std::size_t j, double t0, PenaltyMode mode, int branch,
                                    bool& failed, double& f_out) {
    failed = false;
    const double base = theta_[static_cast<Eigen::Index>(j)];
    auto evaluate = [&](double t, double& f, double& g, double& h) {
        const auto s = eval_loss_slice(j, t - base);
        double pg, ph;
        const double pf = penalty_part(j, t, mode, pg, ph);
        if (branch != 0 && t == 0.0) pg = branch * penalty_derivative(0.0, penalty_);
        f = s.f + pf;
        g = s.g + pg;
        h = s.h + ph;
        if (!(h > 0.0)) h = s.gn + std::max(ph, 0.0);
    };

    double t = t0;
    double f, g, h;
    evaluate(t, f, g, h);
    f_out = f;
    if (!std::isfinite(f) || !std::isfinite(g)) {
        failed = true;
        return t0;
    }
    for (std::size_t it = 0; it < config_.newton_max; ++it) {
        if (std::abs(g) < kStationary) break;
        if (!(h > 0.0) || !std::isfinite(h)) {
            failed = true;
            break;
        }
        double step = -g / h;
        bool accepted = false;
        double tn = t, fn = f, gnw = g, hn = h;
        for (int half = 0; half < kMaxHalvings; ++half) {
            tn = t + step;
            if (branch != 0 && tn * branch < 0.0) {
                step *= 0.5;
                continue;
            }
            evaluate(tn, fn, gnw, hn);
            if (std::isfinite(fn) && fn <= f) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        const double moved = std::abs(tn - t);
        t = tn;
        f = fn;
        g = gnw;
        h = hn;
        if (!std::isfinite(g)) {
            failed = true;
            break;
        }
        f_out = f;
        if (moved <= 1e-13 * (1.0 + std::abs(t))) break;
    }
    return t;
}

double CoordinateDescent::coordinate_update_1d(std::size_t j) {
    bool failed = false;
    double f = 0.0;
    const double t0 = theta_[static_cast<Eigen::Index>(j)];
    if (exact_[j]) {
        const int branch = t0 > 0.0 ? 1 : (t0 < 0.0 ? -1 : 0);
        if (branch == 0) return t0;
        const double t = newton_1d(j, t0, PenaltyMode::Exact, branch, failed, f);
        return failed ? t0 : t;
    }
    const double t = newton_1d(j, t0, PenaltyMode::Quadratic, 0, failed, f);
    return failed ? t0 : t;
}

void CoordinateDescent::apply(std::size_t j, double value) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double delta = value - theta_[jj];
    if (delta == 0.0) return;
    eta_.noalias() += delta * u_.col(jj);
    theta_[jj] = value;
    if (!uses_exp()) return;
    const auto col = u_.col(jj);
    for (Eigen::Index r = 0; r < eta_.size(); ++r) {
        if (col[r] == 0.0) continue;
        exp_eta_[r] = clamped_exp(eta_[r]);
        exp_neg_eta_[r] = 1.0 / exp_eta_[r];
    }
}

void CoordinateDescent::exact_update(std::size_t j, bool allow_activation, PassReport& report) {
    const double current = theta_[static_cast<Eigen::Index>(j)];
    const int sign = current > 0.0 ? 1 : (current < 0.0 ? -1 : 0);
    double best_t = current;
    double best_f = kInf;
    if (sign != 0) {
        bool failed = false;
        double f = kInf;
        const double t = newton_1d(j, current, PenaltyMode::Exact, sign, failed, f);
        if (failed) ++report.newton_failures;
        else {
            best_t = t;
            best_f = f;
        }
    }
    // Zero is a candidate of its own: the penalty is not differentiable there.
    const auto at_zero = eval_loss_slice(j, -current);
    if (sign == 0) best_f = at_zero.f;
    else if (at_zero.f <= best_f) {
        best_t = 0.0;
        best_f = at_zero.f;
    }
    const double slope = penalty_derivative(0.0, penalty_);
    if (allow_activation && std::abs(at_zero.g) > slope * (1.0 + 1e-10)) {
        const int branch = at_zero.g > 0.0 ? -1 : 1;
        if (branch != sign) {
            bool failed = false;
            double f = kInf;
            const double t = newton_1d(j, 0.0, PenaltyMode::Exact, branch, failed, f);
            if (failed) ++report.newton_failures;
            else if (t != 0.0 && f < best_f) {
                best_t = t;
                best_f = f;
                if (sign == 0) ++report.unfrozen;
            }
        }
    }
    if (best_t != current) {
        apply(j, best_t);
        if (best_t == 0.0) ++report.zeroed;
        else ++report.updated;
    }
}

PassReport CoordinateDescent::cd_pass(bool check_frozen) {
    PassReport report;
    for (std::size_t j = 0; j < d(); ++j) {
        if (!is_free(j)) continue;
        const auto jj = static_cast<Eigen::Index>(j);
        if (exact_[j]) {
            // Coordinates at zero are only revisited on check passes.
            if (theta_[jj] == 0.0 && !check_frozen) continue;
            exact_update(j, check_frozen, report);
            continue;
        }
        bool failed = false;
        double f = 0.0;
        const double t = newton_1d(j, theta_[jj], PenaltyMode::Quadratic, 0, failed, f);
        if (failed) {
            ++report.newton_failures;
            continue;
        }
        if (t != theta_[jj]) {
            apply(j, t);
            ++report.updated;
        }
    }
    return report;
}

void CoordinateDescent::row_derivatives(std::size_t i, double eta, double& g, double& h) const {
    switch (kind_) {
        case LossKind::LPRE: {
            const double e = clamped_exp(eta);
            const double up = e * inv_y_[i];
            const double dn = y_[i] / e;
            g = coef_a_[i] * (up - dn);
            h = coef_a_[i] * (up + dn);
            return;
        }
        case LossKind::LARE: {
            const double e = clamped_exp(eta);
            const double pr = e * inv_y_[i];
            const double vr = y_[i] / e;
            g = -2.0 * coef_a_[i] * (1.0 - pr) * pr + 2.0 * coef_b_[i] * (1.0 - vr) * vr;
            h = 2.0 * coef_a_[i] * pr * pr + 2.0 * coef_b_[i] * vr * vr;
            return;
        }
        case LossKind::LS:
        case LossKind::LAD:
            g = -2.0 * coef_a_[i] * (log_y_[i] - eta);
            h = 2.0 * coef_a_[i];
            return;
    }
}

bool CoordinateDescent::block_step() {
    std::vector<Eigen::Index> block;
    for (std::size_t j = 0; j < d(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (is_free(j) && (!exact_[j] || theta_[jj] != 0.0)) block.push_back(jj);
    }
    // With at least as many coordinates as rows the Gauss-Newton curvature is
    // singular and the step would be set by the ridge alone.
    if (block.empty() || block.size() >= rows()) return false;
    const auto k = static_cast<Eigen::Index>(block.size());
    const auto m = static_cast<Eigen::Index>(rows());

    Eigen::MatrixXd ub(m, k);
    for (Eigen::Index b = 0; b < k; ++b) ub.col(b) = u_.col(block[static_cast<std::size_t>(b)]);
    Eigen::VectorXd row_g(m), row_h(m);
    for (Eigen::Index r = 0; r < m; ++r) row_derivatives(static_cast<std::size_t>(r), eta_[r], row_g[r], row_h[r]);

    Eigen::VectorXd grad = ub.transpose() * row_g;
    const Eigen::MatrixXd scaled = row_h.cwiseMax(0.0).cwiseSqrt().asDiagonal() * ub;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(k, k);
    hess.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
    hess.triangularView<Eigen::StrictlyUpper>() = hess.transpose();
    for (Eigen::Index b = 0; b < k; ++b) {
        const auto j = static_cast<std::size_t>(block[static_cast<std::size_t>(b)]);
        double pg = 0.0, ph = 0.0;
        penalty_part(j, theta_[block[static_cast<std::size_t>(b)]], exact_[j] ? PenaltyMode::Exact : PenaltyMode::Quadratic,
                     pg, ph);
        grad[b] += pg;
        hess(b, b) += std::max(ph, 0.0);
    }
    if (!grad.allFinite() || !hess.allFinite()) return false;
    hess.diagonal().array() += 1e-12 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());

    if (grad.norm() < kStationary) return false;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd dir = -ldlt.solve(grad);
    if (!dir.allFinite() || dir.norm() == 0.0) return false;

    const Eigen::VectorXd theta0 = theta_;
    const Eigen::VectorXd eta0 = eta_;
    const Eigen::VectorXd exp0 = exp_eta_;
    const Eigen::VectorXd exp_neg0 = exp_neg_eta_;
    const double f0 = surrogate();
    // Longest step before an exact-penalty coordinate would change sign; the
    // first coordinate to reach zero is set to exactly zero there.
    double max_step = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index b = 0; b < k; ++b) {
        const auto jj = block[static_cast<std::size_t>(b)];
        if (!exact_[static_cast<std::size_t>(jj)] || theta0[jj] * dir[b] >= 0.0) continue;
        const double to_zero = -theta0[jj] / dir[b];
        if (to_zero < max_step) {
            max_step = to_zero;
            blocking = b;
        }
    }
    double step = max_step;
    for (int half = 0; half < kMaxHalvings; ++half, step *= 0.5) {
        theta_ = theta0;
        for (Eigen::Index b = 0; b < k; ++b) {
            const auto jj = block[static_cast<std::size_t>(b)];
            theta_[jj] = theta0[jj] + step * dir[b];
        }
        if (half == 0 && blocking >= 0) theta_[block[static_cast<std::size_t>(blocking)]] = 0.0;
        eta_.noalias() = u_ * theta_;
        refresh_exp();
        const double f = surrogate();
        if (std::isfinite(f) && f < f0) return true;
    }
    theta_ = theta0;
    eta_ = eta0;
    exp_eta_ = exp0;
    exp_neg_eta_ = exp_neg0;
    return false;
}

double CoordinateDescent::objective_along(std::size_t j, double delta) const {
    const auto jj = static_cast<Eigen::Index>(j);
    const auto col = u_.col(jj);
    double total = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        total += w_[i] * observation_loss(kind_, y_[i], eta_[r] + col[r] * delta);
    }
    return total + penalty_value(theta_[jj] + delta, penalty_);
}

double CoordinateDescent::slope_along(std::size_t j, double delta, double side) const {
    const auto jj = static_cast<Eigen::Index>(j);
    const auto col = u_.col(jj);
    double total = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        if (col[r] == 0.0) continue;
        const double eta = eta_[r] + col[r] * delta;
        const double res = eta - log_y_[i];
        double sign = res > 0.0 ? 1.0 : -1.0;
        if (std::abs(res) <= kOnKink * (1.0 + std::abs(log_y_[i]))) sign = col[r] * side > 0.0 ? 1.0 : -1.0;
        double slope = w_[i];
        if (kind_ == LossKind::LARE) {
            const double e = clamped_exp(eta);
            slope *= e * inv_y_[i] + y_[i] / e;
        }
        total += sign * slope * col[r];
    }
    const double t = theta_[jj] + delta;
    const double pd = penalty_derivative(std::abs(t), penalty_);
    const double pen_sign = t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : side);
    return total + pen_sign * pd;
}

double CoordinateDescent::kinked_minimum_1d(std::size_t j) const {
    constexpr int kMaxExpansions = 60;
    constexpr int kBisections = 80;
    const double up = slope_along(j, 0.0, 1.0);
    const double down = -slope_along(j, 0.0, -1.0);
    const double scale = 1e-12 * (1.0 + std::abs(up) + std::abs(down));
    if (up >= -scale && down >= -scale) return 0.0;
    const double dir = up < down ? 1.0 : -1.0;
    // Derivative of s -> objective(theta + dir s e_j), from the left or the right.
    const auto dpsi = [&](double s, double from) { return dir * slope_along(j, dir * s, dir * from); };

    const auto jj = static_cast<Eigen::Index>(j);
    const auto col = u_.col(jj);
    std::vector<double> breaks;
    for (std::size_t i = 0; i < rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        if (col[r] == 0.0) continue;
        const double s = dir * (log_y_[i] - eta_[r]) / col[r];
        if (s > 0.0) breaks.push_back(s);
    }
    if (theta_[jj] != 0.0 && -dir * theta_[jj] > 0.0) breaks.push_back(-dir * theta_[jj]);
    std::sort(breaks.begin(), breaks.end());

    const auto bisect = [&](double lo, double hi) {
        for (int k = 0; k < kBisections && hi - lo > 1e-15 * (1.0 + hi); ++k) {
            const double mid = 0.5 * (lo + hi);
            if (dpsi(mid, -1.0) < 0.0) lo = mid;
            else hi = mid;
        }
        return dir * 0.5 * (lo + hi);
    };

    // Galloping then binary search for the first kink the objective is no
    // longer falling into. The loss part is convex along the line; with MCP the
    // search may pass a local minimum, which only lengthens a descent move.
    const auto falling_into = [&](std::size_t k) { return dpsi(breaks[k], -1.0) < 0.0; };
    const std::size_t count = breaks.size();
    std::size_t first = 0, last = count, stride = 1;
    while (first < count) {
        const std::size_t probe = std::min(first + stride - 1, count - 1);
        if (!falling_into(probe)) {
            last = probe;
            break;
        }
        first = probe + 1;
        stride *= 2;
    }
    while (first < last) {
        const std::size_t mid = first + (last - first) / 2;
        if (falling_into(mid)) first = mid + 1;
        else last = mid;
    }
    if (first < count) {
        // breaks[first] is the first kink not fallen into; the previous one is passed.
        const double lo = first == 0 ? 0.0 : breaks[first - 1];
        if (first > 0 && dpsi(lo, 1.0) >= 0.0) return dir * lo;
        return bisect(lo, breaks[first]);
    }
    const double lo = breaks.empty() ? 0.0 : breaks.back();
    if (lo > 0.0 && dpsi(lo, 1.0) >= 0.0) return dir * lo;
    double hi = lo + std::max(1.0, lo);
    for (int k = 0; k < kMaxExpansions; ++k, hi = lo + 2.0 * (hi - lo)) {
        const double slope = dpsi(hi, -1.0);
        if (!std::isfinite(slope)) break;
        if (slope >= 0.0) return bisect(lo, hi);
    }
    return dir * lo;
}

std::size_t CoordinateDescent::polish(double tol, std::size_t max_sweeps) {
    if (kind_ != LossKind::LARE && kind_ != LossKind::LAD) return 0;
    std::size_t large = 0;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double biggest = 0.0;
        for (std::size_t j = 0; j < d(); ++j) {
            if (!is_free(j)) continue;
            const double delta = kinked_minimum_1d(j);
            if (delta == 0.0 || !std::isfinite(delta)) continue;
            if (!(objective_along(j, delta) < objective_along(j, 0.0))) continue;
            apply(j, theta_[static_cast<Eigen::Index>(j)] + delta);
            biggest = std::max(biggest, std::abs(delta));
            if (std::abs(delta) >= tol) ++large;
        }
        if (biggest < 1e-3 * tol) break;
    }
    return large;
}

double CoordinateDescent::loss() const {
    double total = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
        total += w_[i] * observation_loss(kind_, y_[i], eta_[static_cast<Eigen::Index>(i)]);
    }
    return total;
}

double CoordinateDescent::objective() const {
    double total = loss();
    for (std::size_t j = 0; j < d(); ++j) total += penalty_value(theta_[static_cast<Eigen::Index>(j)], penalty_);
    return total;
}

double CoordinateDescent::surrogate() const {
    double total = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
        const double eta = eta_[static_cast<Eigen::Index>(i)];
        switch (kind_) {
            case LossKind::LARE: {
                if (!(std::abs(eta) < kEtaClamp)) return kInf;
                const double e = std::exp(eta);
                const double pr = 1.0 - e / y_[i];
                const double vr = 1.0 - y_[i] / e;
                total += coef_a_[i] * pr * pr + coef_b_[i] * vr * vr + coef_c_[i];
                break;
            }
            case LossKind::LAD: {
                const double res = log_y_[i] - eta;
                total += coef_a_[i] * res * res + coef_c_[i];
                break;
            }
            case LossKind::LS:
            case LossKind::LPRE:
                total += w_[i] * observation_loss(kind_, y_[i], eta);
                break;
        }
    }
    for (std::size_t j = 0; j < d(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (exact_[j]) {
            total += penalty_value(theta_[jj], penalty_);
        } else {
            total += penalty_value(theta_s_[jj], penalty_) +
                     0.5 * quad_[j] * (theta_[jj] * theta_[jj] - theta_s_[jj] * theta_s_[jj]);
        }
    }
    return total;
}

Eigen::VectorXd CoordinateDescent::loss_gradient() const {
    Eigen::VectorXd per_row(u_.rows());
    for (std::size_t i = 0; i < rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double eta = eta_[r];
        switch (kind_) {
            case LossKind::LPRE: {
                const double e = clamped_exp(eta);
                per_row[r] = coef_a_[i] * (e / y_[i] - y_[i] / e);
                break;
            }
            case LossKind::LARE: {
                const double e = clamped_exp(eta);
                const double pr = e / y_[i];
                const double vr = y_[i] / e;
                per_row[r] = -2.0 * coef_a_[i] * (1.0 - pr) * pr + 2.0 * coef_b_[i] * (1.0 - vr) * vr;
                break;
            }
            case LossKind::LS:
            case LossKind::LAD:
                per_row[r] = -2.0 * coef_a_[i] * (log_y_[i] - eta);
                break;
        }
    }
    return u_.transpose() * per_row;
}

}  // namespace relerr
