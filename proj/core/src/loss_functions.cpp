#include "relerr/loss_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "relerr/error.hpp"

namespace relerr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double clamped_exp(double eta) {
    return std::exp(std::clamp(eta, -kEtaClamp, kEtaClamp));
}

inline bool at_clamp(double eta) { return !(std::abs(eta) < kEtaClamp); }

void check_dims(const CoefficientVector& theta, const InteractionDesign& design,
                const SurvivalDataset& dataset, const KMWeights& weights) {
    if (theta.d() != design.d()) {
        throw DimensionError(fmt::format("theta has length {}, design has {} columns", theta.d(),
                                         design.d()));
    }
    if (design.n() != dataset.n() || weights.size() != dataset.n()) {
        throw DimensionError(fmt::format("design rows {}, dataset rows {}, weights {}", design.n(),
                                         dataset.n(), weights.size()));
    }
}

}  // namespace

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::LARE: return "lare";
        case LossKind::LPRE: return "lpre";
        case LossKind::LAD: return "lad";
        case LossKind::LS: return "ls";
    }
    return "unknown";
}

LossKind parse_loss_kind(std::string_view token) {
    if (token == "lare" || token == "LARE") return LossKind::LARE;
    if (token == "lpre" || token == "LPRE") return LossKind::LPRE;
    if (token == "lad" || token == "LAD") return LossKind::LAD;
    if (token == "ls" || token == "LS") return LossKind::LS;
    throw ConfigError(fmt::format("unknown method '{}' (expected one of lare, lpre, lad, ls)", token));
}

RelativeTerms relative_terms(double y, double eta) {
    if (!(y > 0.0)) throw DataError(fmt::format("relative_terms: y must be positive, got {}", y));
    const double e = clamped_exp(eta);
    const double diff = std::abs(y - e);
    return {diff / y, diff / e};
}

double observation_loss(LossKind kind, double y, double eta) {
    switch (kind) {
        case LossKind::LARE: {
            if (at_clamp(eta)) return kInf;
            const auto [a, b] = relative_terms(y, eta);
            return a + b;
        }
        case LossKind::LPRE: {
            if (at_clamp(eta)) return kInf;
            const auto [a, b] = relative_terms(y, eta);
            return a * b;
        }
        case LossKind::LS: {
            const double r = std::log(y) - eta;
            return r * r;
        }
        case LossKind::LAD: return std::abs(std::log(y) - eta);
    }
    return kInf;
}

double weighted_loss(LossKind kind, std::span<const double> y, std::span<const double> eta,
                     std::span<const double> w) {
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (w[i] == 0.0) continue;
        total += w[i] * observation_loss(kind, y[i], eta[i]);
    }
    return total;
}

Eigen::VectorXd linear_predictor(const InteractionDesign& design, const CoefficientVector& theta) {
    if (theta.d() != design.d()) {
        throw DimensionError(fmt::format("theta has length {}, design has {} columns", theta.d(),
                                         design.d()));
    }
    return design.matrix() * theta.values();
}

double weighted_objective(LossKind kind, const CoefficientVector& theta,
                          const InteractionDesign& design, const SurvivalDataset& dataset,
                          const KMWeights& weights) {
    check_dims(theta, design, dataset, weights);
    const Eigen::VectorXd eta = linear_predictor(design, theta);
    return weighted_loss(kind, dataset.times(), {eta.data(), static_cast<std::size_t>(eta.size())},
                         weights.values());
}

EtaDerivatives lpre_eta_derivatives(double y, double eta) {
    if (!(y > 0.0)) throw DataError(fmt::format("lpre_eta_derivatives: y must be positive, got {}", y));
    const double e = clamped_exp(eta);
    const double down = y / e;  // y e^{-eta}
    const double up = e / y;    // e^{eta} / y
    return {up - down, up + down};
}

double lare_majorizer_term(double y, double eta, double eta_s, double eps_denom) {
    if (at_clamp(eta)) return kInf;
    const double es = clamped_exp(eta_s);
    const double d1 = std::max(std::abs(1.0 - es / y), eps_denom);
    const double d2 = std::max(std::abs(1.0 - y / es), eps_denom);
    const double e = clamped_exp(eta);
    const double r1 = 1.0 - e / y;
    const double r2 = 1.0 - y / e;
    return 0.5 * (r1 * r1 / d1 + d1 + r2 * r2 / d2 + d2);
}

double lad_majorizer_term(double y, double eta, double eta_s, double eps_denom) {
    const double ly = std::log(y);
    const double rs = std::max(std::abs(ly - eta_s), eps_denom);
    const double r = ly - eta;
    return r * r / (2.0 * rs) + 0.5 * rs;
}

namespace {

template <class Term>
double weighted_majorizer(const CoefficientVector& theta, const CoefficientVector& theta_s,
                          const InteractionDesign& design, const SurvivalDataset& dataset,
                          const KMWeights& weights, Term term) {
    check_dims(theta, design, dataset, weights);
    check_dims(theta_s, design, dataset, weights);
    const Eigen::VectorXd eta = linear_predictor(design, theta);
    const Eigen::VectorXd eta_s = linear_predictor(design, theta_s);
    double total = 0.0;
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        const double w = weights[i];
        if (w == 0.0) continue;
        const auto r = static_cast<Eigen::Index>(i);
        total += w * term(dataset.times()[i], eta[r], eta_s[r]);
    }
    return total;
}

}  // namespace

double lare_majorizer(const CoefficientVector& theta, const CoefficientVector& theta_s,
                      const InteractionDesign& design, const SurvivalDataset& dataset,
                      const KMWeights& weights, double eps_denom) {
    return weighted_majorizer(theta, theta_s, design, dataset, weights,
                              [eps_denom](double y, double eta, double eta_s) {
                                  return lare_majorizer_term(y, eta, eta_s, eps_denom);
                              });
}

double lad_majorizer(const CoefficientVector& theta, const CoefficientVector& theta_s,
                     const InteractionDesign& design, const SurvivalDataset& dataset,
                     const KMWeights& weights, double eps_denom) {
    return weighted_majorizer(theta, theta_s, design, dataset, weights,
                              [eps_denom](double y, double eta, double eta_s) {
                                  return lad_majorizer_term(y, eta, eta_s, eps_denom);
                              });
}

}  // namespace relerr
