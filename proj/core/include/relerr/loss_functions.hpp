#pragma once

#include <span>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "relerr/survival_data.hpp"

namespace relerr {

// LARE and LPRE act on the raw times; LAD and LS act on log times.
enum class LossKind { LARE, LPRE, LAD, LS };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view token);

// Linear predictors are clamped to +-kEtaClamp before exponentiation.
inline constexpr double kEtaClamp = 700.0;
inline constexpr double kDefaultEpsDenom = 1e-8;

struct RelativeTerms {
    double a;  // |y - e^eta| / y
    double b;  // |y - e^eta| / e^eta
};

RelativeTerms relative_terms(double y, double eta);

// Per-observation loss: a+b (LARE), a*b (LPRE), (log y - eta)^2 (LS), |log y - eta| (LAD).
// Returns +infinity when an exponential loss is evaluated at |eta| >= kEtaClamp.
double observation_loss(LossKind kind, double y, double eta);

// sum_i w_i * observation_loss(y_i, eta_i)
double weighted_loss(LossKind kind, std::span<const double> y, std::span<const double> eta,
                     std::span<const double> w);

Eigen::VectorXd linear_predictor(const InteractionDesign& design, const CoefficientVector& theta);

double weighted_objective(LossKind kind, const CoefficientVector& theta,
                          const InteractionDesign& design, const SurvivalDataset& dataset,
                          const KMWeights& weights);

struct EtaDerivatives {
    double grad;
    double hess;
};

// Derivatives of y e^{-eta} + e^{eta} / y - 2, the LPRE term written smoothly.
EtaDerivatives lpre_eta_derivatives(double y, double eta);

// (1/2) sum_i w_i [ (1 - e^eta/y)^2 / D1 + D1 + (1 - y e^-eta)^2 / D2 + D2 ] with
// D1 = |1 - e^{eta_s}/y|, D2 = |1 - y e^{-eta_s}|, each floored at eps_denom.
double lare_majorizer(const CoefficientVector& theta, const CoefficientVector& theta_s,
                      const InteractionDesign& design, const SurvivalDataset& dataset,
                      const KMWeights& weights, double eps_denom = kDefaultEpsDenom);

// sum_i w_i [ r_i^2 / (2 |r_s,i|) + |r_s,i| / 2 ] with r = log y - eta, |r_s| floored at eps_denom.
double lad_majorizer(const CoefficientVector& theta, const CoefficientVector& theta_s,
                     const InteractionDesign& design, const SurvivalDataset& dataset,
                     const KMWeights& weights, double eps_denom = kDefaultEpsDenom);

// Per-observation majorizer terms (without the weight), exposed for the solver and tests.
double lare_majorizer_term(double y, double eta, double eta_s, double eps_denom);
double lad_majorizer_term(double y, double eta, double eta_s, double eps_denom);

}  // namespace relerr
