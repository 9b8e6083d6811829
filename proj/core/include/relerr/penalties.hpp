#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace relerr {

enum class PenaltyKind { MCP, Lasso };

std::string to_string(PenaltyKind kind);
PenaltyKind parse_penalty_kind(std::string_view token);

inline constexpr double kDefaultGamma = 6.0;

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::MCP;
    double lambda = 0.0;
    double gamma = kDefaultGamma;  // MCP concavity, must exceed 1

    void validate() const;
};

// MCP: lambda |t| - t^2 / (2 gamma) on |t| <= gamma lambda, gamma lambda^2 / 2 beyond.
// Lasso: lambda |t|.
double penalty_value(double t, const PenaltySpec& spec);

// d/d|t| of penalty_value: max(lambda - |t| / gamma, 0) for MCP, lambda for Lasso.
double penalty_derivative(double t_abs, const PenaltySpec& spec);

// Second derivative in |t| away from zero (-1/gamma inside the MCP ramp, 0 otherwise).
double penalty_curvature(double t_abs, const PenaltySpec& spec);

/// Coefficient c of the local quadratic surrogate
///   phi(theta_s) + c / 2 * (theta^2 - theta_s^2),  c = phi'(|theta_s|) / |theta_s|,
/// which majorizes the penalty and touches it at theta_s. Returns nullopt when
/// |theta_s| < eps_zero: the coordinate is frozen at zero for this MM step.
std::optional<double> local_quadratic_coefficient(double theta_s_j, const PenaltySpec& spec,
                                                  double eps_zero);

}  // namespace relerr
