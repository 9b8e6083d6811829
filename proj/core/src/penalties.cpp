#include "relerr/penalties.hpp"

#include <cmath>

#include <fmt/format.h>

#include "relerr/error.hpp"

namespace relerr {

std::string to_string(PenaltyKind kind) {
    return kind == PenaltyKind::MCP ? "mcp" : "lasso";
}

PenaltyKind parse_penalty_kind(std::string_view token) {
    if (token == "mcp" || token == "MCP") return PenaltyKind::MCP;
    if (token == "lasso" || token == "Lasso") return PenaltyKind::Lasso;
    throw ConfigError(fmt::format("unknown penalty '{}' (expected mcp or lasso)", token));
}

void PenaltySpec::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ConfigError(fmt::format("lambda must be finite and nonnegative, got {}", lambda));
    }
    if (kind == PenaltyKind::MCP && !(gamma > 1.0)) {
        throw ConfigError(fmt::format("MCP gamma must exceed 1, got {}", gamma));
    }
}

double penalty_value(double t, const PenaltySpec& spec) {
    const double a = std::abs(t);
    if (spec.kind == PenaltyKind::Lasso) return spec.lambda * a;
    const double knot = spec.gamma * spec.lambda;
    if (a <= knot) return spec.lambda * a - a * a / (2.0 * spec.gamma);
    return 0.5 * spec.gamma * spec.lambda * spec.lambda;
}

double penalty_derivative(double t_abs, const PenaltySpec& spec) {
    if (spec.kind == PenaltyKind::Lasso) return spec.lambda;
    return std::max(spec.lambda - t_abs / spec.gamma, 0.0);
}

double penalty_curvature(double t_abs, const PenaltySpec& spec) {
    if (spec.kind == PenaltyKind::Lasso) return 0.0;
    return t_abs < spec.gamma * spec.lambda ? -1.0 / spec.gamma : 0.0;
}

std::optional<double> local_quadratic_coefficient(double theta_s_j, const PenaltySpec& spec,
                                                  double eps_zero) {
    const double a = std::abs(theta_s_j);
    if (a < eps_zero) return std::nullopt;
    return penalty_derivative(a, spec) / a;
}

}  // namespace relerr
