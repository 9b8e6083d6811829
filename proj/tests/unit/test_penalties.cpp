#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "relerr/error.hpp"
#include "relerr/penalties.hpp"

namespace relerr {
namespace {

const PenaltySpec kMcp{PenaltyKind::MCP, 1.0, 6.0};

TEST(PenaltyValue, ZeroAtOrigin) {
    EXPECT_EQ(penalty_value(0.0, kMcp), 0.0);
    EXPECT_EQ(penalty_value(0.0, {PenaltyKind::Lasso, 3.0}), 0.0);
    EXPECT_EQ(penalty_value(0.0, {PenaltyKind::MCP, 0.4, 2.5}), 0.0);
}

TEST(PenaltyValue, McpHandValues) {
    EXPECT_DOUBLE_EQ(penalty_value(6.0, kMcp), 3.0);
    EXPECT_DOUBLE_EQ(penalty_value(1.0, kMcp), 11.0 / 12.0);
    EXPECT_DOUBLE_EQ(penalty_value(-1.0, kMcp), 11.0 / 12.0);
    EXPECT_DOUBLE_EQ(penalty_value(100.0, kMcp), 3.0);
}

TEST(PenaltyValue, LassoIsLinear) {
    EXPECT_DOUBLE_EQ(penalty_value(-2.5, {PenaltyKind::Lasso, 0.3}), 0.75);
}

TEST(PenaltyValue, ShapeInvariantsOnGrid) {
    for (double lambda : {0.05, 0.7, 2.0}) {
        for (double gamma : {1.5, 3.0, 6.0}) {
            const PenaltySpec mcp{PenaltyKind::MCP, lambda, gamma};
            const PenaltySpec lasso{PenaltyKind::Lasso, lambda};
            double prev = 0.0;
            for (int i = 0; i <= 400; ++i) {
                const double t = 3.0 * gamma * lambda * i / 400.0;
                const double v = penalty_value(t, mcp);
                EXPECT_EQ(v, penalty_value(-t, mcp));
                EXPECT_GE(v, prev - 1e-15);
                EXPECT_LE(v, penalty_value(t, lasso) + 1e-15);
                if (t >= gamma * lambda) { EXPECT_DOUBLE_EQ(v, 0.5 * gamma * lambda * lambda); }
                prev = v;
            }
            // Continuity at the knot.
            const double knot = gamma * lambda;
            EXPECT_NEAR(penalty_value(knot * (1 - 1e-12), mcp), penalty_value(knot * (1 + 1e-12), mcp), 1e-10);
        }
    }
}

TEST(PenaltyDerivative, HandValues) {
    EXPECT_EQ(penalty_derivative(0.0, kMcp), 1.0);
    EXPECT_EQ(penalty_derivative(6.0, kMcp), 0.0);
    EXPECT_EQ(penalty_derivative(9.0, kMcp), 0.0);
    EXPECT_EQ(penalty_derivative(4.0, {PenaltyKind::Lasso, 0.2}), 0.2);
}

TEST(PenaltyDerivative, MatchesFiniteDifference) {
    const PenaltySpec spec{PenaltyKind::MCP, 0.8, 4.0};
    for (int i = 1; i < 200; ++i) {
        const double t = spec.gamma * spec.lambda * i / 200.0;
        const auto f = [&](double x) { return penalty_value(x, spec); };
        EXPECT_NEAR(penalty_derivative(t, spec), testing::central_difference(f, t, 1e-6), 1e-6);
    }
}

TEST(PenaltyCurvature, InsideAndOutsideRamp) {
    EXPECT_DOUBLE_EQ(penalty_curvature(1.0, kMcp), -1.0 / 6.0);
    EXPECT_EQ(penalty_curvature(7.0, kMcp), 0.0);
    EXPECT_EQ(penalty_curvature(1.0, {PenaltyKind::Lasso, 1.0}), 0.0);
}

TEST(LocalQuadratic, HandValues) {
    const auto c1 = local_quadratic_coefficient(1.0, kMcp, 1e-6);
    ASSERT_TRUE(c1.has_value());
    EXPECT_DOUBLE_EQ(*c1, 5.0 / 6.0);
    const auto c10 = local_quadratic_coefficient(10.0, kMcp, 1e-6);
    ASSERT_TRUE(c10.has_value());
    EXPECT_EQ(*c10, 0.0);
    EXPECT_FALSE(local_quadratic_coefficient(1e-12, kMcp, 1e-6).has_value());
    const auto neg = local_quadratic_coefficient(-1.0, kMcp, 1e-6);
    ASSERT_TRUE(neg.has_value());
    EXPECT_DOUBLE_EQ(*neg, 5.0 / 6.0);
}

TEST(LocalQuadratic, SurrogateDominatesNearExpansionPoint) {
    std::mt19937_64 gen(4);
    for (double lambda : {0.3, 1.0}) {
        const PenaltySpec spec{PenaltyKind::MCP, lambda, 6.0};
        std::uniform_real_distribution<double> ts(1e-3, spec.gamma * lambda * 0.999);
        std::uniform_real_distribution<double> step(-1.0, 1.0);
        for (int i = 0; i < 2000; ++i) {
            const double s = ts(gen) * (gen() % 2 ? 1.0 : -1.0);
            const double c = *local_quadratic_coefficient(s, spec, 1e-6);
            const double t = s + std::abs(s) * step(gen);
            const double surrogate = penalty_value(s, spec) + 0.5 * c * (t * t - s * s);
            EXPECT_GE(surrogate, penalty_value(t, spec) - 1e-12);
        }
    }
}

TEST(PenaltySpec, Validation) {
    EXPECT_NO_THROW(kMcp.validate());
    EXPECT_THROW((PenaltySpec{PenaltyKind::MCP, -1.0, 6.0}.validate()), ConfigError);
    EXPECT_THROW((PenaltySpec{PenaltyKind::MCP, 1.0, 1.0}.validate()), ConfigError);
    EXPECT_NO_THROW((PenaltySpec{PenaltyKind::Lasso, 1.0, 1.0}.validate()));
    EXPECT_EQ(parse_penalty_kind("mcp"), PenaltyKind::MCP);
    EXPECT_EQ(parse_penalty_kind("lasso"), PenaltyKind::Lasso);
    EXPECT_THROW(parse_penalty_kind("scad"), ConfigError);
}

}  // namespace
}  // namespace relerr
