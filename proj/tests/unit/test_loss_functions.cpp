#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "relerr/error.hpp"
#include "relerr/loss_functions.hpp"

namespace relerr {
namespace {

constexpr double kE = std::numbers::e;

SurvivalDataset single(double y) {
    return SurvivalDataset({y}, {1}, Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1));
}

// theta on a q=1, p=1 design whose single row is (1, 0, 0): eta equals theta[0].
CoefficientVector eta_theta(double eta) {
    CoefficientVector theta(CoordinateMap(1, 1));
    theta[0] = eta;
    return theta;
}

TEST(RelativeTerms, ExactFit) {
    const auto r = relative_terms(1.0, 0.0);
    EXPECT_EQ(r.a, 0.0);
    EXPECT_EQ(r.b, 0.0);
}

TEST(RelativeTerms, HandValues) {
    const auto r = relative_terms(kE, 0.0);
    EXPECT_NEAR(r.a, (kE - 1.0) / kE, 1e-15);
    EXPECT_NEAR(r.b, kE - 1.0, 1e-15);
    EXPECT_NEAR(r.a, 0.63212, 1e-5);
    EXPECT_NEAR(r.b, 1.71828, 1e-5);

    const auto s = relative_terms(1.0, std::log(2.0));
    EXPECT_NEAR(s.a, 1.0, 1e-15);
    EXPECT_NEAR(s.b, 0.5, 1e-15);
}

TEST(RelativeTerms, NonpositiveTimeThrows) {
    EXPECT_THROW(relative_terms(0.0, 0.0), DataError);
    EXPECT_THROW(relative_terms(-1.0, 0.0), DataError);
}

TEST(WeightedObjective, PerfectFitIsZeroForEveryLoss) {
    const auto inst = testing::random_instance({.n = 20, .q = 1, .p = 2, .noise_sd = 0.0}, 3);
    // With zero noise and no censoring beyond the generator's, every event time equals exp(eta).
    const Eigen::VectorXd eta = inst.design.matrix() * inst.truth.values();
    std::vector<double> t(inst.data.n());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::exp(eta[static_cast<Eigen::Index>(i)]);
    const SurvivalDataset exact(t, std::vector<int>(t.size(), 1), inst.data.env(), inst.data.genes());
    const auto w = kaplan_meier_weights(exact.status());
    for (auto kind : {LossKind::LARE, LossKind::LPRE, LossKind::LAD, LossKind::LS}) {
        EXPECT_NEAR(weighted_objective(kind, inst.truth, inst.design, exact, w), 0.0, 1e-12) << to_string(kind);
    }
}

TEST(WeightedObjective, SingleObservationHandValues) {
    const auto data = single(kE);
    const auto design = build_design(data);
    const KMWeights w(std::vector<double>{1.0});
    const auto theta = eta_theta(0.0);
    EXPECT_NEAR(weighted_objective(LossKind::LARE, theta, design, data, w), (kE - 1.0) * (1.0 + 1.0 / kE), 1e-14);
    EXPECT_NEAR(weighted_objective(LossKind::LARE, theta, design, data, w), 2.35040, 1e-5);
    EXPECT_NEAR(weighted_objective(LossKind::LPRE, theta, design, data, w), (kE - 1.0) * (kE - 1.0) / kE, 1e-14);
    EXPECT_NEAR(weighted_objective(LossKind::LPRE, theta, design, data, w), 1.08616, 1e-5);
    EXPECT_NEAR(weighted_objective(LossKind::LS, theta, design, data, w), 1.0, 1e-15);
    EXPECT_NEAR(weighted_objective(LossKind::LAD, theta, design, data, w), 1.0, 1e-15);
}

TEST(WeightedObjective, MatchesReferenceDefinition) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = testing::random_instance({.n = 25, .q = 2, .p = 2, .censor_prob = 0.3}, seed);
        Eigen::VectorXd theta = inst.truth.values() * 0.7;
        const CoefficientVector cv(inst.design.index_map(), theta);
        for (auto kind : {LossKind::LARE, LossKind::LPRE, LossKind::LAD, LossKind::LS}) {
            const double ref = testing::reference_objective(kind, theta, inst);
            EXPECT_NEAR(weighted_objective(kind, cv, inst.design, inst.data, inst.weights), ref,
                        1e-12 * (1.0 + ref));
        }
    }
}

TEST(Lpre, TermEqualsProductOfRelativeTerms) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> logy(-3.0, 3.0), eta(-4.0, 4.0);
    for (int i = 0; i < 1000; ++i) {
        const double y = std::exp(logy(gen));
        const double e = eta(gen);
        const auto r = relative_terms(y, e);
        const double smooth = y * std::exp(-e) + std::exp(e) / y - 2.0;
        EXPECT_NEAR(smooth, r.a * r.b, 1e-12 * (1.0 + smooth));
        EXPECT_GE(observation_loss(LossKind::LPRE, y, e), 0.0);
    }
    EXPECT_EQ(observation_loss(LossKind::LPRE, 2.0, std::log(2.0)), 0.0);
}

TEST(Lpre, DerivativesAtHandPoints) {
    const auto a = lpre_eta_derivatives(1.0, 0.0);
    EXPECT_EQ(a.grad, 0.0);
    EXPECT_EQ(a.hess, 2.0);
    const auto b = lpre_eta_derivatives(kE, 0.0);
    EXPECT_NEAR(b.grad, 1.0 / kE - kE, 1e-14);
    EXPECT_NEAR(b.hess, 1.0 / kE + kE, 1e-14);
    EXPECT_NEAR(b.grad, -2.35040, 1e-5);
    EXPECT_NEAR(b.hess, 3.08616, 1e-5);
}

TEST(Lpre, GradientMatchesFiniteDifference) {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> logy(-2.0, 2.0), eta(-3.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const double y = std::exp(logy(gen));
        const double e = eta(gen);
        const auto f = [y](double x) { return y * std::exp(-x) + std::exp(x) / y - 2.0; };
        const double fd = testing::central_difference(f, e, 1e-5);
        const auto d = lpre_eta_derivatives(y, e);
        EXPECT_NEAR(d.grad, fd, 1e-6 * std::max(1.0, std::abs(fd)));
        EXPECT_GT(d.hess, 0.0);
    }
}

TEST(Losses, ClampReportsInfinity) {
    EXPECT_TRUE(std::isinf(observation_loss(LossKind::LARE, 1.0, 800.0)));
    EXPECT_TRUE(std::isinf(observation_loss(LossKind::LPRE, 1.0, -800.0)));
    EXPECT_TRUE(std::isfinite(observation_loss(LossKind::LS, 1.0, 800.0)));
}

TEST(Losses, ScaleShiftEquivariance) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> logy(-2.0, 2.0), eta(-3.0, 3.0), logc(-2.0, 2.0);
    for (int i = 0; i < 500; ++i) {
        const double y = std::exp(logy(gen));
        const double e = eta(gen);
        const double c = std::exp(logc(gen));
        for (auto kind : {LossKind::LARE, LossKind::LPRE, LossKind::LAD, LossKind::LS}) {
            const double scaled = observation_loss(kind, c * y, e);
            const double shifted = observation_loss(kind, y, e - std::log(c));
            EXPECT_NEAR(scaled, shifted, 1e-11 * (1.0 + std::abs(shifted))) << to_string(kind);
        }
    }
}

TEST(LossKind, ParsesTokens) {
    EXPECT_EQ(parse_loss_kind("lare"), LossKind::LARE);
    EXPECT_EQ(parse_loss_kind("lpre"), LossKind::LPRE);
    EXPECT_EQ(parse_loss_kind("lad"), LossKind::LAD);
    EXPECT_EQ(parse_loss_kind("ls"), LossKind::LS);
    EXPECT_THROW(parse_loss_kind("huber"), ConfigError);
    for (auto kind : {LossKind::LARE, LossKind::LPRE, LossKind::LAD, LossKind::LS}) {
        EXPECT_EQ(parse_loss_kind(to_string(kind)), kind);
    }
}

TEST(LareMajorizer, HandEvaluation) {
    // y = 1, eta_s = ln 2, eta = 0: D1 = |1 - 2| = 1, D2 = |1 - 1/2| = 1/2,
    // value = 1/2 [ 0/1 + 1 + 0/(1/2) + 1/2 ] = 3/4.
    const auto data = single(1.0);
    const auto design = build_design(data);
    const KMWeights w(std::vector<double>{1.0});
    EXPECT_NEAR(lare_majorizer(eta_theta(0.0), eta_theta(std::log(2.0)), design, data, w), 0.75, 1e-15);
    EXPECT_NEAR(lare_majorizer_term(1.0, 0.0, std::log(2.0), kDefaultEpsDenom), 0.75, 1e-15);
}

TEST(LadMajorizer, HandEvaluation) {
    // r_s = 1, r = 0 contributes 0 + 1/2.
    EXPECT_NEAR(lad_majorizer_term(kE, 1.0, 0.0, kDefaultEpsDenom), 0.5, 1e-15);
}

TEST(Majorizers, DominateAndTouch) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = testing::random_instance({.n = 20, .q = 2, .p = 2, .censor_prob = 0.25}, 100 + seed);
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> normal(0.0, 0.6);
        for (int draw = 0; draw < 100; ++draw) {
            CoefficientVector theta(inst.design.index_map()), theta_s(inst.design.index_map());
            for (std::size_t j = 0; j < theta.d(); ++j) {
                theta[j] = normal(gen);
                theta_s[j] = normal(gen);
            }
            const double lare = weighted_objective(LossKind::LARE, theta, inst.design, inst.data, inst.weights);
            const double lad = weighted_objective(LossKind::LAD, theta, inst.design, inst.data, inst.weights);
            EXPECT_GE(lare_majorizer(theta, theta_s, inst.design, inst.data, inst.weights), lare - 1e-12);
            EXPECT_GE(lad_majorizer(theta, theta_s, inst.design, inst.data, inst.weights), lad - 1e-12);
            EXPECT_NEAR(lare_majorizer(theta, theta, inst.design, inst.data, inst.weights), lare, 1e-10);
            EXPECT_NEAR(lad_majorizer(theta, theta, inst.design, inst.data, inst.weights), lad, 1e-10);
        }
    }
}

TEST(Majorizers, DenominatorFloorAvoidsDivisionByZero) {
    // Perfect fit at the expansion point: both denominators vanish before flooring.
    const double v = lare_majorizer_term(2.0, std::log(2.0) + 0.1, std::log(2.0), kDefaultEpsDenom);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, observation_loss(LossKind::LARE, 2.0, std::log(2.0) + 0.1));
    EXPECT_TRUE(std::isfinite(lad_majorizer_term(2.0, 0.3, std::log(2.0), kDefaultEpsDenom)));
}

}  // namespace
}  // namespace relerr
