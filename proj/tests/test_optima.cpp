#include <cmath>

#include "doctest.h"
#include "rapo/divergence.hpp"
#include "rapo/optima.hpp"

using namespace rapo;

namespace {

// Independent oracle for two outcomes: the maximizer of
// p r0 + (1-p) r1 - alpha KL((p, 1-p) || q) + beta H(p) is the root of its
// derivative in p, found by bisection on (0, 1).
double two_point_optimum(double q0, double r0, double r1, double alpha, double beta) {
    auto d = [&](double p) {
        const double q1 = 1.0 - q0;
        return r0 - r1 - alpha * (std::log(p / q0) - std::log((1 - p) / q1)) - beta * (std::log(p) - std::log(1 - p));
    };
    double lo = 1e-300, hi = 1.0 - 1e-16;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (d(mid) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform01(rng);
    return v;
}

CategoricalPolicy random_ref(Rng& rng, Eigen::Index n, double zero_fraction) {
    Eigen::VectorXd p = random_vector(rng, n).array() + 0.05;
    for (Eigen::Index i = 1; i < n; ++i) {
        if (uniform01(rng) < zero_fraction) p(i) = 0.0;
    }
    return CategoricalPolicy(p / p.sum());
}

}  // namespace

TEST_CASE("regularization parameters") {
    CHECK_NOTHROW(RegularizationParams{}.validate());
    CHECK_NOTHROW((RegularizationParams{0.1, 0.0}.validate()));
    CHECK_THROWS_AS((RegularizationParams{0.0, 0.1}.validate()), InvalidArgument);
    CHECK_THROWS_AS((RegularizationParams{0.1, -0.1}.validate()), InvalidArgument);
}

TEST_CASE("lemma1_optimum examples") {
    const CategoricalPolicy half(Eigen::Vector2d(0.5, 0.5));
    const Eigen::Vector2d r(1.0, 0.0);
    const auto p = lemma1_optimum(half, r, 1.0);
    const double e = std::exp(1.0);
    CHECK(p[0] == doctest::Approx(e / (1 + e)).epsilon(1e-14));
    CHECK(p[0] == doctest::Approx(0.731059).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.268941).epsilon(1e-6));
    CHECK(p[0] == doctest::Approx(two_point_optimum(0.5, 1.0, 0.0, 1.0, 0.0)).epsilon(1e-12));

    const CategoricalPolicy ref(Eigen::Vector3d(0.2, 0.3, 0.5));
    const auto same = lemma1_optimum(ref, Eigen::Vector3d::Constant(4.0), 0.3);
    CHECK((same.probs() - ref.probs()).cwiseAbs().maxCoeff() < 1e-15);

    const auto trapped = lemma1_optimum(CategoricalPolicy(Eigen::Vector2d(0, 1)), Eigen::Vector2d(100, -5), 0.01);
    CHECK(trapped[0] == 0.0);
    CHECK(trapped[1] == 1.0);
}

TEST_CASE("lemma2_optimum examples") {
    Rng rng(20);
    for (int trial = 0; trial < 20; ++trial) {
        const CategoricalPolicy ref = random_ref(rng, 9, 0.3);
        const Eigen::VectorXd r = random_vector(rng, 9);
        const double alpha = 0.05 + uniform01(rng);
        CHECK((lemma2_optimum(ref, r, alpha, 0.0).probs() - lemma1_optimum(ref, r, alpha).probs()).cwiseAbs().maxCoeff() == 0.0);
    }

    const auto p = lemma2_optimum(CategoricalPolicy(Eigen::Vector2d(0.64, 0.36)), Eigen::Vector2d::Zero(), 0.3, 0.3);
    CHECK(p[0] == doctest::Approx(4.0 / 7.0).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(3.0 / 7.0).epsilon(1e-14));

    for (double beta : {0.0, 0.1, 5.0}) {
        const auto q = lemma2_optimum(CategoricalPolicy(Eigen::Vector2d(0, 1)), Eigen::Vector2d(3, 0), 0.2, beta);
        CHECK(q[0] == 0.0);
        CHECK(q[1] == 1.0);
    }
}

TEST_CASE("lemma2_optimum matches the two-point oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const double q0 = 0.05 + 0.9 * uniform01(rng);
        const double r0 = uniform01(rng), r1 = uniform01(rng);
        const double alpha = 0.05 + uniform01(rng), beta = uniform01(rng);
        const auto p = lemma2_optimum(CategoricalPolicy(Eigen::Vector2d(q0, 1 - q0)), Eigen::Vector2d(r0, r1), alpha, beta);
        CHECK(p[0] == doctest::Approx(two_point_optimum(q0, r0, r1, alpha, beta)).epsilon(1e-10));
    }
}

TEST_CASE("lemma optima are stable for large reward scales") {
    const CategoricalPolicy ref(Eigen::Vector3d(0.3, 0.3, 0.4));
    const auto p = lemma1_optimum(ref, Eigen::Vector3d(1000, 999, 0), 1e-3);
    CHECK(p.probs().allFinite());
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[2] == 0.0);
}

TEST_CASE("lemma optima error paths") {
    const CategoricalPolicy ref = CategoricalPolicy::uniform(3);
    CHECK_THROWS_AS(lemma1_optimum(ref, Eigen::Vector2d::Zero(), 1.0), InvalidArgument);
    CHECK_THROWS_AS(lemma1_optimum(ref, Eigen::Vector3d(0, NAN, 0), 1.0), InvalidArgument);
    CHECK_THROWS_AS(lemma1_optimum(ref, Eigen::Vector3d::Zero(), 0.0), InvalidArgument);
    CHECK_THROWS_AS(lemma2_optimum(ref, Eigen::Vector3d::Zero(), 1.0, -1.0), InvalidArgument);
}

TEST_CASE("token mass closed form off support") {
    CHECK(solve_token_mass(0.0, 1.0, 0.5, 1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(solve_token_mass(0.0, 0.0, 0.5, 1.0, 0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(solve_token_mass(0.0, 0.0, 0.5, 1.0, 0.0) == doctest::Approx(0.367879).epsilon(1e-6));
    CHECK(solve_token_mass(0.0, 0.7 + 0.2, 0.1, 0.2, 0.7) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("token mass root satisfies the stationarity condition") {
    Rng rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        const double ref = uniform01(rng);
        const double r = uniform01(rng);
        const double alpha = 0.01 + uniform01(rng);
        const double beta = 0.01 + uniform01(rng);
        const double lambda = 4.0 * (uniform01(rng) - 0.5);
        const double u = solve_token_mass(ref, r, alpha, beta, lambda);
        REQUIRE(u > 0.0);
        const double target = beta + lambda - r;
        const double f = token_mass_residual_fn(ref, alpha, beta, u);
        // relative to the local slope |F'(u)| * u, the scale of one ulp in u
        const double slope = alpha * ref / u + beta;
        CHECK(std::abs(f - target) <= 1e-9 * (1.0 + slope));
    }
}

TEST_CASE("token mass is decreasing in lambda") {
    double previous = INFINITY;
    for (double lambda = -2.0; lambda <= 2.0; lambda += 0.25) {
        const double u = solve_token_mass(0.3, 0.5, 0.1, 0.1, lambda);
        CHECK(u < previous);
        previous = u;
    }
    CHECK_THROWS_AS(solve_token_mass(0.3, 0.5, 0.1, 0.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(solve_token_mass(-0.1, 0.5, 0.1, 0.1, 0.0), InvalidArgument);
}

TEST_CASE("prop1_optimum on uniform reference with constant rewards is uniform") {
    const auto sol = prop1_optimum(CategoricalPolicy::uniform(8), Eigen::VectorXd::Constant(8, 0.4), 0.1, 0.1);
    CHECK((sol.policy.probs().array() - 0.125).abs().maxCoeff() < 1e-9);
    CHECK(total_token_mass(CategoricalPolicy::uniform(8), Eigen::VectorXd::Constant(8, 0.4), 0.1, 0.1, sol.lambda) ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sol.residual <= 1e-8);
}

TEST_CASE("prop1_optimum matches the two-point oracle") {
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const double q0 = 0.05 + 0.9 * uniform01(rng);
        const double r0 = uniform01(rng), r1 = uniform01(rng);
        const double alpha = 0.05 + uniform01(rng), beta = 0.05 + uniform01(rng);
        const auto sol = prop1_optimum(CategoricalPolicy(Eigen::Vector2d(q0, 1 - q0)), Eigen::Vector2d(r0, r1), alpha, beta);
        // forward objective: d/dp = r0 - r1 + alpha (q0/p - q1/(1-p)) - beta ln(p/(1-p))
        auto d = [&](double p) {
            return r0 - r1 + alpha * (q0 / p - (1 - q0) / (1 - p)) - beta * (std::log(p) - std::log(1 - p));
        };
        double lo = 1e-300, hi = 1.0 - 1e-16;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (d(mid) > 0 ? lo : hi) = mid;
        }
        CHECK(sol.policy[0] == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-8));
    }
}

TEST_CASE("prop1_optimum support dichotomy and off-support ratio law") {
    Rng rng(24);
    for (int trial = 0; trial < 30; ++trial) {
        Eigen::VectorXd m = random_vector(rng, 16).array() + 0.1;
        for (Index z : {0, 1, 2, 13, 14, 15}) m(static_cast<Eigen::Index>(z)) = 0.0;
        const CategoricalPolicy ref(m / m.sum());
        const Eigen::VectorXd r = random_vector(rng, 16);
        const double beta = 0.1;
        const auto sol = prop1_optimum(ref, r, 0.1, beta);
        CHECK(sol.residual <= 1e-8);
        CHECK(sol.policy.probs().minCoeff() > 0.0);
        for (Eigen::Index i : {0, 1, 2, 13, 14, 15}) {
            for (Eigen::Index j : {0, 1, 2, 13, 14, 15}) {
                const double ratio = sol.policy.probs()(i) / sol.policy.probs()(j);
                const double expected = std::exp((r(i) - r(j)) / beta);
                CHECK(std::abs(ratio / expected - 1.0) <= 1e-8);
            }
        }
        const auto l1 = lemma1_optimum(ref, r, 0.1);
        const auto l2 = lemma2_optimum(ref, r, 0.1, beta);
        for (Eigen::Index z : {0, 1, 2, 13, 14, 15}) {
            CHECK(l1.probs()(z) == 0.0);
            CHECK(l2.probs()(z) == 0.0);
        }
    }
}

TEST_CASE("prop1_optimum stationarity holds at the returned multiplier") {
    Rng rng(25);
    for (int trial = 0; trial < 20; ++trial) {
        const CategoricalPolicy ref = random_ref(rng, 12, 0.3);
        const Eigen::VectorXd r = random_vector(rng, 12) * 3.0;
        const double alpha = 0.01 + uniform01(rng), beta = 0.01 + uniform01(rng);
        const auto sol = prop1_optimum(ref, r, alpha, beta);
        CHECK(std::abs(sol.policy.probs().sum() - 1.0) <= 1e-8);
        for (Index i = 0; i < ref.size(); ++i) {
            const double u = sol.policy[i];
            const double lhs = token_mass_residual_fn(ref[i], alpha, beta, u);
            const double rhs = beta + sol.lambda - r(static_cast<Eigen::Index>(i));
            CHECK(std::abs(lhs - rhs) <= 1e-6 * (1.0 + alpha * ref[i] / u + beta));
        }
    }
}

TEST_CASE("prop1_optimum requires positive beta") {
    CHECK_THROWS_AS(prop1_optimum(CategoricalPolicy::uniform(3), Eigen::Vector3d::Zero(), 0.1, 0.0), InvalidArgument);
}
