#include <cmath>

#include "doctest.h"
#include "rapo/policy.hpp"

using namespace rapo;

namespace {
Eigen::VectorXd random_probs(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p(i) = uniform01(rng) + 1e-3;
    return p / p.sum();
}
}  // namespace

TEST_CASE("policy validation") {
    CHECK_THROWS_AS(CategoricalPolicy(Eigen::VectorXd()), InvalidArgument);
    CHECK_THROWS_AS(CategoricalPolicy(Eigen::Vector2d(0.5, 0.6)), InvalidArgument);
    CHECK_THROWS_AS(CategoricalPolicy(Eigen::Vector2d(1.5, -0.5)), InvalidArgument);
    CHECK_THROWS_AS(CategoricalPolicy(Eigen::Vector2d(std::nan(""), 1.0)), InvalidArgument);
    CHECK_NOTHROW(CategoricalPolicy(Eigen::Vector2d(0.5, 0.5 + 5e-10)));
    CHECK_NOTHROW(CategoricalPolicy(Eigen::Vector2d(0.0, 1.0)));
    CHECK(CategoricalPolicy::uniform(4).probs().isApproxToConstant(0.25));
    CHECK_THROWS_AS(PolicyLogits(Eigen::Vector2d(0.0, -INFINITY)), InvalidArgument);
}

TEST_CASE("softmax examples") {
    const auto equal = softmax(PolicyLogits(Eigen::VectorXd::Constant(5, 3.7)));
    for (Index i = 0; i < 5; ++i) CHECK(equal[i] == doctest::Approx(0.2).epsilon(1e-15));

    const auto p = softmax(PolicyLogits(Eigen::Vector2d(0.0, std::log(3.0))));
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("softmax is shift invariant and stable at extreme logits") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd z(12);
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = 20.0 * (uniform01(rng) - 0.5);
        const Eigen::VectorXd p = softmax_probs(z);
        const Eigen::VectorXd q = softmax_probs((z.array() + 64.0).matrix());
        CHECK((p - q).cwiseAbs().maxCoeff() < 1e-14);
        // a shift of 700 rounds the logits themselves to about 1e-13
        const Eigen::VectorXd far = softmax_probs((z.array() + 700.0).matrix());
        CHECK((p - far).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(p.sum() - 1.0) < 1e-12);
        CHECK((exp_entries(log_softmax(z)) - p).cwiseAbs().maxCoeff() < 1e-14);
    }
    const Eigen::Vector3d huge(1000.0, 999.0, -1000.0);
    const Eigen::VectorXd p = softmax_probs(huge);
    CHECK(p.allFinite());
    CHECK(p(0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
    CHECK(p(2) == 0.0);
}

TEST_CASE("minus-infinity logits give exact zeros") {
    const Eigen::Vector3d z(0.0, -INFINITY, 0.0);
    const Eigen::VectorXd p = softmax_probs(z);
    CHECK(p(1) == 0.0);
    CHECK(p(0) == 0.5);
    const Eigen::VectorXd lp = log_softmax(z);
    CHECK(std::isinf(lp(1)));
    CHECK(lp(0) == doctest::Approx(-std::log(2.0)));
}

TEST_CASE("entropy examples") {
    CHECK(entropy(CategoricalPolicy::uniform(4)) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    CHECK(entropy(CategoricalPolicy(Eigen::Vector3d(0, 1, 0))) == 0.0);
    CHECK(entropy(CategoricalPolicy(Eigen::Vector2d(0.75, 0.25))) == doctest::Approx(0.562335).epsilon(1e-6));
}

TEST_CASE("entropy is bounded by log of the outcome count") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::VectorXd p = random_probs(rng, 9);
        const double h = entropy(p);
        CHECK(h >= 0.0);
        CHECK(h <= std::log(9.0) + 1e-12);
    }
}

TEST_CASE("sampling examples") {
    const CategoricalPolicy one_hot(Eigen::Vector4d(0, 0, 1, 0));
    Rng rng(3);
    for (Index y : sample(one_hot, rng, 1000)) CHECK(y == 2);

    Rng a(99), b(99);
    const auto p = CategoricalPolicy(Eigen::Vector3d(0.2, 0.5, 0.3));
    CHECK(sample(p, a, 500) == sample(p, b, 500));
    CHECK_THROWS_AS(sample(p, a, 0), InvalidArgument);
}

TEST_CASE("uniform sampling frequencies") {
    Rng rng(2024);
    const auto draws = sample(CategoricalPolicy::uniform(16), rng, 100000);
    std::vector<double> freq(16, 0.0);
    for (Index y : draws) freq[y] += 1.0 / draws.size();
    for (double f : freq) CHECK(std::abs(f - 1.0 / 16.0) <= 0.01);
}

TEST_CASE("sampler matches a skewed policy (chi-square)") {
    const Eigen::VectorXd probs = (Eigen::VectorXd(6) << 0.4, 0.0, 0.25, 0.2, 0.1, 0.05).finished();
    Rng rng(8);
    const std::size_t n = 200000;
    const auto draws = sample(CategoricalPolicy(probs), rng, n);
    std::vector<double> counts(6, 0.0);
    for (Index y : draws) counts[y] += 1.0;
    CHECK(counts[1] == 0.0);
    double chi2 = 0.0;
    for (Eigen::Index i = 0; i < 6; ++i) {
        if (probs(i) == 0.0) continue;
        const double expected = probs(i) * n;
        chi2 += (counts[static_cast<std::size_t>(i)] - expected) * (counts[static_cast<std::size_t>(i)] - expected) / expected;
    }
    // 4 degrees of freedom; 20.5 is the 0.9996 quantile
    CHECK(chi2 < 20.5);
}

TEST_CASE("sampler never returns a zero-mass trailing outcome") {
    const Eigen::VectorXd probs = (Eigen::VectorXd(4) << 0.3, 0.7, 0.0, 0.0).finished();
    Sampler sampler(probs);
    Rng rng(5);
    for (int i = 0; i < 20000; ++i) CHECK(sampler.draw(rng) < 2);
}

TEST_CASE("support") {
    CHECK(support(CategoricalPolicy::uniform(5)).size() == 5);
    CHECK(support(CategoricalPolicy(Eigen::Vector3d(0, 1, 0))) == std::vector<Index>{1});

    Eigen::VectorXd ref = Eigen::VectorXd::Zero(16);
    for (Index i = 3; i <= 12; ++i) ref(static_cast<Eigen::Index>(i)) = 0.1;
    const auto s = support(CategoricalPolicy(ref));
    CHECK(s.size() == 10);
    CHECK(s.front() == 3);
    CHECK(s.back() == 12);

    CHECK(support(CategoricalPolicy(Eigen::Vector3d(0.5, 1e-12, 0.5 - 1e-12)), 1e-9).size() == 2);
    CHECK_THROWS_AS(support(CategoricalPolicy::uniform(2), -1.0), InvalidArgument);
}

TEST_CASE("logits from policy round trip") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const CategoricalPolicy p(random_probs(rng, 7));
        const Eigen::VectorXd back = softmax_probs(logits_from_policy(p));
        CHECK((back - p.probs()).cwiseAbs().maxCoeff() < 1e-15);
    }
    const CategoricalPolicy holes(Eigen::Vector3d(0.5, 0.0, 0.5));
    CHECK(std::isinf(logits_from_policy(holes)(1)));
    CHECK(softmax_probs(logits_from_policy(holes))(1) == 0.0);
    CHECK(logits_from_policy(holes, 1e-3)(1) == doctest::Approx(std::log(1e-3)));
    CHECK_THROWS_AS(logits_from_policy(holes, 1.0), InvalidArgument);
}
