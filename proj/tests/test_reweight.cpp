#include <cmath>
#include <cstring>

#include "doctest.h"
#include "rapo/reweight.hpp"

using namespace rapo;

namespace {
Eigen::VectorXd random_probs(Rng& rng, Eigen::Index n, double zero_fraction = 0.0) {
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p(i) = (i > 0 && uniform01(rng) < zero_fraction) ? 0.0 : uniform01(rng) + 1e-4;
    return p / p.sum();
}
}  // namespace

TEST_CASE("phi values") {
    const auto inv = ReweightSpec::inverse_proportional(2.2);
    CHECK(phi(inv, 0.0) == doctest::Approx(0.454545).epsilon(1e-6));
    CHECK(phi(inv, 0.0) == 1.0 / 2.2);
    CHECK(phi(inv, 1.0) == doctest::Approx(0.833333).epsilon(1e-6));
    CHECK(phi(inv, 1.0) == doctest::Approx(1.0 / 1.2).epsilon(1e-15));
    CHECK_THROWS_AS(phi(inv, 2.2), InvalidArgument);
    CHECK_THROWS_AS(phi(inv, 3.0), InvalidArgument);

    CHECK(phi(ReweightSpec::tanh(), 0.0) == 0.5);
    CHECK(phi(ReweightSpec::tanh(), 1.0) == doctest::Approx((1.0 + std::tanh(1.0)) / 2.0));
    for (double r : {-3.0, 0.0, 0.5, 17.0}) CHECK(phi(ReweightSpec::identity(), r) == 1.0);
}

TEST_CASE("phi is monotone in the reward") {
    for (const auto& spec : {ReweightSpec::identity(), ReweightSpec::tanh(), ReweightSpec::inverse_proportional(2.2)}) {
        double previous = -INFINITY;
        for (double r = -1.0; r < 2.0; r += 0.01) {
            const double w = phi(spec, r);
            CHECK(w >= previous);
            previous = w;
        }
    }
}

TEST_CASE("kind names round trip") {
    for (auto kind : {ReweightSpec::Kind::identity, ReweightSpec::Kind::inverse_proportional, ReweightSpec::Kind::tanh}) {
        CHECK(parse_reweight_kind(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(parse_reweight_kind("sigmoid"), InvalidArgument);
}

TEST_CASE("identity reweighting reproduces the reference bit for bit") {
    Rng rng(30);
    for (int trial = 0; trial < 50; ++trial) {
        const CategoricalPolicy ref(random_probs(rng, 13, 0.2));
        Eigen::VectorXd r(13);
        for (Eigen::Index i = 0; i < 13; ++i) r(i) = 5.0 * uniform01(rng);
        const auto out = reweight_reference(ref, r, ReweightSpec::identity());
        CHECK(std::memcmp(out.probs().data(), ref.probs().data(), sizeof(double) * 13) == 0);
    }
}

TEST_CASE("constant exponent example") {
    const CategoricalPolicy ref(Eigen::Vector2d(0.64, 0.36));
    const auto flat = flatten_reference(ref, 0.5);
    CHECK(flat[0] == doctest::Approx(4.0 / 7.0).epsilon(1e-14));
    CHECK(flat[1] == doctest::Approx(3.0 / 7.0).epsilon(1e-14));

    // constant rewards give a constant exponent
    const auto spec = ReweightSpec::inverse_proportional(2.5);
    const auto same = reweight_reference(ref, Eigen::Vector2d(0.5, 0.5), spec);
    CHECK(same[0] == doctest::Approx(4.0 / 7.0).epsilon(1e-14));
}

TEST_CASE("lower reward gets the stronger flattening") {
    const CategoricalPolicy ref(Eigen::Vector2d(0.8, 0.2));
    const auto out = reweight_reference(ref, Eigen::Vector2d(1.0, 0.0), ReweightSpec::tanh());
    CHECK(out[1] / ref[1] > out[0] / ref[0]);
    const double w0 = (1.0 + std::tanh(1.0)) / 2.0;
    const double a = std::pow(0.8, w0), b = std::pow(0.2, 0.5);
    CHECK(out[0] == doctest::Approx(a / (a + b)).epsilon(1e-14));
}

TEST_CASE("equal reference mass: higher reward keeps no larger share") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd p = random_probs(rng, 6);
        p(1) = p(0);
        p /= p.sum();
        Eigen::VectorXd r(6);
        for (Eigen::Index i = 0; i < 6; ++i) r(i) = uniform01(rng);
        if (r(0) == r(1)) continue;
        const Eigen::Index hi = r(0) > r(1) ? 0 : 1, lo = 1 - hi;
        for (const auto& spec : {ReweightSpec::tanh(), ReweightSpec::inverse_proportional(2.2)}) {
            const auto out = reweight_reference(CategoricalPolicy(p), r, spec);
            CHECK(out.probs()(hi) <= out.probs()(lo));
        }
    }
}

TEST_CASE("support is preserved for exponents in (0, 1]") {
    Rng rng(32);
    for (int trial = 0; trial < 50; ++trial) {
        const CategoricalPolicy ref(random_probs(rng, 10, 0.4));
        Eigen::VectorXd r(10);
        for (Eigen::Index i = 0; i < 10; ++i) r(i) = uniform01(rng);
        const auto out = reweight_reference(ref, r, ReweightSpec::inverse_proportional(2.2));
        for (Index i = 0; i < 10; ++i) CHECK((out[i] > 0.0) == (ref[i] > 0.0));
    }
}

TEST_CASE("flattening weakly increases entropy") {
    Rng rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        const CategoricalPolicy ref(random_probs(rng, 2 + trial % 30, 0.2));
        const double w = 0.05 + 0.9 * uniform01(rng);
        CHECK(entropy(flatten_reference(ref, w)) >= entropy(ref) - 1e-12);
    }
}

TEST_CASE("reweighting error paths") {
    const CategoricalPolicy holes(Eigen::Vector3d(0.5, 0.0, 0.5));
    CHECK_THROWS_AS(flatten_reference(holes, 0.0), InvalidArgument);
    CHECK_NOTHROW(flatten_reference(CategoricalPolicy::uniform(3), 0.0));
    CHECK_THROWS_AS(flatten_reference(holes, 1.5), InvalidArgument);
    CHECK_THROWS_AS(reweight_reference(holes, Eigen::Vector2d::Zero(), ReweightSpec::tanh()), InvalidArgument);
    // inverse-proportional exponent above 1 once tau_max - r < 1
    CHECK_THROWS_AS(reweight_reference(holes, Eigen::Vector3d(1.5, 0, 0), ReweightSpec::inverse_proportional(2.2)),
                    InvalidArgument);
    // tanh of a very negative reward drives the exponent to 0 at a hole
    CHECK_THROWS_AS(reweight_reference(holes, Eigen::Vector3d(0, -40, 0), ReweightSpec::tanh()), InvalidArgument);
}
