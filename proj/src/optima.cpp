#include "rapo/optima.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rapo/errors.hpp"

namespace rapo {

namespace {

constexpr int kMaxInnerIterations = 200;
constexpr int kMaxBracketSteps = 1100;
constexpr int kMaxOuterIterations = 400;
constexpr double kInnerTolerance = 1e-12;
constexpr double kOuterTolerance = 1e-10;
constexpr double kSolutionTolerance = 1e-8;

void check_rewards(const CategoricalPolicy& ref, const Eigen::VectorXd& rewards) {
    detail::require(static_cast<Index>(rewards.size()) == ref.size(), "reward vector does not match policy size");
    detail::require(rewards.allFinite(), "rewards must be finite");
    detail::require(ref.probs().maxCoeff() > 0.0, "reference policy has no mass");
}

// Normalizes exp(log_weights) over outcomes where ref > 0, leaving exact zeros elsewhere.
CategoricalPolicy normalize_log_weights(const CategoricalPolicy& ref, const Eigen::VectorXd& log_weights) {
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < log_weights.size(); ++i) {
        if (ref.probs()(i) > 0.0) shift = std::max(shift, log_weights(i));
    }
    Eigen::VectorXd probs = Eigen::VectorXd::Zero(log_weights.size());
    for (Eigen::Index i = 0; i < log_weights.size(); ++i) {
        if (ref.probs()(i) > 0.0) probs(i) = std::exp(log_weights(i) - shift);
    }
    probs /= probs.sum();
    return CategoricalPolicy(std::move(probs));
}

}  // namespace

void RegularizationParams::validate() const {
    detail::require(alpha > 0.0 && std::isfinite(alpha), "alpha must be positive");
    detail::require(beta >= 0.0 && std::isfinite(beta), "beta must be non-negative");
}

CategoricalPolicy lemma1_optimum(const CategoricalPolicy& ref, const Eigen::VectorXd& rewards, double alpha) {
    return lemma2_optimum(ref, rewards, alpha, 0.0);
}

CategoricalPolicy lemma2_optimum(const CategoricalPolicy& ref, const Eigen::VectorXd& rewards, double alpha,
                                 double beta) {
    RegularizationParams{alpha, beta}.validate();
    check_rewards(ref, rewards);
    const double temperature = alpha + beta;
    const double exponent = alpha / temperature;
    Eigen::VectorXd log_weights(rewards.size());
    for (Eigen::Index i = 0; i < rewards.size(); ++i) {
        const double q = ref.probs()(i);
        log_weights(i) = q > 0.0 ? rewards(i) / temperature + exponent * std::log(q) : 0.0;
    }
    return normalize_log_weights(ref, log_weights);
}

double token_mass_residual_fn(double ref_mass, double alpha, double beta, double u) {
    return alpha * ref_mass / u - beta * std::log(u);
}

double solve_token_mass(double ref_mass, double reward, double alpha, double beta, double lambda) {
    detail::require(alpha > 0.0, "alpha must be positive");
    detail::require(beta > 0.0, "token mass solver requires beta > 0");
    detail::require(ref_mass >= 0.0, "reference mass must be non-negative");
    if (ref_mass == 0.0) return std::exp((reward - lambda) / beta - 1.0);

    const double target = beta + lambda - reward;
    // Work in s = ln u: G(s) = alpha ref e^{-s} - beta s is strictly decreasing.
    const double scale = alpha * ref_mass;
    auto g = [&](double s) { return scale * std::exp(-s) - beta * s; };

    // Geometric bracket expansion from u = 1 (s = 0).
    double lo = 0.0;
    double hi = 0.0;
    if (g(0.0) > target) {
        double step = 1.0;
        hi = step;
        while (g(hi) > target) {
            lo = hi;
            step *= 2.0;
            hi = step;
            if (!std::isfinite(hi)) throw ConvergenceError("token mass: failed to bracket root from above");
        }
    } else {
        double step = 1.0;
        lo = -step;
        while (g(lo) < target) {
            hi = lo;
            step *= 2.0;
            lo = -step;
            if (!std::isfinite(lo)) throw ConvergenceError("token mass: failed to bracket root from below");
        }
    }

    for (int iter = 0; iter < kMaxInnerIterations; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double value = g(mid);
        if (std::abs(value - target) <= kInnerTolerance) return std::exp(mid);
        if (mid <= lo || mid >= hi) {
            // bracket at machine resolution: return the better endpoint
            return std::abs(g(lo) - target) < std::abs(g(hi) - target) ? std::exp(lo) : std::exp(hi);
        }
        (value > target ? lo : hi) = mid;
    }
    throw ConvergenceError("token mass: no convergence after " + std::to_string(kMaxInnerIterations) +
                           " iterations, bracket [" + std::to_string(std::exp(lo)) + ", " +
                           std::to_string(std::exp(hi)) + "]");
}

double total_token_mass(const CategoricalPolicy& ref, const Eigen::VectorXd& rewards, double alpha, double beta,
                        double lambda) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < rewards.size(); ++i) {
        total += solve_token_mass(ref.probs()(i), rewards(i), alpha, beta, lambda);
    }
    return total;
}

LagrangeSolution prop1_optimum(const CategoricalPolicy& ref, const Eigen::VectorXd& rewards, double alpha,
                               double beta) {
    RegularizationParams{alpha, beta}.validate();
    detail::require(beta > 0.0, "forward-KL optimum requires beta > 0");
    check_rewards(ref, rewards);

    auto mass = [&](double lambda) { return total_token_mass(ref, rewards, alpha, beta, lambda); };

    // Bracket by doubling from lambda = 0 until S(lo) > 1 > S(hi).
    double lo = 0.0;
    double hi = 0.0;
    const double at_zero = mass(0.0);
    if (at_zero > 1.0) {
        double step = 1.0;
        hi = step;
        int steps = 0;
        while (mass(hi) > 1.0) {
            lo = hi;
            step *= 2.0;
            hi = step;
            if (++steps > kMaxBracketSteps || !std::isfinite(hi))
                throw ConvergenceError("lambda bracket expansion failed (upper)");
        }
    } else if (at_zero < 1.0) {
        double step = 1.0;
        lo = -step;
        int steps = 0;
        while (mass(lo) < 1.0) {
            hi = lo;
            step *= 2.0;
            lo = -step;
            if (++steps > kMaxBracketSteps || !std::isfinite(lo))
                throw ConvergenceError("lambda bracket expansion failed (lower)");
        }
    }

    double lambda = lo;
    double best_gap = std::abs(mass(lo) - 1.0);
    if (lo != hi) {
        for (int iter = 0; iter < kMaxOuterIterations; ++iter) {
            const double mid = 0.5 * (lo + hi);
            const double gap = mass(mid) - 1.0;
            if (std::abs(gap) < best_gap) {
                best_gap = std::abs(gap);
                lambda = mid;
            }
            if (std::abs(gap) <= kOuterTolerance || mid <= lo || mid >= hi) break;
            (gap > 0.0 ? lo : hi) = mid;
        }
    }

    Eigen::VectorXd probs(rewards.size());
    for (Eigen::Index i = 0; i < rewards.size(); ++i) {
        probs(i) = solve_token_mass(ref.probs()(i), rewards(i), alpha, beta, lambda);
    }
    const double residual = std::abs(probs.sum() - 1.0);
    if (residual > kSolutionTolerance) {
        throw ConvergenceError("lambda search ended with mass residual " + std::to_string(residual));
    }
    return LagrangeSolution{CategoricalPolicy(std::move(probs)), lambda, residual};
}

}  // namespace rapo
