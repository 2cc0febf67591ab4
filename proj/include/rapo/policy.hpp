#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "rapo/errors.hpp"
#include "rapo/rng.hpp"
#include "rapo/seqspace.hpp"

namespace rapo {

inline constexpr double kSimplexTolerance = 1e-9;

/// Explicit probability vector over the outcomes of a space. Exact zeros are
/// allowed (reference policies with holes in their support).
class CategoricalPolicy {
public:
    explicit CategoricalPolicy(Eigen::VectorXd probs);

    static CategoricalPolicy uniform(Index outcome_count);

    const Eigen::VectorXd& probs() const { return probs_; }
    double operator[](Index i) const { return probs_(static_cast<Eigen::Index>(i)); }
    Index size() const { return static_cast<Index>(probs_.size()); }

private:
    Eigen::VectorXd probs_;
};

/// Unconstrained logits; the policy is softmax(logits).
class PolicyLogits {
public:
    explicit PolicyLogits(Eigen::VectorXd logits);

    const Eigen::VectorXd& values() const { return logits_; }
    Index size() const { return static_cast<Index>(logits_.size()); }

private:
    Eigen::VectorXd logits_;
};

/// Elementwise exp that maps -inf to exactly 0 (Eigen's vectorized exp
/// returns a denormal there).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> exp_entries(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    return x.unaryExpr([](Scalar v) { return Scalar(std::exp(v)); });
}

/// log softmax with a max shift. Entries equal to -inf are allowed (they map
/// to probability zero) as long as at least one entry is finite.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> log_softmax(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    const Scalar shift = logits.maxCoeff();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> shifted = logits.array() - shift;
    const Scalar log_norm = std::log(exp_entries(shifted).sum());
    return (shifted.array() - log_norm).matrix();
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax_probs(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    const Scalar shift = logits.maxCoeff();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights = exp_entries((logits.array() - shift).matrix());
    return weights / weights.sum();
}

inline CategoricalPolicy softmax(const PolicyLogits& logits) { return CategoricalPolicy(softmax_probs(logits.values())); }

/// Shannon entropy in nats with 0 ln 0 = 0.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& probs) {
    using Scalar = typename Derived::Scalar;
    Scalar h = 0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        const Scalar p = probs(i);
        if (p > 0) h -= p * std::log(p);
    }
    return h < 0 ? Scalar(0) : h;
}

inline double entropy(const CategoricalPolicy& policy) { return entropy(policy.probs()); }

/// Inverse-CDF sampler over a fixed policy. Build once, draw many times.
class Sampler {
public:
    explicit Sampler(const CategoricalPolicy& policy);
    explicit Sampler(const Eigen::VectorXd& probs);

    Index draw(Rng& rng) const;

private:
    std::vector<double> cdf_;
    Index last_positive_ = 0;
};

/// `count` i.i.d. draws from `policy`.
std::vector<Index> sample(const CategoricalPolicy& policy, Rng& rng, std::size_t count);

/// Outcomes with probability strictly above `tol`.
std::vector<Index> support(const CategoricalPolicy& policy, double tol = 0.0);

/// Logits that reproduce `policy` under softmax. Outcomes with zero mass get
/// log(floor) when floor > 0 and -inf otherwise.
Eigen::VectorXd logits_from_policy(const CategoricalPolicy& policy, double floor = 0.0);

}  // namespace rapo
