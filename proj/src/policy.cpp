#include "rapo/policy.hpp"

#include <algorithm>
#include <string>

namespace rapo {

CategoricalPolicy::CategoricalPolicy(Eigen::VectorXd probs) : probs_(std::move(probs)) {
    detail::require(probs_.size() > 0, "policy must have at least one outcome");
    detail::require(probs_.allFinite(), "policy probabilities must be finite");
    detail::require(probs_.minCoeff() >= 0.0, "policy probabilities must be non-negative");
    const double total = probs_.sum();
    detail::require(std::abs(total - 1.0) <= kSimplexTolerance,
                    "policy probabilities sum to " + std::to_string(total) + ", not 1");
}

CategoricalPolicy CategoricalPolicy::uniform(Index outcome_count) {
    detail::require(outcome_count > 0, "uniform policy needs at least one outcome");
    const auto n = static_cast<Eigen::Index>(outcome_count);
    return CategoricalPolicy(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

PolicyLogits::PolicyLogits(Eigen::VectorXd logits) : logits_(std::move(logits)) {
    detail::require(logits_.size() > 0, "logits must have at least one entry");
    detail::require(logits_.allFinite(), "logits must be finite");
}

Sampler::Sampler(const CategoricalPolicy& policy) : Sampler(policy.probs()) {}

Sampler::Sampler(const Eigen::VectorXd& probs) {
    cdf_.resize(static_cast<std::size_t>(probs.size()));
    double running = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        running += probs(i);
        cdf_[static_cast<std::size_t>(i)] = running;
        if (probs(i) > 0.0) last_positive_ = static_cast<Index>(i);
    }
    detail::require(running > 0.0, "cannot sample from a policy with no mass");
}

Index Sampler::draw(Rng& rng) const {
    const double target = uniform01(rng) * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    const auto index = static_cast<Index>(it - cdf_.begin());
    // rounding in the running sum can leave target >= cdf_.back()
    return std::min(index, last_positive_);
}

std::vector<Index> sample(const CategoricalPolicy& policy, Rng& rng, std::size_t count) {
    detail::require(count >= 1, "sample count must be >= 1");
    const Sampler sampler(policy);
    std::vector<Index> out(count);
    for (auto& draw : out) draw = sampler.draw(rng);
    return out;
}

std::vector<Index> support(const CategoricalPolicy& policy, double tol) {
    detail::require(tol >= 0.0, "support tolerance must be >= 0");
    std::vector<Index> out;
    for (Index i = 0; i < policy.size(); ++i) {
        if (policy[i] > tol) out.push_back(i);
    }
    return out;
}

Eigen::VectorXd logits_from_policy(const CategoricalPolicy& policy, double floor) {
    detail::require(floor >= 0.0 && floor < 1.0, "logit floor must lie in [0, 1)");
    Eigen::VectorXd logits(policy.probs().size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        const double p = std::max(policy.probs()(i), floor);
        logits(i) = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    }
    return logits;
}

}  // namespace rapo
