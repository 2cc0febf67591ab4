#include "rapo/divergence.hpp"

namespace rapo {

double k3_estimate(const CategoricalPolicy& ref, const CategoricalPolicy& policy, std::span<const Index> samples) {
    detail::require(ref.size() == policy.size(), "distributions live on spaces of different sizes");
    detail::require(!samples.empty(), "k3 estimate needs at least one sample");
    double total = 0.0;
    for (auto y : samples) {
        detail::require(y < policy.size(), "sampled outcome out of range");
        const double p = policy[y];
        detail::require(p > 0.0, "sampled outcome has zero probability under the policy");
        total += k3_term(ref[y] / p);
    }
    return total / static_cast<double>(samples.size());
}

}  // namespace rapo
