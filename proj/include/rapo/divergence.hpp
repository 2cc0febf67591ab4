#pragma once

#include <cmath>
#include <limits>
#include <span>

#include <Eigen/Dense>

#include "rapo/errors.hpp"
#include "rapo/policy.hpp"

namespace rapo {

namespace detail {
template <typename A, typename B>
void require_same_size(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    require(a.size() == b.size(), "distributions live on spaces of different sizes");
}
}  // namespace detail

/// D_KL(p || q) = sum_i p_i ln(p_i / q_i), with 0 ln(0/q) = 0.
/// Returns +inf when p puts mass where q has none.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_divergence(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
    using Scalar = typename DerivedP::Scalar;
    detail::require_same_size(p, q);
    Scalar total = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const Scalar pi = p(i);
        if (pi <= 0) continue;
        const Scalar qi = q(i);
        if (qi <= 0) return std::numeric_limits<Scalar>::infinity();
        total += pi * std::log(pi / qi);
    }
    return total < 0 ? Scalar(0) : total;
}

/// Reverse KL D_KL(policy || ref): the mode-seeking regularizer.
inline double reverse_kl(const CategoricalPolicy& policy, const CategoricalPolicy& ref) {
    return kl_divergence(policy.probs(), ref.probs());
}

/// Forward KL D_KL(ref || policy): the mass-covering regularizer.
inline double forward_kl(const CategoricalPolicy& ref, const CategoricalPolicy& policy) {
    return kl_divergence(ref.probs(), policy.probs());
}

/// h(r) = r ln r - r + 1, continuous at 0 with h(0) = 1. With r = ref/policy
/// evaluated at a draw from the policy, E[h] is the forward KL.
inline double k3_term(double ratio) {
    detail::require(ratio >= 0.0, "k3 ratio must be non-negative");
    if (ratio == 0.0) return 1.0;
    const double h = ratio * std::log(ratio) - ratio + 1.0;
    return h < 0.0 ? 0.0 : h;
}

/// Sample mean of h(ref_y / policy_y) over outcomes drawn from `policy`.
double k3_estimate(const CategoricalPolicy& ref, const CategoricalPolicy& policy, std::span<const Index> samples);

/// Exact expectation of the k3 term under `policy`; equals forward_kl(ref, policy)
/// whenever supp(ref) is inside supp(policy).
template <typename DerivedR, typename DerivedP>
typename DerivedR::Scalar k3_expectation(const Eigen::MatrixBase<DerivedR>& ref, const Eigen::MatrixBase<DerivedP>& policy) {
    using Scalar = typename DerivedR::Scalar;
    detail::require_same_size(ref, policy);
    Scalar total = 0;
    for (Eigen::Index i = 0; i < ref.size(); ++i) {
        if (policy(i) > 0) total += policy(i) * k3_term(ref(i) / policy(i));
    }
    return total;
}

}  // namespace rapo
