#include "rapo/reweight.hpp"

#include <cmath>

#include "rapo/errors.hpp"

namespace rapo {

bool ReweightSpec::operator==(const ReweightSpec& other) const {
    if (kind != other.kind) return false;
    return kind != Kind::inverse_proportional || tau_max == other.tau_max;
}

std::string to_string(ReweightSpec::Kind kind) {
    switch (kind) {
        case ReweightSpec::Kind::identity: return "identity";
        case ReweightSpec::Kind::inverse_proportional: return "inverse_proportional";
        case ReweightSpec::Kind::tanh: return "tanh";
    }
    return "unknown";
}

ReweightSpec::Kind parse_reweight_kind(const std::string& name) {
    if (name == "identity") return ReweightSpec::Kind::identity;
    if (name == "inverse_proportional") return ReweightSpec::Kind::inverse_proportional;
    if (name == "tanh") return ReweightSpec::Kind::tanh;
    throw InvalidArgument("unknown reweight kind '" + name + "'");
}

double phi(const ReweightSpec& spec, double reward) {
    switch (spec.kind) {
        case ReweightSpec::Kind::identity:
            return 1.0;
        case ReweightSpec::Kind::inverse_proportional:
            detail::require(reward < spec.tau_max, "inverse-proportional reweight needs reward < tau_max");
            return 1.0 / (spec.tau_max - reward);
        case ReweightSpec::Kind::tanh:
            return 0.5 * (1.0 + std::tanh(reward));
    }
    return 1.0;
}

namespace {

CategoricalPolicy normalize_powers(const CategoricalPolicy& ref, const Eigen::VectorXd& exponents) {
    Eigen::VectorXd weights(exponents.size());
    for (Eigen::Index i = 0; i < exponents.size(); ++i) {
        const double w = exponents(i);
        detail::require(w >= 0.0 && w <= 1.0, "reweight exponent " + std::to_string(w) + " outside [0, 1]");
        const double q = ref.probs()(i);
        if (q == 0.0) {
            detail::require(w > 0.0, "exponent 0 on an outcome with zero reference mass (0^0)");
            weights(i) = 0.0;
        } else {
            weights(i) = std::pow(q, w);
        }
    }
    const double z = weights.sum();
    detail::require(z > 0.0, "reweighted reference has zero normalizer");
    return CategoricalPolicy(weights / z);
}

}  // namespace

CategoricalPolicy reweight_reference(const CategoricalPolicy& ref, const Eigen::VectorXd& rewards,
                                     const ReweightSpec& spec) {
    detail::require(static_cast<Index>(rewards.size()) == ref.size(), "reward vector does not match policy size");
    if (spec.kind == ReweightSpec::Kind::identity) return ref;
    Eigen::VectorXd exponents(rewards.size());
    for (Eigen::Index i = 0; i < rewards.size(); ++i) exponents(i) = phi(spec, rewards(i));
    return normalize_powers(ref, exponents);
}

CategoricalPolicy flatten_reference(const CategoricalPolicy& ref, double exponent) {
    return normalize_powers(ref, Eigen::VectorXd::Constant(ref.probs().size(), exponent));
}

}  // namespace rapo
