#pragma once

#include <string>

#include <Eigen/Dense>

#include "rapo/policy.hpp"

namespace rapo {

/// Reward-dependent exponent applied to the reference policy.
struct ReweightSpec {
    enum class Kind { identity, inverse_proportional, tanh };

    Kind kind = Kind::inverse_proportional;
    double tau_max = 2.2;

    static ReweightSpec identity() { return {Kind::identity, 2.2}; }
    static ReweightSpec inverse_proportional(double tau_max) { return {Kind::inverse_proportional, tau_max}; }
    static ReweightSpec tanh() { return {Kind::tanh, 2.2}; }

    bool operator==(const ReweightSpec& other) const;
};

std::string to_string(ReweightSpec::Kind kind);
ReweightSpec::Kind parse_reweight_kind(const std::string& name);

/// identity: 1; inverse_proportional: 1 / (tau_max - r); tanh: (1 + tanh r) / 2.
double phi(const ReweightSpec& spec, double reward);

/// ref_i^phi(r_i) / Z with 0^w = 0 for w > 0. Identity reweighting returns `ref`
/// unchanged. Throws if some phi value leaves [0, 1], if an outcome with zero
/// reference mass gets exponent 0, or if Z is zero.
CategoricalPolicy reweight_reference(const CategoricalPolicy& ref, const Eigen::VectorXd& rewards,
                                     const ReweightSpec& spec);

/// ref_i^w / Z for one exponent shared by all outcomes.
CategoricalPolicy flatten_reference(const CategoricalPolicy& ref, double exponent);

}  // namespace rapo
