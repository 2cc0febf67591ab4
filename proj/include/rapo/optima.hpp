#pragma once

#include <Eigen/Dense>

#include "rapo/policy.hpp"

namespace rapo {

/// Coefficients of the KL (alpha) and entropy (beta) terms.
struct RegularizationParams {
    double alpha = 0.001;
    double beta = 0.01;

    void validate() const;
};

/// Stationary point of the forward-KL + entropy Lagrangian.
struct LagrangeSolution {
    CategoricalPolicy policy;
    double lambda;
    double residual;  // |sum(policy) - 1| before any renormalization
};

/// Maximizer of E[r] - alpha KL(pi || ref): pi ∝ exp(r / alpha) ref.
/// Zero wherever ref is zero.
CategoricalPolicy lemma1_optimum(const CategoricalPolicy& ref, const Eigen::VectorXd& rewards, double alpha);

/// Maximizer of E[r] - alpha KL(pi || ref) + beta H(pi):
/// pi ∝ exp(r / (alpha + beta)) ref^(alpha / (alpha + beta)).
CategoricalPolicy lemma2_optimum(const CategoricalPolicy& ref, const Eigen::VectorXd& rewards, double alpha,
                                 double beta);

/// F(u) = alpha ref / u - beta ln u, the per-outcome stationarity function.
double token_mass_residual_fn(double ref_mass, double alpha, double beta, double u);

/// Solves F(u) = beta + lambda - reward for the outcome mass u at a fixed
/// multiplier. F is strictly decreasing on (0, inf), so the root is unique.
/// For ref_mass == 0 the closed form exp((reward - lambda) / beta - 1) is returned.
/// Throws ConvergenceError if bisection does not converge in 200 iterations.
double solve_token_mass(double ref_mass, double reward, double alpha, double beta, double lambda);

/// Total mass S(lambda) = sum_i u_i(lambda); strictly decreasing in lambda.
double total_token_mass(const CategoricalPolicy& ref, const Eigen::VectorXd& rewards, double alpha, double beta,
                        double lambda);

/// Maximizer of E[r] - alpha KL(ref || pi) + beta H(pi) over the simplex, found
/// by bisection on the multiplier lambda with S(lambda) = 1. Requires beta > 0.
LagrangeSolution prop1_optimum(const CategoricalPolicy& ref, const Eigen::VectorXd& rewards, double alpha,
                               double beta);

}  // namespace rapo
