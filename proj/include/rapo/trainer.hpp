#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rapo/policy.hpp"
#include "rapo/reweight.hpp"
#include "rapo/seqspace.hpp"

namespace rapo {

enum class KlDirection { reverse, forward };

std::string to_string(KlDirection direction);
KlDirection parse_kl_direction(const std::string& name);

/// Which regularized objective to maximize:
///   E_pi[r] - alpha KL(direction, ref~) + beta H(pi)
/// where ref~ is the raw reference or its reward-aware reweighting.
struct ObjectiveSpec {
    KlDirection direction = KlDirection::forward;
    std::optional<ReweightSpec> reweight;  // nullopt: raw reference
    double alpha = 0.001;
    double beta = 0.01;

    void validate() const;
};

/// The reference the KL term is measured against for this task.
CategoricalPolicy effective_reference(const CategoricalPolicy& ref, const Task& task, const ObjectiveSpec& spec);

/// Objective evaluated exactly over the enumerated outcome space, with the
/// effective reference precomputed.
///
/// Under the reverse direction any mass outside supp(ref~) makes the
/// objective -inf, so logits for those outcomes are pinned to -inf
/// (see feasible_logits) and the ascent runs on the reference support.
class ExactObjective {
public:
    ExactObjective(const CategoricalPolicy& ref, const Task& task, const ObjectiveSpec& spec);

    double value(const Eigen::VectorXd& probs) const;
    double value_at_logits(const Eigen::VectorXd& logits) const { return value(softmax_probs(logits)); }

    /// d objective / d logits through the softmax.
    Eigen::VectorXd gradient(const Eigen::VectorXd& logits) const;

    /// Copy of `logits` with infeasible outcomes set to -inf.
    Eigen::VectorXd feasible_logits(Eigen::VectorXd logits) const;

    const CategoricalPolicy& reference() const { return reference_; }
    const ObjectiveSpec& spec() const { return spec_; }

private:
    CategoricalPolicy reference_;
    Eigen::VectorXd log_reference_;
    Eigen::VectorXd rewards_;
    ObjectiveSpec spec_;
};

double exact_objective(const CategoricalPolicy& policy, const CategoricalPolicy& ref, const Task& task,
                       const ObjectiveSpec& spec);

Eigen::VectorXd exact_gradient(const Eigen::VectorXd& logits, const CategoricalPolicy& ref, const Task& task,
                               const ObjectiveSpec& spec);

struct TraceRecord {
    std::size_t step = 0;
    double expected_reward = 0.0;
    double forward_kl = 0.0;  // KL(ref || pi) against the run's input reference
    double reverse_kl = 0.0;  // KL(pi || ref)
    double entropy = 0.0;
    double objective = 0.0;
    double grad_norm = 0.0;
};

struct TrainTrace {
    ObjectiveSpec spec;
    std::vector<TraceRecord> records;
    std::optional<std::string> abort_reason;

    bool aborted() const { return abort_reason.has_value(); }
};

struct AscentOptions {
    double learning_rate = 1.0;
    std::size_t max_steps = 200000;
    bool line_search = true;
    // step along grad / pi (mirror ascent on the simplex) instead of the raw logit gradient
    bool fisher = true;
    double growth = 2.0;  // step-size growth after an accepted step
    double max_learning_rate = 1e8;
    double grad_tolerance = 1e-13;
    // stop once the best gradient norm has not dropped by stall_ratio within this many steps
    std::size_t stall_window = 2000;
    double stall_ratio = 1e-3;
    std::size_t record_every = 1;
};

struct AscentResult {
    CategoricalPolicy policy;
    Eigen::VectorXd logits;
    TrainTrace trace;
    std::size_t steps = 0;
    bool converged = false;
};

/// Exact-gradient ascent on logits. With line search, a step is accepted only
/// when the objective does not decrease, so the traced objective is monotone.
/// The Fisher direction divides each logit gradient entry by its policy mass;
/// it is still an ascent direction and removes the 1/min(pi) conditioning.
AscentResult gradient_ascent(const Eigen::VectorXd& init_logits, const CategoricalPolicy& ref, const Task& task,
                             const ObjectiveSpec& spec, const AscentOptions& options = {});

/// (r - mean) / std with the population std; all zeros when std < std_floor.
Eigen::VectorXd group_advantages(std::span<const double> rewards, double std_floor = 1e-8);

/// min(ratio A, clip(ratio, 1 - eps, 1 + eps) A).
double clipped_surrogate(double ratio, double advantage, double clip_eps);

/// Loss value and its gradient w.r.t. the logits for one group of samples.
struct GroupObjective {
    double value = 0.0;
    double surrogate = 0.0;
    double kl_estimate = 0.0;
    double entropy_estimate = 0.0;
    Eigen::VectorXd gradient;
};

/// One group's contribution to the sampled objective
///   mean_i g_i - alpha KL^ + beta H^
/// where g_i is the clipped surrogate, KL^ the k3 estimate (forward) or the
/// mean log-ratio ln(pi/ref~) (reverse), and H^ the mean of -ln pi(y_i).
/// `ref_probs` is the effective reference. Samples come from `old_probs`.
GroupObjective group_objective(const Eigen::VectorXd& logits, const Eigen::VectorXd& old_probs,
                               const Eigen::VectorXd& ref_probs, std::span<const Index> samples,
                               std::span<const double> advantages, const ObjectiveSpec& spec, double clip_eps);

struct TrainConfig {
    std::size_t group_size = 8;
    double clip_eps = 0.2;
    std::size_t inner_epochs = 1;          // K
    std::size_t batches_per_refresh = 10;  // M
    std::size_t refresh_rounds = 10;       // N
    double learning_rate = 1.0;
    std::size_t batch_size = 512;
    double adv_std_floor = 1e-8;
    double init_floor = 1e-6;  // minimum initial probability (forward direction)
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainResult {
    std::vector<CategoricalPolicy> policies;  // one per task, in task order
    TrainTrace trace;
};

/// Initial logits for a training run: log ref, with zero-mass outcomes raised
/// to init_floor in the forward direction and pinned to -inf in the reverse one.
Eigen::VectorXd initial_logits(const CategoricalPolicy& ref, const ObjectiveSpec& spec, double init_floor);

/// Sampled group-relative training with reference refresh: N rounds of M
/// batches of K inner updates; the working reference is replaced by the
/// current policy after each round. Deterministic given config.seed.
TrainResult rapo_train(const CategoricalPolicy& ref, const TaskSet& tasks, const TrainConfig& config,
                       const ObjectiveSpec& spec);

}  // namespace rapo
