#include "rapo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "rapo/divergence.hpp"
#include "rapo/errors.hpp"
#include "rapo/optima.hpp"

namespace rapo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArmijo = 1e-4;

TraceRecord measure(std::size_t step, const std::vector<Eigen::VectorXd>& probs, const CategoricalPolicy& ref,
                    const std::vector<Task>& tasks, const std::vector<ExactObjective>& objectives, double grad_norm) {
    TraceRecord record;
    record.step = step;
    record.grad_norm = grad_norm;
    const double count = static_cast<double>(probs.size());
    for (std::size_t t = 0; t < probs.size(); ++t) {
        record.expected_reward += probs[t].dot(tasks[t].rewards()) / count;
        record.forward_kl += kl_divergence(ref.probs(), probs[t]) / count;
        record.reverse_kl += kl_divergence(probs[t], ref.probs()) / count;
        record.entropy += entropy(probs[t]) / count;
        record.objective += objectives[t].value(probs[t]) / count;
    }
    return record;
}

Eigen::VectorXd ascent_direction(const Eigen::VectorXd& logits, const Eigen::VectorXd& grad, bool fisher) {
    if (!fisher) return grad;
    const Eigen::VectorXd probs = softmax_probs(logits);
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(grad.size());
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
        if (probs(i) > 0.0) dir(i) = grad(i) / probs(i);
    }
    return dir;
}

}  // namespace

std::string to_string(KlDirection direction) { return direction == KlDirection::forward ? "forward" : "reverse"; }

KlDirection parse_kl_direction(const std::string& name) {
    if (name == "forward") return KlDirection::forward;
    if (name == "reverse") return KlDirection::reverse;
    throw InvalidArgument("unknown KL direction '" + name + "'");
}

void ObjectiveSpec::validate() const { RegularizationParams{alpha, beta}.validate(); }

CategoricalPolicy effective_reference(const CategoricalPolicy& ref, const Task& task, const ObjectiveSpec& spec) {
    detail::require(ref.size() == task.outcome_count(), "reference does not match task space");
    if (!spec.reweight) return ref;
    return reweight_reference(ref, task.rewards(), *spec.reweight);
}

ExactObjective::ExactObjective(const CategoricalPolicy& ref, const Task& task, const ObjectiveSpec& spec)
    : reference_(effective_reference(ref, task, spec)), rewards_(task.rewards()), spec_(spec) {
    spec_.validate();
    log_reference_ = reference_.probs().array().log().matrix();
}

double ExactObjective::value(const Eigen::VectorXd& probs) const {
    detail::require(probs.size() == rewards_.size(), "policy does not match task space");
    const double kl = spec_.direction == KlDirection::reverse ? kl_divergence(probs, reference_.probs())
                                                              : kl_divergence(reference_.probs(), probs);
    if (std::isinf(kl)) return -kInf;
    return probs.dot(rewards_) - spec_.alpha * kl + spec_.beta * entropy(probs);
}

Eigen::VectorXd ExactObjective::gradient(const Eigen::VectorXd& logits) const {
    detail::require(logits.size() == rewards_.size(), "logits do not match task space");
    const Eigen::VectorXd log_probs = log_softmax(logits);
    const Eigen::VectorXd probs = exp_entries(log_probs);

    // d objective / d p_i for the terms that go through the generic softmax
    // Jacobian; additive constants are dropped because they cancel.
    Eigen::VectorXd dp = Eigen::VectorXd::Zero(logits.size());
    double mean = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (probs(i) <= 0.0) continue;
        double d = rewards_(i) - spec_.beta * log_probs(i);
        if (spec_.direction == KlDirection::reverse) {
            if (reference_.probs()(i) <= 0.0) {
                throw InvalidArgument("reverse-KL gradient is undefined for mass outside the reference support");
            }
            d -= spec_.alpha * (log_probs(i) - log_reference_(i));
        }
        dp(i) = d;
        mean += probs(i) * d;
    }
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (probs(i) > 0.0) grad(i) = probs(i) * (dp(i) - mean);
    }
    if (spec_.direction == KlDirection::forward) {
        // through the softmax, -alpha KL(ref || p) differentiates to alpha (ref - p)
        grad += spec_.alpha * (reference_.probs() - probs);
    }
    return grad;
}

Eigen::VectorXd ExactObjective::feasible_logits(Eigen::VectorXd logits) const {
    if (spec_.direction == KlDirection::reverse) {
        for (Eigen::Index i = 0; i < logits.size(); ++i) {
            if (reference_.probs()(i) <= 0.0) logits(i) = -kInf;
        }
    }
    return logits;
}

double exact_objective(const CategoricalPolicy& policy, const CategoricalPolicy& ref, const Task& task,
                       const ObjectiveSpec& spec) {
    return ExactObjective(ref, task, spec).value(policy.probs());
}

Eigen::VectorXd exact_gradient(const Eigen::VectorXd& logits, const CategoricalPolicy& ref, const Task& task,
                               const ObjectiveSpec& spec) {
    detail::require((logits.array() > -kInf).any() && !logits.hasNaN() && (logits.array() < kInf).all(),
                    "logits must be finite or -inf with at least one finite entry");
    return ExactObjective(ref, task, spec).gradient(logits);
}

AscentResult gradient_ascent(const Eigen::VectorXd& init_logits, const CategoricalPolicy& ref, const Task& task,
                             const ObjectiveSpec& spec, const AscentOptions& options) {
    detail::require(options.max_steps >= 1, "gradient ascent needs at least one step");
    detail::require(options.learning_rate > 0.0, "learning rate must be positive");
    detail::require(options.record_every >= 1, "record_every must be >= 1");
    const ExactObjective objective(ref, task, spec);
    const std::vector<Task> tasks{task};
    const std::vector<ExactObjective> objectives{objective};

    Eigen::VectorXd logits = objective.feasible_logits(init_logits);
    detail::require(logits.size() == static_cast<Eigen::Index>(task.outcome_count()), "logits do not match task");
    double value = objective.value_at_logits(logits);
    Eigen::VectorXd grad = objective.gradient(logits);
    double rate = options.learning_rate;

    TrainTrace trace{spec, {}, std::nullopt};
    auto record = [&](std::size_t step, double norm) {
        std::vector<Eigen::VectorXd> probs{softmax_probs(logits)};
        trace.records.push_back(measure(step, probs, ref, tasks, objectives, norm));
    };

    std::size_t step = 0;
    bool converged = false;
    double best_norm = grad.norm();
    std::size_t best_step = 0;
    for (; step < options.max_steps; ++step) {
        const double norm = grad.norm();
        if (norm <= options.grad_tolerance) {
            converged = true;
            break;
        }
        if (norm < best_norm * (1.0 - options.stall_ratio)) {
            best_norm = norm;
            best_step = step;
        } else if (options.stall_window > 0 && step - best_step >= options.stall_window) {
            converged = true;
            break;
        }
        const Eigen::VectorXd dir = ascent_direction(logits, grad, options.fisher);
        if (!options.line_search) {
            const Eigen::VectorXd next = logits + options.learning_rate * dir;
            if (next.hasNaN() || (next.array() == kInf).any()) {
                trace.abort_reason = "non-finite logits at step " + std::to_string(step + 1);
                break;
            }
            logits = next;
            value = objective.value_at_logits(logits);
            if (std::isnan(value)) {
                trace.abort_reason = "objective became NaN at step " + std::to_string(step + 1);
                break;
            }
            grad = objective.gradient(logits);
            if ((step + 1) % options.record_every == 0) record(step + 1, norm);
            continue;
        }

        bool accepted = false;
        double t = rate;
        while (t > 1e-30) {
            Eigen::VectorXd candidate = logits + t * dir;
            const double candidate_value = objective.value_at_logits(candidate);
            if (candidate_value >= value) {
                const double predicted = t * grad.dot(dir);
                bool accept = candidate_value >= value + kArmijo * predicted;
                Eigen::VectorXd candidate_grad;
                if (!accept) {
                    // Below floating-point resolution of the objective: accept a
                    // non-decreasing step only if it also shrinks the gradient.
                    const double resolution = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(value));
                    if (kArmijo * predicted <= resolution) {
                        candidate_grad = objective.gradient(candidate);
                        accept = candidate_grad.norm() < norm;
                    }
                }
                if (accept) {
                    logits = std::move(candidate);
                    value = candidate_value;
                    grad = candidate_grad.size() ? std::move(candidate_grad) : objective.gradient(logits);
                    rate = std::min(t * options.growth, options.max_learning_rate);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if (!accepted) {
            // no ascent direction resolvable in floating point
            converged = true;
            break;
        }
        if ((step + 1) % options.record_every == 0) record(step + 1, norm);
    }

    CategoricalPolicy policy(softmax_probs(logits));
    return AscentResult{std::move(policy), std::move(logits), std::move(trace), step, converged};
}

Eigen::VectorXd group_advantages(std::span<const double> rewards, double std_floor) {
    detail::require(rewards.size() >= 2, "group advantages need at least two samples");
    const Eigen::Map<const Eigen::VectorXd> r(rewards.data(), static_cast<Eigen::Index>(rewards.size()));
    const double mean = r.mean();
    const double std = std::sqrt((r.array() - mean).square().mean());
    if (std < std_floor) return Eigen::VectorXd::Zero(r.size());
    return ((r.array() - mean) / std).matrix();
}

double clipped_surrogate(double ratio, double advantage, double clip_eps) {
    detail::require(ratio >= 0.0, "probability ratio must be non-negative");
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    return std::min(ratio * advantage, clipped * advantage);
}

GroupObjective group_objective(const Eigen::VectorXd& logits, const Eigen::VectorXd& old_probs,
                               const Eigen::VectorXd& ref_probs, std::span<const Index> samples,
                               std::span<const double> advantages, const ObjectiveSpec& spec, double clip_eps) {
    detail::require(!samples.empty(), "group must contain at least one sample");
    detail::require(samples.size() == advantages.size(), "one advantage per sample is required");
    detail::require(logits.size() == old_probs.size() && logits.size() == ref_probs.size(),
                    "group inputs live on different spaces");

    const Eigen::VectorXd log_probs = log_softmax(logits);
    const Eigen::VectorXd probs = exp_entries(log_probs);

    // The gradient of every per-sample term has the form c_i (e_{y_i} - pi):
    // the surrogate through its ratio, the KL and entropy estimators through
    // the likelihood-ratio identity grad E_pi[f] = E_old[rho (f grad ln pi + grad f)],
    // which keeps the sampled gradient unbiased for the exact one.
    GroupObjective out;
    out.gradient = Eigen::VectorXd::Zero(logits.size());
    double coefficient_sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto y = static_cast<Eigen::Index>(samples[i]);
        detail::require(y < logits.size(), "sampled outcome out of range");
        detail::require(old_probs(y) > 0.0 && probs(y) > 0.0, "sampled outcome has zero probability");
        const double log_p = log_probs(y);
        const double ratio = std::exp(log_p - std::log(old_probs(y)));
        const double advantage = advantages[i];

        const double surrogate = clipped_surrogate(ratio, advantage, clip_eps);
        out.surrogate += surrogate;
        double c = (ratio * advantage <= surrogate) ? ratio * advantage : 0.0;

        if (spec.direction == KlDirection::forward) {
            const double w = ref_probs(y) / probs(y);
            out.kl_estimate += k3_term(w);
            c -= spec.alpha * ratio * (1.0 - w);
        } else {
            detail::require(ref_probs(y) > 0.0, "reverse-KL sample outside the reference support");
            const double log_ratio = log_p - std::log(ref_probs(y));
            out.kl_estimate += log_ratio;
            c -= spec.alpha * ratio * (log_ratio + 1.0);
        }

        out.entropy_estimate -= log_p;
        c += spec.beta * ratio * (-log_p - 1.0);

        out.gradient(y) += c;
        coefficient_sum += c;
    }
    const double g = static_cast<double>(samples.size());
    out.gradient = (out.gradient - coefficient_sum * probs) / g;
    out.surrogate /= g;
    out.kl_estimate /= g;
    out.entropy_estimate /= g;
    out.value = out.surrogate - spec.alpha * out.kl_estimate + spec.beta * out.entropy_estimate;
    return out;
}

void TrainConfig::validate() const {
    detail::require(group_size >= 2, "group_size must be >= 2");
    detail::require(clip_eps > 0.0 && clip_eps < 1.0, "clip_eps must lie in (0, 1)");
    detail::require(inner_epochs >= 1 && batches_per_refresh >= 1 && refresh_rounds >= 1,
                    "loop counts must be >= 1");
    detail::require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate must be >= 0");
    detail::require(batch_size >= 1, "batch_size must be >= 1");
    detail::require(adv_std_floor > 0.0, "adv_std_floor must be positive");
    detail::require(init_floor > 0.0 && init_floor < 1.0, "init_floor must lie in (0, 1)");
}

Eigen::VectorXd initial_logits(const CategoricalPolicy& ref, const ObjectiveSpec& spec, double init_floor) {
    return logits_from_policy(ref, spec.direction == KlDirection::forward ? init_floor : 0.0);
}

TrainResult rapo_train(const CategoricalPolicy& ref, const TaskSet& tasks, const TrainConfig& config,
                       const ObjectiveSpec& spec) {
    config.validate();
    spec.validate();
    detail::require(ref.size() == tasks.space().outcome_count(), "reference does not match task space");

    const std::size_t task_count = tasks.size();
    std::vector<ExactObjective> objectives;
    objectives.reserve(task_count);
    for (const auto& task : tasks.tasks()) objectives.emplace_back(ref, task, spec);

    std::vector<Eigen::VectorXd> logits;
    std::vector<CategoricalPolicy> working_refs;
    for (std::size_t t = 0; t < task_count; ++t) {
        logits.push_back(objectives[t].feasible_logits(initial_logits(ref, spec, config.init_floor)));
        working_refs.push_back(ref);
    }

    TrainTrace trace{spec, {}, std::nullopt};
    std::vector<Eigen::VectorXd> probs(task_count);
    std::size_t step = 0;
    const auto batch_weight = 1.0 / static_cast<double>(config.batch_size);

    for (std::size_t round = 0; round < config.refresh_rounds && !trace.aborted(); ++round) {
        for (std::size_t m = 0; m < config.batches_per_refresh && !trace.aborted(); ++m) {
            const std::uint64_t batch_seed = split_seed(config.seed, round * config.batches_per_refresh + m);
            Rng batch_rng(batch_seed);

            // pi_old snapshot and the per-task reweighted reference for this batch
            std::vector<Eigen::VectorXd> old_probs(task_count);
            std::map<std::size_t, Eigen::VectorXd> batch_refs;
            std::map<std::size_t, Sampler> samplers;

            struct Group {
                std::size_t task;
                std::vector<Index> samples;
                std::vector<double> advantages;
            };
            std::vector<Group> groups;
            groups.reserve(config.batch_size);
            for (std::size_t j = 0; j < config.batch_size; ++j) {
                const std::size_t t = tasks.sample_index(batch_rng);
                if (!batch_refs.count(t)) {
                    old_probs[t] = softmax_probs(logits[t]);
                    samplers.emplace(t, Sampler(old_probs[t]));
                    batch_refs.emplace(t, effective_reference(working_refs[t], tasks[t], spec).probs());
                }
                Rng group_rng(split_seed(batch_seed, j + 1));
                Group group{t, std::vector<Index>(config.group_size), {}};
                std::vector<double> rewards(config.group_size);
                for (std::size_t i = 0; i < config.group_size; ++i) {
                    group.samples[i] = samplers.at(t).draw(group_rng);
                    rewards[i] = tasks[t].rewards()(static_cast<Eigen::Index>(group.samples[i]));
                }
                const Eigen::VectorXd adv = group_advantages(rewards, config.adv_std_floor);
                group.advantages.assign(adv.data(), adv.data() + adv.size());
                groups.push_back(std::move(group));
            }

            for (std::size_t k = 0; k < config.inner_epochs; ++k) {
                std::vector<Eigen::VectorXd> grads(task_count);
                for (const auto& [t, unused] : batch_refs) grads[t] = Eigen::VectorXd::Zero(logits[t].size());
                double loss = 0.0;
                for (const auto& group : groups) {
                    const auto go = group_objective(logits[group.task], old_probs[group.task],
                                                    batch_refs.at(group.task), group.samples, group.advantages,
                                                    spec, config.clip_eps);
                    grads[group.task] += batch_weight * go.gradient;
                    loss += batch_weight * go.value;
                }
                double norm_sq = 0.0;
                for (const auto& [t, unused] : batch_refs) norm_sq += grads[t].squaredNorm();
                if (!std::isfinite(loss) || !std::isfinite(norm_sq)) {
                    trace.abort_reason = "non-finite loss at update " + std::to_string(step + 1);
                    break;
                }
                bool overflow = false;
                for (const auto& [t, unused] : batch_refs) {
                    const Eigen::VectorXd next = logits[t] + config.learning_rate * grads[t];
                    overflow = overflow || next.hasNaN() || (next.array() == kInf).any();
                }
                if (overflow) {
                    // the last finite parameters are kept
                    trace.abort_reason = "non-finite logits at update " + std::to_string(step + 1);
                    break;
                }
                for (const auto& [t, unused] : batch_refs) logits[t] += config.learning_rate * grads[t];
                ++step;
                for (std::size_t t = 0; t < task_count; ++t) probs[t] = softmax_probs(logits[t]);
                trace.records.push_back(measure(step, probs, ref, tasks.tasks(), objectives, std::sqrt(norm_sq)));
            }
        }
        // pi_ref <- pi_theta
        for (std::size_t t = 0; t < task_count; ++t) working_refs[t] = CategoricalPolicy(softmax_probs(logits[t]));
    }

    TrainResult result{{}, std::move(trace)};
    for (std::size_t t = 0; t < task_count; ++t) result.policies.emplace_back(softmax_probs(logits[t]));
    return result;
}

}  // namespace rapo
