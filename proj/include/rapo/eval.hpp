#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rapo/policy.hpp"
#include "rapo/seqspace.hpp"

namespace rapo {

struct PassAtKRecord {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t k = 0;
    double value = 0.0;
};

/// Unbiased pass@k estimate 1 - C(n-c, k) / C(n, k), evaluated as a running
/// product so n in the thousands does not overflow. pass@1 is exactly c/n.
double pass_at_k(std::size_t n, std::size_t c, std::size_t k);

/// Number of correct outcomes among n draws (reward >= threshold).
std::size_t count_correct(const CategoricalPolicy& policy, const Task& task, std::size_t n, double threshold, Rng& rng);

/// Draws n samples from the policy and reports pass@k for each k in k_list.
std::vector<PassAtKRecord> evaluate_policy(const CategoricalPolicy& policy, const Task& task, std::size_t n,
                                           const std::vector<std::size_t>& k_list, double threshold, Rng& rng);

/// Indices of tasks that the base policy never solves in n draws. Task i uses
/// the stream split_seed(seed, i), so membership does not depend on order.
std::vector<std::size_t> hard_subset(const TaskSet& tasks, const CategoricalPolicy& base_policy, std::size_t n,
                                     std::uint64_t seed, double threshold = 1.0);

/// Restriction of `tasks` to `indices`; throws if indices is empty.
TaskSet select_tasks(const TaskSet& tasks, const std::vector<std::size_t>& indices);

struct TaskEvaluation {
    std::string task_id;
    std::vector<PassAtKRecord> records;
};

/// Evaluates policies[i] on tasks[i], task i on stream split_seed(seed, i).
std::vector<TaskEvaluation> evaluate_tasks(const std::vector<CategoricalPolicy>& policies, const TaskSet& tasks,
                                           std::size_t n, const std::vector<std::size_t>& k_list, double threshold,
                                           std::uint64_t seed);

/// Mean pass@k per k over the chosen task indices (in k_list order).
std::vector<double> mean_pass_at_k(const std::vector<TaskEvaluation>& evaluations,
                                   const std::vector<std::size_t>& indices);

}  // namespace rapo
