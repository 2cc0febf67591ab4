#include "rapo/eval.hpp"

#include <algorithm>
#include <string>

#include "rapo/errors.hpp"

namespace rapo {

double pass_at_k(std::size_t n, std::size_t c, std::size_t k) {
    detail::require(c <= n, "pass@k needs c <= n");
    detail::require(k >= 1 && k <= n, "pass@k needs 1 <= k <= n");
    if (c == 0) return 0.0;
    if (c > n - k) return 1.0;
    if (k == 1) return static_cast<double>(c) / static_cast<double>(n);
    // C(n-c, k) / C(n, k) = prod_{i<k} (n-c-i) / (n-i)
    double miss = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
        miss *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
    }
    return 1.0 - miss;
}

std::size_t count_correct(const CategoricalPolicy& policy, const Task& task, std::size_t n, double threshold,
                          Rng& rng) {
    detail::require(policy.size() == task.outcome_count(), "policy does not match task space");
    const Sampler sampler(policy);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (task.rewards()(static_cast<Eigen::Index>(sampler.draw(rng))) >= threshold) ++correct;
    }
    return correct;
}

std::vector<PassAtKRecord> evaluate_policy(const CategoricalPolicy& policy, const Task& task, std::size_t n,
                                           const std::vector<std::size_t>& k_list, double threshold, Rng& rng) {
    detail::require(!k_list.empty(), "k_list must not be empty");
    detail::require(n >= *std::max_element(k_list.begin(), k_list.end()), "n must be >= max(k_list)");
    const std::size_t c = count_correct(policy, task, n, threshold, rng);
    std::vector<PassAtKRecord> records;
    records.reserve(k_list.size());
    for (auto k : k_list) records.push_back({n, c, k, pass_at_k(n, c, k)});
    return records;
}

std::vector<std::size_t> hard_subset(const TaskSet& tasks, const CategoricalPolicy& base_policy, std::size_t n,
                                     std::uint64_t seed, double threshold) {
    detail::require(n >= 1, "hard subset needs n >= 1");
    std::vector<std::size_t> hard;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        Rng rng(split_seed(seed, i));
        if (count_correct(base_policy, tasks[i], n, threshold, rng) == 0) hard.push_back(i);
    }
    return hard;
}

TaskSet select_tasks(const TaskSet& tasks, const std::vector<std::size_t>& indices) {
    std::vector<Task> selected;
    for (auto i : indices) {
        detail::require(i < tasks.size(), "task index out of range");
        selected.push_back(tasks[i]);
    }
    return TaskSet(tasks.space(), std::move(selected));
}

std::vector<TaskEvaluation> evaluate_tasks(const std::vector<CategoricalPolicy>& policies, const TaskSet& tasks,
                                           std::size_t n, const std::vector<std::size_t>& k_list, double threshold,
                                           std::uint64_t seed) {
    detail::require(policies.size() == tasks.size(), "one policy per task is required");
    std::vector<TaskEvaluation> out;
    out.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        Rng rng(split_seed(seed, i));
        out.push_back({tasks[i].id(), evaluate_policy(policies[i], tasks[i], n, k_list, threshold, rng)});
    }
    return out;
}

std::vector<double> mean_pass_at_k(const std::vector<TaskEvaluation>& evaluations,
                                   const std::vector<std::size_t>& indices) {
    if (evaluations.empty()) return {};
    std::vector<double> means(evaluations.front().records.size(), 0.0);
    if (indices.empty()) return means;
    for (auto i : indices) {
        for (std::size_t j = 0; j < means.size(); ++j) means[j] += evaluations.at(i).records[j].value;
    }
    for (auto& m : means) m /= static_cast<double>(indices.size());
    return means;
}

}  // namespace rapo
