#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rapo/rng.hpp"

namespace rapo {

using Index = std::size_t;
using Sequence = std::vector<std::uint32_t>;

inline constexpr std::uint64_t kDefaultOutcomeCap = 1'000'000;

/// All token sequences of length 1..max_len over a vocabulary of size
/// vocab_size. Outcomes are ordered length-major, then lexicographically
/// within a length: for V=2, L=2 the order is [0] [1] [0,0] [0,1] [1,0] [1,1].
class SequenceSpace {
public:
    SequenceSpace(std::uint32_t vocab_size, std::uint32_t max_len, std::uint64_t cap = kDefaultOutcomeCap);

    std::uint32_t vocab_size() const { return vocab_size_; }
    std::uint32_t max_len() const { return max_len_; }
    Index outcome_count() const { return outcome_count_; }

    Index encode(const Sequence& sequence) const;
    Sequence decode(Index outcome) const;

    bool operator==(const SequenceSpace& other) const {
        return vocab_size_ == other.vocab_size_ && max_len_ == other.max_len_;
    }

private:
    std::uint32_t vocab_size_;
    std::uint32_t max_len_;
    Index outcome_count_;
    // offsets_[l] is the index of the first sequence of length l + 1.
    std::vector<Index> offsets_;
};

SequenceSpace build_space(std::uint32_t vocab_size, std::uint32_t max_len, std::uint64_t cap = kDefaultOutcomeCap);

/// A question x together with its reward table r(x, .) over a space.
class Task {
public:
    Task(std::string id, const SequenceSpace& space, Eigen::VectorXd rewards);

    const std::string& id() const { return id_; }
    const Eigen::VectorXd& rewards() const { return *rewards_; }
    Index outcome_count() const { return static_cast<Index>(rewards_->size()); }

private:
    std::string id_;
    std::shared_ptr<const Eigen::VectorXd> rewards_;
};

/// Non-empty list of tasks over one shared space; sampled uniformly.
class TaskSet {
public:
    TaskSet(SequenceSpace space, std::vector<Task> tasks);

    const SequenceSpace& space() const { return space_; }
    const std::vector<Task>& tasks() const { return tasks_; }
    std::size_t size() const { return tasks_.size(); }
    const Task& operator[](std::size_t i) const { return tasks_[i]; }

    /// Index of a uniformly drawn task.
    std::size_t sample_index(Rng& rng) const;

private:
    SequenceSpace space_;
    std::vector<Task> tasks_;
};

Task make_needle_task(const SequenceSpace& space, const std::vector<Index>& needles, double high_reward,
                      double low_reward, std::string id = "needle");

struct RewardDistribution {
    enum class Kind { uniform, bernoulli };
    Kind kind = Kind::uniform;
    double low = 0.0;   // uniform lower bound
    double high = 1.0;  // uniform upper bound
    double p = 0.5;     // bernoulli success probability (reward 1, else 0)
};

Task make_random_task(const SequenceSpace& space, std::uint64_t seed, const RewardDistribution& distribution,
                      std::string id = "random");

}  // namespace rapo
