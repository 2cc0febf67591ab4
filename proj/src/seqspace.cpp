#include "rapo/seqspace.hpp"

#include <string>

#include "rapo/errors.hpp"

namespace rapo {

SequenceSpace::SequenceSpace(std::uint32_t vocab_size, std::uint32_t max_len, std::uint64_t cap)
    : vocab_size_(vocab_size), max_len_(max_len), outcome_count_(0) {
    detail::require(vocab_size >= 1, "vocab_size must be >= 1");
    detail::require(max_len >= 1, "max_len must be >= 1");

    offsets_.reserve(max_len);
    std::uint64_t total = 0;
    std::uint64_t layer = 1;
    for (std::uint32_t len = 1; len <= max_len; ++len) {
        // layer = V^len, checked against the cap before it can overflow
        if (layer > cap / vocab_size) {
            throw InvalidArgument("sequence space exceeds enumeration cap of " + std::to_string(cap) + " outcomes");
        }
        layer *= vocab_size;
        offsets_.push_back(total);
        total += layer;
        if (total > cap) {
            throw InvalidArgument("sequence space exceeds enumeration cap of " + std::to_string(cap) + " outcomes");
        }
    }
    outcome_count_ = total;
}

Index SequenceSpace::encode(const Sequence& sequence) const {
    detail::require(!sequence.empty(), "cannot encode an empty sequence");
    detail::require(sequence.size() <= max_len_, "sequence longer than max_len");
    Index rank = 0;
    for (auto token : sequence) {
        detail::require(token < vocab_size_, "token " + std::to_string(token) + " outside vocabulary");
        rank = rank * vocab_size_ + token;
    }
    return offsets_[sequence.size() - 1] + rank;
}

Sequence SequenceSpace::decode(Index outcome) const {
    detail::require(outcome < outcome_count_, "outcome index out of range");
    std::size_t len = offsets_.size();
    while (offsets_[len - 1] > outcome) --len;
    Index rank = outcome - offsets_[len - 1];
    Sequence sequence(len);
    for (std::size_t pos = len; pos-- > 0;) {
        sequence[pos] = static_cast<std::uint32_t>(rank % vocab_size_);
        rank /= vocab_size_;
    }
    return sequence;
}

SequenceSpace build_space(std::uint32_t vocab_size, std::uint32_t max_len, std::uint64_t cap) {
    return SequenceSpace(vocab_size, max_len, cap);
}

Task::Task(std::string id, const SequenceSpace& space, Eigen::VectorXd rewards) : id_(std::move(id)) {
    detail::require(static_cast<Index>(rewards.size()) == space.outcome_count(),
                    "task '" + id_ + "': reward vector length " + std::to_string(rewards.size()) +
                        " does not match outcome count " + std::to_string(space.outcome_count()));
    detail::require(rewards.allFinite(), "task '" + id_ + "': rewards must be finite");
    rewards_ = std::make_shared<const Eigen::VectorXd>(std::move(rewards));
}

TaskSet::TaskSet(SequenceSpace space, std::vector<Task> tasks) : space_(space), tasks_(std::move(tasks)) {
    detail::require(!tasks_.empty(), "task set must not be empty");
    for (const auto& task : tasks_) {
        detail::require(task.outcome_count() == space_.outcome_count(),
                        "task '" + task.id() + "' does not match the task set's space");
    }
}

std::size_t TaskSet::sample_index(Rng& rng) const {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(tasks_.size())) % tasks_.size();
}

Task make_needle_task(const SequenceSpace& space, const std::vector<Index>& needles, double high_reward,
                      double low_reward, std::string id) {
    detail::require(!needles.empty(), "needle set must not be empty");
    detail::require(high_reward > low_reward, "high_reward must exceed low_reward");
    Eigen::VectorXd rewards = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(space.outcome_count()), low_reward);
    for (auto needle : needles) {
        detail::require(needle < space.outcome_count(), "needle index out of range");
        rewards(static_cast<Eigen::Index>(needle)) = high_reward;
    }
    return Task(std::move(id), space, std::move(rewards));
}

Task make_random_task(const SequenceSpace& space, std::uint64_t seed, const RewardDistribution& distribution,
                      std::string id) {
    Rng rng(seed);
    Eigen::VectorXd rewards(static_cast<Eigen::Index>(space.outcome_count()));
    switch (distribution.kind) {
        case RewardDistribution::Kind::uniform:
            detail::require(distribution.high >= distribution.low, "uniform reward bounds are inverted");
            for (auto& r : rewards) r = distribution.low + (distribution.high - distribution.low) * uniform01(rng);
            break;
        case RewardDistribution::Kind::bernoulli:
            detail::require(distribution.p >= 0.0 && distribution.p <= 1.0, "bernoulli p must lie in [0, 1]");
            for (auto& r : rewards) r = uniform01(rng) < distribution.p ? 1.0 : 0.0;
            break;
    }
    return Task(std::move(id), space, std::move(rewards));
}

}  // namespace rapo
