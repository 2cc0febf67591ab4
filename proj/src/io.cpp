#include "rapo/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rapo/errors.hpp"

namespace rapo {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 64> buffer{};
    const auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    return std::string(buffer.data(), result.ptr);
}

Json policy_to_json(const CategoricalPolicy& policy) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < policy.probs().size(); ++i) out.push_back(policy.probs()(i));
    return out;
}

CategoricalPolicy policy_from_json(const Json& json) {
    detail::require(json.is_array(), "policy JSON must be an array of numbers");
    Eigen::VectorXd probs(static_cast<Eigen::Index>(json.size()));
    for (std::size_t i = 0; i < json.size(); ++i) {
        detail::require(json[i].is_number(), "policy JSON must be an array of numbers");
        probs(static_cast<Eigen::Index>(i)) = json[i].get<double>();
    }
    return CategoricalPolicy(std::move(probs));
}

TaskSet taskset_from_json(const Json& json) {
    detail::require(json.is_object(), "task set JSON must be an object");
    for (const auto& [key, unused] : json.items()) {
        detail::require(key == "vocab_size" || key == "max_len" || key == "tasks",
                        "unknown key '" + key + "' in task set JSON");
    }
    detail::require(json.contains("vocab_size") && json["vocab_size"].is_number_unsigned(),
                    "task set JSON needs a non-negative integer vocab_size");
    detail::require(json.contains("max_len") && json["max_len"].is_number_unsigned(),
                    "task set JSON needs a non-negative integer max_len");
    detail::require(json.contains("tasks") && json["tasks"].is_array(), "task set JSON needs a tasks array");

    const SequenceSpace space(json["vocab_size"].get<std::uint32_t>(), json["max_len"].get<std::uint32_t>());
    std::vector<Task> tasks;
    for (const auto& entry : json["tasks"]) {
        detail::require(entry.is_object() && entry.contains("id") && entry["id"].is_string() &&
                            entry.contains("rewards") && entry["rewards"].is_array() && entry.size() == 2,
                        "each task needs exactly a string id and a rewards array");
        const auto& rewards_json = entry["rewards"];
        Eigen::VectorXd rewards(static_cast<Eigen::Index>(rewards_json.size()));
        for (std::size_t i = 0; i < rewards_json.size(); ++i) {
            detail::require(rewards_json[i].is_number(), "rewards must be numbers");
            rewards(static_cast<Eigen::Index>(i)) = rewards_json[i].get<double>();
        }
        tasks.emplace_back(entry["id"].get<std::string>(), space, std::move(rewards));
    }
    return TaskSet(space, std::move(tasks));
}

Json taskset_to_json(const TaskSet& tasks) {
    Json out;
    out["vocab_size"] = tasks.space().vocab_size();
    out["max_len"] = tasks.space().max_len();
    out["tasks"] = Json::array();
    for (const auto& task : tasks.tasks()) {
        Json rewards = Json::array();
        for (auto r : task.rewards()) rewards.push_back(r);
        out["tasks"].push_back({{"id", task.id()}, {"rewards", rewards}});
    }
    return out;
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw InvalidArgument("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

TaskSet load_taskset(const std::filesystem::path& path) { return taskset_from_json(read_json_file(path)); }

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << contents;
}

std::string csv_preamble(const Json& config) {
    std::ostringstream out;
    out << "# config=" << config.dump() << '\n';
    return out.str();
}

void write_trace_csv(std::ostream& out, const TrainTrace& trace) {
    out << "step,expected_reward,forward_kl,reverse_kl,entropy,grad_norm\n";
    for (const auto& r : trace.records) {
        out << r.step << ',' << format_double(r.expected_reward) << ',' << format_double(r.forward_kl) << ','
            << format_double(r.reverse_kl) << ',' << format_double(r.entropy) << ',' << format_double(r.grad_norm)
            << '\n';
    }
}

void write_eval_csv(std::ostream& out, const std::vector<TaskEvaluation>& evaluations) {
    out << "task_id,n,c,k,pass_at_k\n";
    for (const auto& evaluation : evaluations) {
        for (const auto& r : evaluation.records) {
            out << evaluation.task_id << ',' << r.n << ',' << r.c << ',' << r.k << ',' << format_double(r.value)
                << '\n';
        }
    }
}

}  // namespace rapo
