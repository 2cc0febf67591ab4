#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rapo/eval.hpp"
#include "rapo/policy.hpp"
#include "rapo/seqspace.hpp"
#include "rapo/trainer.hpp"

namespace rapo {

using Json = nlohmann::json;

/// Shortest decimal string that round-trips to the same double; "inf",
/// "-inf" and "nan" for non-finite values.
std::string format_double(double value);

Json policy_to_json(const CategoricalPolicy& policy);
CategoricalPolicy policy_from_json(const Json& json);

/// {"vocab_size": V, "max_len": L, "tasks": [{"id": ..., "rewards": [...]}, ...]}
TaskSet taskset_from_json(const Json& json);
Json taskset_to_json(const TaskSet& tasks);
TaskSet load_taskset(const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

/// Lines of the form "# key=value" prepended to every CSV so each file
/// records the configuration that produced it.
std::string csv_preamble(const Json& config);

/// step,expected_reward,forward_kl,reverse_kl,entropy,grad_norm
void write_trace_csv(std::ostream& out, const TrainTrace& trace);

/// task_id,n,c,k,pass_at_k
void write_eval_csv(std::ostream& out, const std::vector<TaskEvaluation>& evaluations);

}  // namespace rapo
