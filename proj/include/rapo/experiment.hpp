#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rapo/eval.hpp"
#include "rapo/io.hpp"
#include "rapo/trainer.hpp"

namespace rapo {

struct ReferenceSpec {
    enum class Kind { uniform, random, explicit_probs };
    Kind kind = Kind::uniform;
    std::vector<Index> zero_outcomes;  // forced to zero mass before normalizing
    std::vector<double> probs;         // explicit_probs only
};

struct TaskSpec {
    enum class Kind { needle, random, file };
    Kind kind = Kind::needle;
    std::vector<std::vector<Index>> needle_sets{{0}};  // one task per set
    double high = 1.0;
    double low = 0.0;
    std::size_t count = 1;  // random only
    RewardDistribution distribution;
    std::string path;  // file only
};

struct EvalSpec {
    std::size_t n = 2048;
    std::vector<std::size_t> k_list{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
    double threshold = 1.0;
    std::size_t hard_n = 2048;
    std::string policy_file;  // eval command: policy.json from a train run; empty = reference
};

struct VerifySpec {
    std::size_t instances = 20;
    std::size_t prop1_outcomes = 16;
    std::vector<Index> prop1_zero_outcomes{0, 1, 2, 13, 14, 15};
    double prop1_alpha = 0.1;
    double prop1_beta = 0.1;
    std::size_t lemma_min_outcomes = 10;
    std::size_t lemma_max_outcomes = 100;
    double tol_prop1 = 1e-4;
    double tol_lemma = 1e-6;
    AscentOptions ascent;
};

struct SweepSpec {
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<std::optional<ReweightSpec>> reweight;
    std::vector<double> clip_eps;
    bool has_reweight = false;  // distinguishes "not swept" from an explicit list
};

/// Fully validated experiment description. Every section is optional in the
/// JSON file and falls back to the defaults above; unknown keys are errors.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::uint32_t vocab_size = 16;
    std::uint32_t max_len = 1;
    bool space_given = false;
    TaskSpec task;
    ReferenceSpec reference;
    ObjectiveSpec objective;  // objective.reweight mirrors the top-level "reweight" key
    TrainConfig train;
    EvalSpec eval;
    VerifySpec verify;
    SweepSpec sweep;
    std::string out_dir = "out";
};

/// Throws ConfigError on any schema or value violation.
ExperimentConfig parse_config(const Json& json);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The resolved configuration, including defaults, as written into outputs.
/// out_dir is left out so reruns into different directories stay byte-identical.
Json config_to_json(const ExperimentConfig& config);

TaskSet build_taskset(const ExperimentConfig& config);
CategoricalPolicy build_reference(const ExperimentConfig& config, const SequenceSpace& space);

/// Training seed derived from the top-level seed.
TrainConfig resolved_train_config(const ExperimentConfig& config);

struct VerifyReport {
    Json report;
    bool pass = false;
};

VerifyReport run_verify_optima(const ExperimentConfig& config);

struct FinalMetrics {
    double expected_reward = 0.0;
    double entropy = 0.0;
    double forward_kl = 0.0;
    double reverse_kl = 0.0;
};

struct TrainOutcome {
    TaskSet tasks;
    TrainResult result;
    FinalMetrics final_metrics;
    std::vector<TaskEvaluation> evaluations;
    std::vector<std::size_t> hard;
    std::vector<double> full_pass;
    std::vector<double> hard_pass;
};

TrainOutcome run_train(const ExperimentConfig& config);

struct EvalOutcome {
    std::vector<TaskEvaluation> evaluations;
    std::vector<std::size_t> hard;
    std::vector<double> full_pass;
    std::vector<double> hard_pass;
};

EvalOutcome run_eval(const ExperimentConfig& config);

struct SweepCell {
    double alpha;
    double beta;
    std::optional<ReweightSpec> reweight;
    double clip_eps;
};

std::vector<SweepCell> sweep_cells(const ExperimentConfig& config);

/// One CSV row per cell in cell order. A failing cell records its error in
/// the status column and the sweep continues.
struct SweepOutcome {
    std::string csv;
    std::size_t failures = 0;
};

SweepOutcome run_sweep(const ExperimentConfig& config, std::size_t jobs);

std::string reweight_label(const std::optional<ReweightSpec>& spec);

/// Output documents, all embedding the resolved config.
std::string trace_csv(const ExperimentConfig& config, const TrainTrace& trace);
std::string eval_csv(const ExperimentConfig& config, const std::vector<TaskEvaluation>& evaluations);
Json eval_summary_json(const ExperimentConfig& config, const TaskSet& tasks, const std::vector<std::size_t>& hard,
                       const std::vector<double>& full_pass, const std::vector<double>& hard_pass);
Json policies_json(const ExperimentConfig& config, const TaskSet& tasks, const std::vector<CategoricalPolicy>& policies);

/// Writes trace.csv, policy.json, eval.csv and eval_summary.json under dir.
void write_train_outputs(const ExperimentConfig& config, const TrainOutcome& outcome, const std::filesystem::path& dir);

}  // namespace rapo
