// rapo-lab: experiment runner for forward-KL, reward-reweighted policy
// optimization on enumerable sequence spaces.
//
//   rapo-lab verify-optima --config cfg.json --out results/
//   rapo-lab train         --config cfg.json --out results/ --seed 3
//   rapo-lab eval          --config cfg.json --out results/
//   rapo-lab sweep         --config cfg.json --out results/ --jobs 4

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rapo/errors.hpp"
#include "rapo/experiment.hpp"

namespace {

enum ExitCode : int {
    kSuccess = 0,
    kUnexpected = 1,
    kConfigError = 2,
    kVerificationFailure = 3,
    kRuntimeAbort = 4,
};

struct Options {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
};

rapo::ExperimentConfig resolve(const Options& options) {
    rapo::ExperimentConfig config =
        options.config_path.empty() ? rapo::parse_config(rapo::Json::object()) : rapo::load_config(options.config_path);
    if (options.seed) config.seed = *options.seed;
    if (!options.out_dir.empty()) config.out_dir = options.out_dir;
    return config;
}

int verify_optima(const rapo::ExperimentConfig& config) {
    const auto report = rapo::run_verify_optima(config);
    const std::filesystem::path out(config.out_dir);
    rapo::write_text_file(out / "verify_report.json", report.report.dump(2) + "\n");
    for (const auto& [name, s] : report.report["summary"].items()) {
        std::printf("%-7s %3zu/%-3zu within %.1e  max L-inf %.3e  %s\n", name.c_str(), s["passed"].get<std::size_t>(),
                    s["total"].get<std::size_t>(), s["tolerance"].get<double>(), s["max_linf"].get<double>(),
                    s["pass"].get<bool>() ? "PASS" : "FAIL");
    }
    return report.pass ? kSuccess : kVerificationFailure;
}

void print_pass(const rapo::ExperimentConfig& config, const char* label, std::size_t tasks,
                const std::vector<double>& values) {
    std::printf("%s (%zu tasks):", label, tasks);
    if (tasks == 0) {
        std::printf(" -\n");
        return;
    }
    for (std::size_t j = 0; j < values.size(); ++j) std::printf(" pass@%zu=%.4f", config.eval.k_list[j], values[j]);
    std::printf("\n");
}

int train(const rapo::ExperimentConfig& config) {
    const auto outcome = rapo::run_train(config);
    rapo::write_train_outputs(config, outcome, config.out_dir);
    const auto& m = outcome.final_metrics;
    std::printf("updates %zu  E[r]=%.6f  H=%.6f  KL(ref||pi)=%s  KL(pi||ref)=%s\n",
                outcome.result.trace.records.size(), m.expected_reward, m.entropy,
                rapo::format_double(m.forward_kl).c_str(), rapo::format_double(m.reverse_kl).c_str());
    print_pass(config, "full", outcome.tasks.size(), outcome.full_pass);
    print_pass(config, "hard", outcome.hard.size(), outcome.hard_pass);
    if (outcome.result.trace.aborted()) {
        std::fprintf(stderr, "training aborted: %s\n", outcome.result.trace.abort_reason->c_str());
        return kRuntimeAbort;
    }
    return kSuccess;
}

int eval(const rapo::ExperimentConfig& config) {
    const auto outcome = rapo::run_eval(config);
    const rapo::TaskSet tasks = rapo::build_taskset(config);
    const std::filesystem::path out(config.out_dir);
    rapo::write_text_file(out / "eval.csv", rapo::eval_csv(config, outcome.evaluations));
    rapo::write_text_file(
        out / "eval_summary.json",
        rapo::eval_summary_json(config, tasks, outcome.hard, outcome.full_pass, outcome.hard_pass).dump(2) + "\n");
    print_pass(config, "full", tasks.size(), outcome.full_pass);
    print_pass(config, "hard", outcome.hard.size(), outcome.hard_pass);
    return kSuccess;
}

int sweep(const rapo::ExperimentConfig& config, std::size_t jobs) {
    const auto outcome = rapo::run_sweep(config, jobs);
    rapo::write_text_file(std::filesystem::path(config.out_dir) / "sweep.csv", outcome.csv);
    const auto cells = rapo::sweep_cells(config).size();
    std::printf("sweep: %zu cells, %zu failed\n", cells, outcome.failures);
    return outcome.failures == 0 ? kSuccess : kRuntimeAbort;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forward-KL reward-aware policy optimization laboratory"};
    app.require_subcommand(1);
    Options options;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", options.config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--out", options.out_dir, "output directory (overrides out_dir)");
        sub->add_option("--seed", options.seed, "top-level seed (overrides config)");
        sub->add_option("--jobs", options.jobs, "worker threads")->check(CLI::PositiveNumber);
    };
    auto* verify_cmd = app.add_subcommand("verify-optima", "check gradient ascent against the analytic optima");
    auto* train_cmd = app.add_subcommand("train", "run sampled training, then evaluate pass@k");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate pass@k of the reference or a trained policy");
    auto* sweep_cmd = app.add_subcommand("sweep", "grid over alpha, beta, reweight and clip_eps");
    for (auto* sub : {verify_cmd, train_cmd, eval_cmd, sweep_cmd}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kSuccess : kConfigError;
    }

    try {
        const auto config = resolve(options);
        if (*verify_cmd) return verify_optima(config);
        if (*train_cmd) return train(config);
        if (*eval_cmd) return eval(config);
        if (*sweep_cmd) return sweep(config, options.jobs);
    } catch (const rapo::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const rapo::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntimeAbort;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return kUnexpected;
    }
    return kUnexpected;
}
