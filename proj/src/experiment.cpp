#include "rapo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "rapo/divergence.hpp"
#include "rapo/errors.hpp"
#include "rapo/optima.hpp"

namespace rapo {

namespace {

bool non_negative_integer(const Json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Reads one JSON object, type-checking each key and rejecting unknown ones.
class Section {
public:
    Section(const Json& json, std::string path) : json_(json), path_(std::move(path)) {
        if (!json_.is_object()) throw ConfigError(path_ + " must be a JSON object");
    }

    bool has(const std::string& key) const { return json_.contains(key); }

    const Json* raw(const std::string& key) {
        seen_.insert(key);
        return json_.contains(key) ? &json_.at(key) : nullptr;
    }

    void get(const std::string& key, double& out) {
        if (const Json* v = raw(key)) {
            if (!v->is_number()) fail(key, "a number");
            out = v->get<double>();
            if (!std::isfinite(out)) fail(key, "a finite number");
        }
    }

    template <typename Unsigned>
        requires std::is_unsigned_v<Unsigned>
    void get(const std::string& key, Unsigned& out) {
        if (const Json* v = raw(key)) {
            if (!non_negative_integer(*v)) fail(key, "a non-negative integer");
            const auto value = v->get<std::uint64_t>();
            if (value > std::numeric_limits<Unsigned>::max()) fail(key, "a smaller integer");
            out = static_cast<Unsigned>(value);
        }
    }

    void get(const std::string& key, bool& out) {
        if (const Json* v = raw(key)) {
            if (!v->is_boolean()) fail(key, "a boolean");
            out = v->get<bool>();
        }
    }

    void get(const std::string& key, std::string& out) {
        if (const Json* v = raw(key)) {
            if (!v->is_string()) fail(key, "a string");
            out = v->get<std::string>();
        }
    }

    template <typename T>
    void get(const std::string& key, std::vector<T>& out) {
        if (const Json* v = raw(key)) {
            if (!v->is_array()) fail(key, "an array");
            out.clear();
            for (const auto& item : *v) {
                if constexpr (std::is_floating_point_v<T>) {
                    if (!item.is_number()) fail(key, "an array of numbers");
                } else {
                    if (!non_negative_integer(item)) fail(key, "an array of non-negative integers");
                }
                out.push_back(item.get<T>());
            }
        }
    }

    void finish() const {
        for (const auto& [key, unused] : json_.items()) {
            if (!seen_.count(key)) throw ConfigError("unknown key '" + key + "' in " + path_);
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& expected) const {
        throw ConfigError(path_ + "." + key + " must be " + expected);
    }

    const std::string& path() const { return path_; }

private:
    const Json& json_;
    std::string path_;
    std::set<std::string> seen_;
};

std::optional<ReweightSpec> parse_reweight(const Json& json, const std::string& path) {
    if (json.is_null()) return std::nullopt;
    Section s(json, path);
    std::string kind = "inverse_proportional";
    ReweightSpec spec;
    s.get("kind", kind);
    s.get("tau_max", spec.tau_max);
    s.finish();
    try {
        spec.kind = parse_reweight_kind(kind);
    } catch (const InvalidArgument& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return spec;
}

Json reweight_to_json(const std::optional<ReweightSpec>& spec) {
    if (!spec) return nullptr;
    Json out{{"kind", to_string(spec->kind)}};
    if (spec->kind == ReweightSpec::Kind::inverse_proportional) out["tau_max"] = spec->tau_max;
    return out;
}

void parse_task(const Json& json, TaskSpec& task) {
    Section s(json, "task");
    std::string kind = "needle";
    s.get("kind", kind);
    if (kind == "needle") {
        task.kind = TaskSpec::Kind::needle;
        if (const Json* needles = s.raw("needles")) {
            if (!needles->is_array() || needles->empty()) s.fail("needles", "a non-empty array");
            task.needle_sets.clear();
            if ((*needles)[0].is_array()) {
                for (const auto& set : *needles) {
                    if (!set.is_array()) s.fail("needles", "an array of index arrays");
                    std::vector<Index> indices;
                    for (const auto& i : set) {
                        if (!non_negative_integer(i)) s.fail("needles", "arrays of non-negative integers");
                        indices.push_back(i.get<Index>());
                    }
                    task.needle_sets.push_back(std::move(indices));
                }
            } else {
                std::vector<Index> indices;
                for (const auto& i : *needles) {
                    if (!non_negative_integer(i)) s.fail("needles", "an array of non-negative integers");
                    indices.push_back(i.get<Index>());
                }
                task.needle_sets.push_back(std::move(indices));
            }
        }
        s.get("high", task.high);
        s.get("low", task.low);
    } else if (kind == "random") {
        task.kind = TaskSpec::Kind::random;
        s.get("count", task.count);
        if (const Json* dist = s.raw("distribution")) {
            Section d(*dist, "task.distribution");
            std::string dist_kind = "uniform";
            d.get("kind", dist_kind);
            if (dist_kind == "uniform") {
                task.distribution.kind = RewardDistribution::Kind::uniform;
                d.get("low", task.distribution.low);
                d.get("high", task.distribution.high);
            } else if (dist_kind == "bernoulli") {
                task.distribution.kind = RewardDistribution::Kind::bernoulli;
                d.get("p", task.distribution.p);
            } else {
                throw ConfigError("task.distribution.kind must be 'uniform' or 'bernoulli'");
            }
            d.finish();
        }
    } else if (kind == "file") {
        task.kind = TaskSpec::Kind::file;
        s.get("path", task.path);
        if (task.path.empty()) throw ConfigError("task.path is required for kind 'file'");
    } else {
        throw ConfigError("task.kind must be 'needle', 'random' or 'file'");
    }
    s.finish();
}

void parse_reference(const Json& json, ReferenceSpec& ref) {
    Section s(json, "reference");
    std::string kind = "uniform";
    s.get("kind", kind);
    if (kind == "uniform") {
        ref.kind = ReferenceSpec::Kind::uniform;
    } else if (kind == "random") {
        ref.kind = ReferenceSpec::Kind::random;
    } else if (kind == "explicit") {
        ref.kind = ReferenceSpec::Kind::explicit_probs;
        s.get("probs", ref.probs);
        if (ref.probs.empty()) throw ConfigError("reference.probs is required for kind 'explicit'");
    } else {
        throw ConfigError("reference.kind must be 'uniform', 'random' or 'explicit'");
    }
    s.get("zero_outcomes", ref.zero_outcomes);
    s.finish();
}

void parse_ascent(const Json& json, AscentOptions& ascent) {
    Section s(json, "verify.ascent");
    s.get("learning_rate", ascent.learning_rate);
    s.get("max_steps", ascent.max_steps);
    s.get("line_search", ascent.line_search);
    s.get("fisher", ascent.fisher);
    s.get("growth", ascent.growth);
    s.get("grad_tolerance", ascent.grad_tolerance);
    s.get("stall_window", ascent.stall_window);
    s.get("stall_ratio", ascent.stall_ratio);
    s.finish();
    if (ascent.learning_rate <= 0.0 || ascent.max_steps == 0 || ascent.growth < 1.0 || ascent.grad_tolerance < 0.0 ||
        ascent.stall_ratio < 0.0 || ascent.stall_ratio >= 1.0) {
        throw ConfigError("verify.ascent: learning_rate > 0, max_steps >= 1, growth >= 1, grad_tolerance >= 0, stall_ratio in [0, 1)");
    }
}

Json number_or_string(double value) {
    if (std::isfinite(value)) return value;
    return format_double(value);
}

std::string csv_field(std::string text) {
    std::replace(text.begin(), text.end(), ',', ';');
    std::replace(text.begin(), text.end(), '\n', ' ');
    return text;
}

FinalMetrics final_metrics(const std::vector<CategoricalPolicy>& policies, const CategoricalPolicy& ref,
                           const TaskSet& tasks) {
    FinalMetrics m;
    const double count = static_cast<double>(policies.size());
    for (std::size_t t = 0; t < policies.size(); ++t) {
        m.expected_reward += policies[t].probs().dot(tasks[t].rewards()) / count;
        m.entropy += entropy(policies[t]) / count;
        m.forward_kl += forward_kl(ref, policies[t]) / count;
        m.reverse_kl += reverse_kl(policies[t], ref) / count;
    }
    return m;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    return out;
}

Json pass_map(const std::vector<std::size_t>& k_list, const std::vector<double>& values) {
    Json out = Json::object();
    for (std::size_t j = 0; j < k_list.size() && j < values.size(); ++j) out[std::to_string(k_list[j])] = values[j];
    return out;
}

}  // namespace

ExperimentConfig parse_config(const Json& json) {
    ExperimentConfig config;
    Section root(json, "config");
    root.get("seed", config.seed);
    root.get("out_dir", config.out_dir);

    if (const Json* space = root.raw("space")) {
        Section s(*space, "space");
        s.get("vocab_size", config.vocab_size);
        s.get("max_len", config.max_len);
        s.finish();
        config.space_given = true;
    }
    if (const Json* task = root.raw("task")) parse_task(*task, config.task);
    if (const Json* ref = root.raw("reference")) parse_reference(*ref, config.reference);

    if (const Json* objective = root.raw("objective")) {
        Section s(*objective, "objective");
        std::string direction = to_string(config.objective.direction);
        s.get("kl_direction", direction);
        s.get("alpha", config.objective.alpha);
        s.get("beta", config.objective.beta);
        s.finish();
        try {
            config.objective.direction = parse_kl_direction(direction);
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("objective: ") + e.what());
        }
    }
    config.objective.reweight = ReweightSpec{};
    if (const Json* reweight = root.raw("reweight")) config.objective.reweight = parse_reweight(*reweight, "reweight");

    if (const Json* train = root.raw("train")) {
        Section s(*train, "train");
        s.get("group_size", config.train.group_size);
        s.get("clip_eps", config.train.clip_eps);
        s.get("inner_epochs", config.train.inner_epochs);
        s.get("batches_per_refresh", config.train.batches_per_refresh);
        s.get("refresh_rounds", config.train.refresh_rounds);
        s.get("learning_rate", config.train.learning_rate);
        s.get("batch_size", config.train.batch_size);
        s.get("adv_std_floor", config.train.adv_std_floor);
        s.get("init_floor", config.train.init_floor);
        s.finish();
    }

    if (const Json* eval = root.raw("eval")) {
        Section s(*eval, "eval");
        s.get("n", config.eval.n);
        s.get("k_list", config.eval.k_list);
        s.get("threshold", config.eval.threshold);
        s.get("hard_n", config.eval.hard_n);
        s.get("policy_file", config.eval.policy_file);
        s.finish();
    }

    if (const Json* verify = root.raw("verify")) {
        Section s(*verify, "verify");
        auto& v = config.verify;
        s.get("instances", v.instances);
        s.get("prop1_outcomes", v.prop1_outcomes);
        s.get("prop1_zero_outcomes", v.prop1_zero_outcomes);
        s.get("prop1_alpha", v.prop1_alpha);
        s.get("prop1_beta", v.prop1_beta);
        s.get("lemma_min_outcomes", v.lemma_min_outcomes);
        s.get("lemma_max_outcomes", v.lemma_max_outcomes);
        s.get("tol_prop1", v.tol_prop1);
        s.get("tol_lemma", v.tol_lemma);
        if (const Json* ascent = s.raw("ascent")) parse_ascent(*ascent, v.ascent);
        s.finish();
    }

    if (const Json* sweep = root.raw("sweep")) {
        Section s(*sweep, "sweep");
        s.get("alpha", config.sweep.alpha);
        s.get("beta", config.sweep.beta);
        s.get("clip_eps", config.sweep.clip_eps);
        if (const Json* reweight = s.raw("reweight")) {
            if (!reweight->is_array()) s.fail("reweight", "an array of reweight specs or nulls");
            config.sweep.has_reweight = true;
            for (std::size_t i = 0; i < reweight->size(); ++i) {
                config.sweep.reweight.push_back(parse_reweight((*reweight)[i], "sweep.reweight[" + std::to_string(i) + "]"));
            }
        }
        s.finish();
    }
    root.finish();

    // value validation, before any work starts
    try {
        build_space(config.vocab_size, config.max_len);
        config.objective.validate();
        config.train.validate();
        for (double a : config.sweep.alpha) RegularizationParams{a, 0.0}.validate();
        for (double b : config.sweep.beta) RegularizationParams{1.0, b}.validate();
        for (double e : config.sweep.clip_eps) detail::require(e > 0.0 && e < 1.0, "sweep.clip_eps must lie in (0, 1)");
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    if (config.sweep.has_reweight && config.sweep.reweight.empty()) throw ConfigError("sweep.reweight must not be empty");
    if (config.eval.n == 0 || config.eval.hard_n == 0) throw ConfigError("eval.n and eval.hard_n must be >= 1");
    if (config.eval.k_list.empty()) throw ConfigError("eval.k_list must not be empty");
    for (auto k : config.eval.k_list) {
        if (k == 0 || k > config.eval.n) throw ConfigError("eval.k_list entries must lie in [1, eval.n]");
    }
    if (config.verify.instances == 0) throw ConfigError("verify.instances must be >= 1");
    if (config.verify.lemma_min_outcomes < 2 || config.verify.lemma_max_outcomes < config.verify.lemma_min_outcomes) {
        throw ConfigError("verify lemma outcome range must satisfy 2 <= min <= max");
    }
    if (config.verify.prop1_beta <= 0.0 || config.verify.prop1_alpha <= 0.0) {
        throw ConfigError("verify.prop1_alpha and verify.prop1_beta must be positive");
    }
    if (config.verify.prop1_zero_outcomes.size() >= config.verify.prop1_outcomes) {
        throw ConfigError("verify.prop1_zero_outcomes must leave some reference support");
    }
    for (auto i : config.verify.prop1_zero_outcomes) {
        if (i >= config.verify.prop1_outcomes) throw ConfigError("verify.prop1_zero_outcomes index out of range");
    }
    if (config.verify.tol_prop1 < 0.0 || config.verify.tol_lemma < 0.0) throw ConfigError("tolerances must be >= 0");

    // the task/reference must be constructible; file tasks are checked against the space here too
    try {
        const TaskSet tasks = build_taskset(config);
        build_reference(config, tasks.space());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    try {
        return parse_config(read_json_file(path));
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

Json config_to_json(const ExperimentConfig& config) {
    Json out;
    out["seed"] = config.seed;
    out["space"] = {{"vocab_size", config.vocab_size}, {"max_len", config.max_len}};

    Json task;
    switch (config.task.kind) {
        case TaskSpec::Kind::needle: {
            task["kind"] = "needle";
            task["needles"] = config.task.needle_sets;
            task["high"] = config.task.high;
            task["low"] = config.task.low;
            break;
        }
        case TaskSpec::Kind::random: {
            task["kind"] = "random";
            task["count"] = config.task.count;
            const auto& d = config.task.distribution;
            task["distribution"] = d.kind == RewardDistribution::Kind::uniform
                                       ? Json{{"kind", "uniform"}, {"low", d.low}, {"high", d.high}}
                                       : Json{{"kind", "bernoulli"}, {"p", d.p}};
            break;
        }
        case TaskSpec::Kind::file:
            task["kind"] = "file";
            task["path"] = config.task.path;
            break;
    }
    out["task"] = task;

    Json ref;
    switch (config.reference.kind) {
        case ReferenceSpec::Kind::uniform: ref["kind"] = "uniform"; break;
        case ReferenceSpec::Kind::random: ref["kind"] = "random"; break;
        case ReferenceSpec::Kind::explicit_probs:
            ref["kind"] = "explicit";
            ref["probs"] = config.reference.probs;
            break;
    }
    ref["zero_outcomes"] = config.reference.zero_outcomes;
    out["reference"] = ref;

    out["objective"] = {{"kl_direction", to_string(config.objective.direction)},
                        {"alpha", config.objective.alpha},
                        {"beta", config.objective.beta}};
    out["reweight"] = reweight_to_json(config.objective.reweight);

    const auto& t = config.train;
    out["train"] = {{"group_size", t.group_size},
                    {"clip_eps", t.clip_eps},
                    {"inner_epochs", t.inner_epochs},
                    {"batches_per_refresh", t.batches_per_refresh},
                    {"refresh_rounds", t.refresh_rounds},
                    {"learning_rate", t.learning_rate},
                    {"batch_size", t.batch_size},
                    {"adv_std_floor", t.adv_std_floor},
                    {"init_floor", t.init_floor}};

    out["eval"] = {{"n", config.eval.n},
                   {"k_list", config.eval.k_list},
                   {"threshold", config.eval.threshold},
                   {"hard_n", config.eval.hard_n},
                   {"policy_file", config.eval.policy_file}};

    const auto& v = config.verify;
    out["verify"] = {{"instances", v.instances},
                     {"prop1_outcomes", v.prop1_outcomes},
                     {"prop1_zero_outcomes", v.prop1_zero_outcomes},
                     {"prop1_alpha", v.prop1_alpha},
                     {"prop1_beta", v.prop1_beta},
                     {"lemma_min_outcomes", v.lemma_min_outcomes},
                     {"lemma_max_outcomes", v.lemma_max_outcomes},
                     {"tol_prop1", v.tol_prop1},
                     {"tol_lemma", v.tol_lemma},
                     {"ascent",
                      {{"learning_rate", v.ascent.learning_rate},
                       {"max_steps", v.ascent.max_steps},
                       {"line_search", v.ascent.line_search},
                       {"fisher", v.ascent.fisher},
                       {"growth", v.ascent.growth},
                       {"grad_tolerance", v.ascent.grad_tolerance},
                       {"stall_window", v.ascent.stall_window},
                       {"stall_ratio", v.ascent.stall_ratio}}}};

    Json sweep;
    sweep["alpha"] = config.sweep.alpha;
    sweep["beta"] = config.sweep.beta;
    sweep["clip_eps"] = config.sweep.clip_eps;
    if (config.sweep.has_reweight) {
        Json reweights = Json::array();
        for (const auto& r : config.sweep.reweight) reweights.push_back(reweight_to_json(r));
        sweep["reweight"] = reweights;
    }
    out["sweep"] = sweep;
    return out;
}

TaskSet build_taskset(const ExperimentConfig& config) {
    if (config.task.kind == TaskSpec::Kind::file) {
        TaskSet tasks = load_taskset(config.task.path);
        if (config.space_given && !(tasks.space() == SequenceSpace(config.vocab_size, config.max_len))) {
            throw ConfigError("task file space does not match the configured space");
        }
        return tasks;
    }
    const SequenceSpace space(config.vocab_size, config.max_len);
    std::vector<Task> tasks;
    if (config.task.kind == TaskSpec::Kind::needle) {
        for (std::size_t i = 0; i < config.task.needle_sets.size(); ++i) {
            const std::string id = config.task.needle_sets.size() == 1 ? "needle" : "needle-" + std::to_string(i);
            tasks.push_back(make_needle_task(space, config.task.needle_sets[i], config.task.high, config.task.low, id));
        }
    } else {
        if (config.task.count == 0) throw ConfigError("task.count must be >= 1");
        const std::uint64_t base = split_seed(config.seed, streams::tasks);
        for (std::size_t i = 0; i < config.task.count; ++i) {
            tasks.push_back(make_random_task(space, split_seed(base, i), config.task.distribution,
                                             "task-" + std::to_string(i)));
        }
    }
    return TaskSet(space, std::move(tasks));
}

CategoricalPolicy build_reference(const ExperimentConfig& config, const SequenceSpace& space) {
    const auto n = static_cast<Eigen::Index>(space.outcome_count());
    Eigen::VectorXd mass;
    switch (config.reference.kind) {
        case ReferenceSpec::Kind::uniform:
            mass = Eigen::VectorXd::Ones(n);
            break;
        case ReferenceSpec::Kind::random: {
            Rng rng = make_rng(config.seed, streams::reference);
            mass.resize(n);
            for (auto& m : mass) m = 1.0 - uniform01(rng);  // in (0, 1]
            break;
        }
        case ReferenceSpec::Kind::explicit_probs:
            if (static_cast<Eigen::Index>(config.reference.probs.size()) != n) {
                throw ConfigError("reference.probs length does not match the outcome count");
            }
            mass = Eigen::Map<const Eigen::VectorXd>(config.reference.probs.data(), n);
            if (mass.minCoeff() < 0.0) throw ConfigError("reference.probs must be non-negative");
            break;
    }
    for (auto i : config.reference.zero_outcomes) {
        if (static_cast<Eigen::Index>(i) >= n) throw ConfigError("reference.zero_outcomes index out of range");
        mass(static_cast<Eigen::Index>(i)) = 0.0;
    }
    const double total = mass.sum();
    if (!(total > 0.0)) throw ConfigError("reference has no mass left");
    if (config.reference.kind == ReferenceSpec::Kind::explicit_probs && config.reference.zero_outcomes.empty() &&
        std::abs(total - 1.0) <= kSimplexTolerance) {
        return CategoricalPolicy(mass);
    }
    return CategoricalPolicy(mass / total);
}

TrainConfig resolved_train_config(const ExperimentConfig& config) {
    TrainConfig train = config.train;
    train.seed = split_seed(config.seed, streams::train);
    return train;
}

VerifyReport run_verify_optima(const ExperimentConfig& config) {
    const auto& v = config.verify;
    const std::uint64_t base = split_seed(config.seed, streams::verify);
    Json cases = Json::array();
    struct Summary {
        double max_linf = 0.0;
        std::size_t passed = 0;
        std::size_t total = 0;
        double tolerance = 0.0;
    };
    std::map<std::string, Summary> summaries;

    auto add_case = [&](const std::string& name, std::size_t instance, Index outcomes, double alpha, double beta,
                        const AscentResult& ascent, const CategoricalPolicy& oracle, double tolerance) {
        const double linf = (ascent.policy.probs() - oracle.probs()).cwiseAbs().maxCoeff();
        const bool pass = linf <= tolerance && !ascent.trace.aborted();
        cases.push_back({{"case", name},
                         {"instance", instance},
                         {"outcomes", outcomes},
                         {"alpha", alpha},
                         {"beta", beta},
                         {"linf", linf},
                         {"tolerance", tolerance},
                         {"steps", ascent.steps},
                         {"converged", ascent.converged},
                         {"pass", pass}});
        auto& s = summaries[name];
        s.max_linf = std::max(s.max_linf, linf);
        s.passed += pass ? 1 : 0;
        s.total += 1;
        s.tolerance = tolerance;
    };

    // Forward KL + entropy on a 16-outcome space with a hole in the reference support.
    const std::set<Index> zero(v.prop1_zero_outcomes.begin(), v.prop1_zero_outcomes.end());
    const SequenceSpace prop1_space(static_cast<std::uint32_t>(v.prop1_outcomes), 1);
    for (std::size_t i = 0; i < v.instances; ++i) {
        Rng rng(split_seed(split_seed(base, 1), i));
        Eigen::VectorXd mass(static_cast<Eigen::Index>(v.prop1_outcomes));
        Eigen::VectorXd rewards(mass.size());
        for (Eigen::Index j = 0; j < mass.size(); ++j) {
            mass(j) = zero.count(static_cast<Index>(j)) ? 0.0 : 0.1 + uniform01(rng);
            rewards(j) = uniform01(rng);
        }
        const CategoricalPolicy ref(mass / mass.sum());
        const Task task("prop1-" + std::to_string(i), prop1_space, rewards);
        const ObjectiveSpec spec{KlDirection::forward, std::nullopt, v.prop1_alpha, v.prop1_beta};
        const auto oracle = prop1_optimum(ref, rewards, v.prop1_alpha, v.prop1_beta);
        const auto ascent = gradient_ascent(Eigen::VectorXd::Zero(mass.size()), ref, task, spec, v.ascent);
        add_case("prop1", i, v.prop1_outcomes, v.prop1_alpha, v.prop1_beta, ascent, oracle.policy, v.tol_prop1);
    }

    // Reverse KL (beta = 0) and reverse KL + entropy on random references,
    // about a tenth of the outcomes held outside the support.
    for (int which = 0; which < 2; ++which) {
        const std::string name = which == 0 ? "lemma1" : "lemma2";
        for (std::size_t i = 0; i < v.instances; ++i) {
            Rng rng(split_seed(split_seed(base, 2 + static_cast<std::uint64_t>(which)), i));
            const std::size_t span = v.lemma_max_outcomes - v.lemma_min_outcomes + 1;
            const std::size_t n = v.lemma_min_outcomes + static_cast<std::size_t>(uniform01(rng) * span) % span;
            const SequenceSpace space(static_cast<std::uint32_t>(n), 1);
            Eigen::VectorXd mass(static_cast<Eigen::Index>(n));
            Eigen::VectorXd rewards(mass.size());
            for (Eigen::Index j = 0; j < mass.size(); ++j) {
                mass(j) = 0.1 + uniform01(rng);
                rewards(j) = uniform01(rng);
            }
            for (std::size_t z = 0; z < n / 10; ++z) {
                mass(static_cast<Eigen::Index>(static_cast<std::size_t>(uniform01(rng) * n) % n)) = 0.0;
            }
            const double alpha = 0.5 + uniform01(rng);
            const double beta = which == 0 ? 0.0 : 0.25 + 0.5 * uniform01(rng);
            const CategoricalPolicy ref(mass / mass.sum());
            const Task task(name + "-" + std::to_string(i), space, rewards);
            const ObjectiveSpec spec{KlDirection::reverse, std::nullopt, alpha, beta};
            const auto oracle = which == 0 ? lemma1_optimum(ref, rewards, alpha) : lemma2_optimum(ref, rewards, alpha, beta);
            const auto ascent = gradient_ascent(Eigen::VectorXd::Zero(mass.size()), ref, task, spec, v.ascent);
            add_case(name, i, n, alpha, beta, ascent, oracle, v.tol_lemma);
        }
    }

    bool all_pass = true;
    Json summary = Json::object();
    for (const auto& [name, s] : summaries) {
        const bool pass = s.passed == s.total;
        all_pass = all_pass && pass;
        summary[name] = {{"max_linf", s.max_linf},
                         {"passed", s.passed},
                         {"total", s.total},
                         {"tolerance", s.tolerance},
                         {"pass", pass}};
    }
    Json report{{"config", config_to_json(config)}, {"cases", cases}, {"summary", summary}, {"pass", all_pass}};
    return VerifyReport{std::move(report), all_pass};
}

namespace {

std::vector<CategoricalPolicy> broadcast(const CategoricalPolicy& policy, std::size_t count) {
    return std::vector<CategoricalPolicy>(count, policy);
}

}  // namespace

TrainOutcome run_train(const ExperimentConfig& config) {
    TaskSet tasks = build_taskset(config);
    const CategoricalPolicy ref = build_reference(config, tasks.space());
    TrainResult result = rapo_train(ref, tasks, resolved_train_config(config), config.objective);
    const FinalMetrics metrics = final_metrics(result.policies, ref, tasks);

    const auto& e = config.eval;
    auto evaluations = evaluate_tasks(result.policies, tasks, e.n, e.k_list, e.threshold,
                                      split_seed(config.seed, streams::eval));
    auto hard = hard_subset(tasks, ref, e.hard_n, split_seed(config.seed, streams::hard), e.threshold);
    auto full_pass = mean_pass_at_k(evaluations, all_indices(tasks.size()));
    auto hard_pass = mean_pass_at_k(evaluations, hard);
    return TrainOutcome{std::move(tasks),    std::move(result),    metrics,
                        std::move(evaluations), std::move(hard), std::move(full_pass),
                        std::move(hard_pass)};
}

EvalOutcome run_eval(const ExperimentConfig& config) {
    const TaskSet tasks = build_taskset(config);
    const CategoricalPolicy ref = build_reference(config, tasks.space());
    std::vector<CategoricalPolicy> policies;
    if (config.eval.policy_file.empty()) {
        policies = broadcast(ref, tasks.size());
    } else {
        const Json doc = read_json_file(config.eval.policy_file);
        if (!doc.contains("policies") || !doc["policies"].is_array()) {
            throw ConfigError("policy file must contain a 'policies' array");
        }
        for (const auto& entry : doc["policies"]) policies.push_back(policy_from_json(entry.at("probs")));
        if (policies.size() != tasks.size()) throw ConfigError("policy file does not match the task count");
    }
    const auto& e = config.eval;
    EvalOutcome out;
    out.evaluations = evaluate_tasks(policies, tasks, e.n, e.k_list, e.threshold, split_seed(config.seed, streams::eval));
    out.hard = hard_subset(tasks, ref, e.hard_n, split_seed(config.seed, streams::hard), e.threshold);
    out.full_pass = mean_pass_at_k(out.evaluations, all_indices(tasks.size()));
    out.hard_pass = mean_pass_at_k(out.evaluations, out.hard);
    return out;
}

std::string reweight_label(const std::optional<ReweightSpec>& spec) {
    if (!spec) return "raw";
    if (spec->kind == ReweightSpec::Kind::inverse_proportional) {
        return "inverse_proportional:" + format_double(spec->tau_max);
    }
    return to_string(spec->kind);
}

std::vector<SweepCell> sweep_cells(const ExperimentConfig& config) {
    const auto& s = config.sweep;
    const std::vector<double> alphas = s.alpha.empty() ? std::vector<double>{config.objective.alpha} : s.alpha;
    const std::vector<double> betas = s.beta.empty() ? std::vector<double>{config.objective.beta} : s.beta;
    const std::vector<double> clips = s.clip_eps.empty() ? std::vector<double>{config.train.clip_eps} : s.clip_eps;
    const std::vector<std::optional<ReweightSpec>> reweights =
        s.has_reweight ? s.reweight : std::vector<std::optional<ReweightSpec>>{config.objective.reweight};
    std::vector<SweepCell> cells;
    for (double a : alphas)
        for (double b : betas)
            for (const auto& r : reweights)
                for (double c : clips) cells.push_back({a, b, r, c});
    return cells;
}

SweepOutcome run_sweep(const ExperimentConfig& config, std::size_t jobs) {
    const auto cells = sweep_cells(config);
    std::vector<std::string> rows(cells.size());
    std::vector<char> failed(cells.size(), 0);

    auto run_cell = [&](std::size_t index) {
        const auto& cell = cells[index];
        ExperimentConfig cell_config = config;
        cell_config.objective.alpha = cell.alpha;
        cell_config.objective.beta = cell.beta;
        cell_config.objective.reweight = cell.reweight;
        cell_config.train.clip_eps = cell.clip_eps;

        std::ostringstream row;
        row << index << ',' << format_double(cell.alpha) << ',' << format_double(cell.beta) << ','
            << reweight_label(cell.reweight) << ',' << format_double(cell.clip_eps) << ',';
        try {
            const TrainOutcome outcome = run_train(cell_config);
            const auto& m = outcome.final_metrics;
            row << (outcome.result.trace.aborted() ? "aborted: " + csv_field(*outcome.result.trace.abort_reason) : "ok");
            row << ',' << format_double(m.expected_reward) << ',' << format_double(m.entropy) << ','
                << format_double(m.forward_kl) << ',' << format_double(m.reverse_kl);
            for (double p : outcome.full_pass) row << ',' << format_double(p);
            for (std::size_t j = 0; j < config.eval.k_list.size(); ++j) {
                row << ',' << (outcome.hard.empty() ? std::string("nan") : format_double(outcome.hard_pass[j]));
            }
            failed[index] = outcome.result.trace.aborted() ? 1 : 0;
        } catch (const std::exception& e) {
            row << "error: " << csv_field(e.what());
            for (std::size_t j = 0; j < 4 + 2 * config.eval.k_list.size(); ++j) row << ",nan";
            failed[index] = 1;
        }
        row << '\n';
        rows[index] = row.str();
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, cells.size()));
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
            });
        }
    }

    std::ostringstream out;
    out << csv_preamble(config_to_json(config));
    out << "cell,alpha,beta,reweight,clip_eps,status,expected_reward,entropy,forward_kl,reverse_kl";
    for (auto k : config.eval.k_list) out << ",pass@" << k << "_full";
    for (auto k : config.eval.k_list) out << ",pass@" << k << "_hard";
    out << '\n';
    SweepOutcome outcome;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out << rows[i];
        outcome.failures += static_cast<std::size_t>(failed[i]);
    }
    outcome.csv = out.str();
    return outcome;
}

std::string trace_csv(const ExperimentConfig& config, const TrainTrace& trace) {
    std::ostringstream out;
    out << csv_preamble(config_to_json(config));
    write_trace_csv(out, trace);
    return out.str();
}

std::string eval_csv(const ExperimentConfig& config, const std::vector<TaskEvaluation>& evaluations) {
    std::ostringstream out;
    out << csv_preamble(config_to_json(config));
    write_eval_csv(out, evaluations);
    return out.str();
}

Json eval_summary_json(const ExperimentConfig& config, const TaskSet& tasks, const std::vector<std::size_t>& hard,
                       const std::vector<double>& full_pass, const std::vector<double>& hard_pass) {
    Json hard_ids = Json::array();
    for (auto i : hard) hard_ids.push_back(tasks[i].id());
    Json hard_section{{"tasks", hard.size()}, {"task_ids", hard_ids}};
    hard_section["pass_at_k"] = hard.empty() ? Json::object() : pass_map(config.eval.k_list, hard_pass);
    return Json{{"config", config_to_json(config)},
                {"seed", config.seed},
                {"full", {{"tasks", tasks.size()}, {"pass_at_k", pass_map(config.eval.k_list, full_pass)}}},
                {"hard", hard_section}};
}

Json policies_json(const ExperimentConfig& config, const TaskSet& tasks, const std::vector<CategoricalPolicy>& policies) {
    Json list = Json::array();
    for (std::size_t t = 0; t < policies.size(); ++t) {
        list.push_back({{"task_id", tasks[t].id()}, {"probs", policy_to_json(policies[t])}});
    }
    return Json{{"config", config_to_json(config)}, {"seed", config.seed}, {"policies", list}};
}

void write_train_outputs(const ExperimentConfig& config, const TrainOutcome& outcome, const std::filesystem::path& dir) {
    write_text_file(dir / "trace.csv", trace_csv(config, outcome.result.trace));
    write_text_file(dir / "policy.json", policies_json(config, outcome.tasks, outcome.result.policies).dump(2) + "\n");
    write_text_file(dir / "eval.csv", eval_csv(config, outcome.evaluations));
    Json summary = eval_summary_json(config, outcome.tasks, outcome.hard, outcome.full_pass, outcome.hard_pass);
    const auto& m = outcome.final_metrics;
    summary["final"] = {{"expected_reward", number_or_string(m.expected_reward)},
                        {"entropy", number_or_string(m.entropy)},
                        {"forward_kl", number_or_string(m.forward_kl)},
                        {"reverse_kl", number_or_string(m.reverse_kl)}};
    summary["aborted"] = outcome.result.trace.aborted();
    if (outcome.result.trace.aborted()) summary["abort_reason"] = *outcome.result.trace.abort_reason;
    write_text_file(dir / "eval_summary.json", summary.dump(2) + "\n");
}

}  // namespace rapo
