#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rapo/io.hpp"

using namespace rapo;

TEST_CASE("format_double round trips") {
    Rng rng(60);
    for (int i = 0; i < 1000; ++i) {
        const double x = (uniform01(rng) - 0.5) * std::pow(10.0, static_cast<int>(uniform01(rng) * 40) - 20);
        CHECK(std::stod(format_double(x)) == x);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(INFINITY) == "inf");
    CHECK(format_double(-INFINITY) == "-inf");
    CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("policy json round trip preserves every bit") {
    Rng rng(61);
    Eigen::VectorXd p(9);
    for (Eigen::Index i = 0; i < 9; ++i) p(i) = uniform01(rng);
    p(3) = 0.0;
    const CategoricalPolicy policy(p / p.sum());
    const Json json = Json::parse(policy_to_json(policy).dump());
    CHECK(policy_from_json(json).probs() == policy.probs());
    CHECK_THROWS_AS(policy_from_json(Json::parse(R"({"a": 1})")), InvalidArgument);
    CHECK_THROWS_AS(policy_from_json(Json::parse(R"([0.5, "x"])")), InvalidArgument);
    CHECK_THROWS_AS(policy_from_json(Json::parse(R"([0.5, 0.6])")), InvalidArgument);
}

TEST_CASE("task set json") {
    const Json json = Json::parse(R"({"vocab_size": 2, "max_len": 2,
        "tasks": [{"id": "q1", "rewards": [0, 1, 0, 0, 1, 0]}, {"id": "q2", "rewards": [1, 0, 0, 0, 0, 0]}]})");
    const TaskSet tasks = taskset_from_json(json);
    CHECK(tasks.size() == 2);
    CHECK(tasks[0].id() == "q1");
    CHECK(tasks[1].rewards()(0) == 1.0);
    CHECK(taskset_from_json(taskset_to_json(tasks)).tasks()[0].rewards() == tasks[0].rewards());

    CHECK_THROWS_AS(taskset_from_json(Json::parse(R"({"vocab_size": 2, "max_len": 1, "tasks": [], "x": 1})")),
                    InvalidArgument);
    CHECK_THROWS_AS(taskset_from_json(Json::parse(R"({"vocab_size": 2, "max_len": 1, "tasks": []})")), InvalidArgument);
    CHECK_THROWS_AS(
        taskset_from_json(Json::parse(R"({"vocab_size": 2, "max_len": 1, "tasks": [{"id": "a", "rewards": [1]}]})")),
        InvalidArgument);
}

TEST_CASE("files and csv") {
    const auto dir = std::filesystem::temp_directory_path() / "rapo_io_test" / "nested";
    std::filesystem::remove_all(dir.parent_path());
    write_text_file(dir / "a.json", R"({"k": [1, 2]})");
    CHECK(read_json_file(dir / "a.json")["k"][1] == 2);
    CHECK_THROWS(read_json_file(dir / "missing.json"));
    write_text_file(dir / "bad.json", "{");
    CHECK_THROWS(read_json_file(dir / "bad.json"));

    const Json config{{"seed", 3}};
    CHECK(csv_preamble(config) == "# config={\"seed\":3}\n");

    TrainTrace trace;
    trace.records.push_back({1, 0.25, 0.5, 0.125, 1.0, 0.0, 2.0});
    std::ostringstream out;
    write_trace_csv(out, trace);
    CHECK(out.str() == "step,expected_reward,forward_kl,reverse_kl,entropy,grad_norm\n1,0.25,0.5,0.125,1,2\n");

    std::ostringstream eval;
    write_eval_csv(eval, {TaskEvaluation{"q", {{8, 2, 1, 0.25}, {8, 2, 8, 1.0}}}});
    CHECK(eval.str() == "task_id,n,c,k,pass_at_k\nq,8,2,1,0.25\nq,8,2,8,1\n");
    std::filesystem::remove_all(dir.parent_path());
}
