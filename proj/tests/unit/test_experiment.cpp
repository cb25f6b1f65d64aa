#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qbm/error.hpp"
#include "qbm/experiment.hpp"

using namespace qbm;

namespace {

ExperimentConfig tiny() {
    ExperimentConfig c;
    c.p = 2;
    c.q = 2;
    c.n_hidden = 2;
    c.train.batch_size = 4;
    c.train.budget = 3;
    c.replicas = 16;
    c.slices = 4;
    c.sweeps = 2;
    c.coreset_size = 4;
    c.seeds = {0, 1};
    return c;
}

} // namespace

TEST_CASE("default config mirrors the reference protocol") {
    const ExperimentConfig c;
    CHECK(c.p == 6);
    CHECK(c.n_hidden == 8);
    CHECK(c.gamma == 2.0);
    CHECK(c.train.batch_size == 32);
    CHECK(c.train.budget == 40);
    CHECK(c.replicas == 128);
    CHECK(c.slices == 10);
    CHECK(c.anneal_steps == 5);
    CHECK(c.coreset_size == 128);
    CHECK(c.arms.size() == 3);
    CHECK(c.seeds.size() == 10);
}

TEST_CASE("config JSON round trip and hashing") {
    auto c = tiny();
    const auto back = config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.hash() == c.hash());
    auto threads = c;
    threads.threads = 8;
    CHECK(threads.hash() == c.hash());
    auto lr = c;
    lr.train.learning_rate *= 2;
    CHECK(lr.hash() != c.hash());

    const auto partial = config_from_json(nlohmann::json{{"train", {{"budget", 7}}}});
    CHECK(partial.train.budget == 7);
    CHECK(partial.replicas == 128);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"bogus", 1}}), Error);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"train", {{"budget", "x"}}}}), Error);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"arms", {"full", "nope"}}}), Error);
    auto bad = c;
    bad.train.budget = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("one update means one sampling and one score") {
    auto c = tiny();
    c.train.budget = 1;
    const ScorerNet net(4, 3);
    const auto rec = train_qbm(c, WeightedDataset::unit_weights(generate_bxs_multiset(2, 2)), net, 0);
    CHECK(rec.scores.size() == 1);
    CHECK(rec.wall_seconds.size() == 1);
    CHECK(rec.scores[0] == 0.5);
    CHECK(rec.final_state.adam.t == 1);
}

TEST_CASE("experiment CSV is reproducible and thread independent") {
    auto c = tiny();
    const auto net = ScorerNet::random(4, 3, 2);
    auto csv = [&](unsigned threads) {
        c.threads = threads;
        std::ostringstream out;
        write_score_csv(out, run_experiment(c, net).curves);
        return out.str();
    };
    const auto a = csv(1);
    CHECK(a.rfind("update,arm,mean_score,std_score,n_seeds\n", 0) == 0);
    CHECK(std::count(a.begin(), a.end(), '\n') == 1 + 3 * 3);
    CHECK(csv(1) == a);
    CHECK(csv(4) == a);
}

TEST_CASE("single seed has zero spread") {
    auto c = tiny();
    c.seeds = {5};
    c.arms = {Arm::uniform};
    const auto result = run_experiment(c, ScorerNet::random(4, 3, 2));
    REQUIRE(result.curves.size() == 1);
    for (double s : result.curves[0].stddev) {
        CHECK(s == 0.0);
    }
    CHECK(result.curves[0].n_seeds == 1);
}

TEST_CASE("failed runs are recorded and aggregation needs a success") {
    auto c = tiny();
    c.coreset_size = 2; // smaller than the batch size
    c.arms = {Arm::uniform};
    CHECK_THROWS_AS(run_experiment(c, ScorerNet(4, 3)), Error);
}

TEST_CASE("experiment artifacts") {
    auto c = tiny();
    c.seeds = {3};
    const auto dir = std::filesystem::temp_directory_path() / "qbm_experiment_test";
    std::filesystem::remove_all(dir);
    const auto result = run_experiment(c, ScorerNet::random(4, 3, 2), dir);
    CHECK(std::filesystem::exists(dir / "scores.csv"));
    CHECK(std::filesystem::exists(dir / "config.json"));
    std::ifstream runs(dir / "runs.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(runs, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j["config_hash"] == c.hash());
        CHECK(j["scores"].size() == 3);
        CHECK(std::filesystem::exists(dir / j["checkpoint"].get<std::string>()));
        ++n;
    }
    CHECK(n == 3);
    std::filesystem::remove_all(dir);
}

TEST_CASE("oracle battery passes") {
    for (const auto& check : verify_oracles(0)) {
        INFO(check.name << ": " << check.detail);
        CHECK(check.passed);
    }
}
