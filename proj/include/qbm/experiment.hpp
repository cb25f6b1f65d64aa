#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qbm/bxs.hpp"
#include "qbm/model.hpp"
#include "qbm/pimc.hpp"
#include "qbm/scorer.hpp"

namespace qbm {

enum class Arm { full, uniform, minimax };
std::string to_string(Arm arm);
Arm arm_from_string(const std::string& name);

enum class CoresetDistance { inception, euclidean };

struct ScorerSpec {
    /// Existing checkpoint; when empty a scorer is trained.
    std::string checkpoint;
    std::size_t labeled_set_size = kDefaultLabeledSetSize;
    std::uint64_t seed = 0;
    ScorerTrainOptions options;
};

struct ExperimentConfig {
    int p = 6;
    int q = 6;
    int n_hidden = 8;
    double gamma = 2.0;
    TrainConfig train{0.5, 32, 40, false};
    std::size_t replicas = 128;
    int slices = 10;
    int anneal_steps = 5;
    double beta_final = 1.0;
    int sweeps = 10;
    InitialState initial_state = InitialState::constant_worldlines;
    bool worldline_moves = true;
    std::vector<Arm> arms{Arm::full, Arm::uniform, Arm::minimax};
    std::size_t coreset_size = 128;
    CoresetDistance distance = CoresetDistance::inception;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    ScorerSpec scorer;
    /// Worker threads; never part of the config hash.
    unsigned threads = 1;

    void validate() const;
    SamplerConfig sampler(std::uint64_t seed) const;
    /// FNV-1a of the canonical JSON without `threads`.
    std::string hash() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);

struct RunRecord {
    std::string config_hash;
    Arm arm = Arm::full;
    std::uint64_t seed = 0;
    std::vector<double> scores;
    std::vector<double> wall_seconds;
    std::string checkpoint_path;
    std::optional<std::string> error;
    QbmCheckpoint final_state;
};

nlohmann::json to_json(const RunRecord& record);

/// Budgeted training: one Gibbs sampling per update, scored on the same
/// samples before the parameters move.
RunRecord train_qbm(const ExperimentConfig& config, const WeightedDataset& source, const ScorerNet& scorer,
                    std::uint64_t seed, Arm arm = Arm::full, unsigned sampler_threads = 1);

struct ScoreCurve {
    Arm arm = Arm::full;
    std::vector<double> mean;
    std::vector<double> stddev; // population, across seeds
    std::size_t n_seeds = 0;
};

/// Plain mean and standard deviation over the successful runs of each arm,
/// in config arm order.
std::vector<ScoreCurve> aggregate(const ExperimentConfig& config, const std::vector<RunRecord>& records);

/// Header `update,arm,mean_score,std_score,n_seeds`.
void write_score_csv(std::ostream& out, const std::vector<ScoreCurve>& curves);

/// Data source for one (arm, seed) job. Uniform coresets are redrawn per
/// seed; the minimax coreset depends only on the data and scorer.
WeightedDataset arm_source(const ExperimentConfig& config, const Dataset& dataset, const ScorerNet& scorer, Arm arm,
                           std::uint64_t seed);

/// Loads the configured scorer checkpoint or trains one.
ScorerNet obtain_scorer(const ExperimentConfig& config, ScorerReport* report = nullptr);

struct ExperimentResult {
    std::vector<RunRecord> runs;
    std::vector<ScoreCurve> curves;
};

/// Runs every (arm, seed) job. When `out` is set, writes config.json,
/// runs.jsonl, scores.csv and per-run checkpoints beneath it.
ExperimentResult run_experiment(const ExperimentConfig& config, const ScorerNet& scorer,
                                const std::optional<std::filesystem::path>& out = std::nullopt);

struct OracleCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Implementation-versus-dense-oracle battery.
std::vector<OracleCheck> verify_oracles(std::uint64_t seed);

} // namespace qbm
