#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "qbm/bxs.hpp"
#include "qbm/model.hpp"

namespace qbm {

enum class Split { train, validation };

struct LabeledSet {
    std::vector<BxsImage> inputs;
    std::vector<std::uint8_t> labels; // 1 = BXS
    Split split = Split::train;

    std::size_t size() const noexcept { return inputs.size(); }
};

/// Near-miss negatives are sparse in a small set; this default reaches the
/// accuracy target for 6×6 with the default options.
inline constexpr std::size_t kDefaultLabeledSetSize = 400000;

/// Balanced BXS / non-BXS examples. Positives cycle through the distinct
/// BXS images in seeded order; negatives alternate between uniform random
/// grids and BXS images with 1-3 flipped pixels, rejecting any that are
/// still BXS. Each class is split 80/20 into train and validation.
std::pair<LabeledSet, LabeledSet> make_labeled_set(int width, int height, std::size_t size, std::uint64_t seed);

/// Feedforward classifier d → hidden → 8 → 1 with rectifier hidden layers
/// and a logistic output. The width-8 layer output is the embedding.
struct ScorerNet {
    static constexpr int kEmbeddingWidth = 8;

    Eigen::MatrixXd w1; // hidden × d
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2; // 8 × hidden
    Eigen::VectorXd b2;
    Eigen::MatrixXd w3; // 1 × 8
    Eigen::VectorXd b3;

    /// All-zero net.
    ScorerNet(int input_dim, int hidden_width);
    /// He-normal weights, zero biases.
    static ScorerNet random(int input_dim, int hidden_width, std::uint64_t seed);

    std::array<int, 4> dims() const;
    int input_dim() const { return static_cast<int>(w1.cols()); }

    std::size_t parameter_count() const;
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);

    /// Columns of `inputs` are examples.
    Eigen::RowVectorXd logits(const Eigen::MatrixXd& inputs) const;
    Eigen::MatrixXd embeddings(const Eigen::MatrixXd& inputs) const;

    void check() const;
};

struct ScorerTrainOptions {
    int hidden_width = 32;
    int epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 3e-3;
    /// Anneal the step size to zero over the epochs on a half cosine.
    bool cosine_decay = true;
    double target_accuracy = 0.99;
    int max_attempts = 4;
};

struct ScorerReport {
    std::uint64_t seed = 0;
    int attempts = 0;
    double validation_accuracy = 0.0;
    std::vector<double> epoch_losses;
};

/// Trains with mini-batch Adam on the logistic loss, retrying with derived
/// seeds until validation accuracy reaches the target.
ScorerNet train_scorer(const LabeledSet& train, const LabeledSet& validation, std::uint64_t seed,
                       const ScorerTrainOptions& options = {}, ScorerReport* report = nullptr);

/// Mean logistic loss and its gradient with respect to parameters().
double loss_and_gradient(const ScorerNet& net, const Eigen::MatrixXd& inputs, std::span<const std::uint8_t> labels,
                         Eigen::VectorXd& gradient);

Eigen::VectorXd image_features(const BxsImage& image);
Eigen::MatrixXd image_matrix(std::span<const BxsImage> images);

double classify(const ScorerNet& net, const BxsImage& image);
double accuracy(const ScorerNet& net, const LabeledSet& set);

/// Mean classifier probability over the visible part of each sample
/// (optionally weighted).
double model_score(const ScorerNet& net, std::span<const SpinVector> samples, int width, int height,
                   std::span<const double> weights = {});

Eigen::VectorXd embed(const ScorerNet& net, const BxsImage& image);

/// Euclidean distance between embeddings.
double inception_distance(const ScorerNet& net, const BxsImage& x, const BxsImage& y);

nlohmann::json to_json(const ScorerNet& net, const nlohmann::json& metadata);
ScorerNet scorer_from_json(const nlohmann::json& j);

} // namespace qbm
