#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "qbm/bxs.hpp"
#include "qbm/rng.hpp"

namespace qbm {

/// Restricted QBM: transverse field shared by all units, unit biases, and a
/// visible × hidden coupling matrix. No intra-layer couplings exist.
struct QbmParams {
    double gamma = 2.0;
    Eigen::VectorXd visible_bias;
    Eigen::VectorXd hidden_bias;
    Eigen::MatrixXd weights; // n_visible × n_hidden

    QbmParams() = default;
    QbmParams(double gamma, Eigen::VectorXd visible_bias, Eigen::VectorXd hidden_bias, Eigen::MatrixXd weights);
    static QbmParams zeros(int n_visible, int n_hidden, double gamma);

    int n_visible() const noexcept { return static_cast<int>(visible_bias.size()); }
    int n_hidden() const noexcept { return static_cast<int>(hidden_bias.size()); }
    int n_units() const noexcept { return n_visible() + n_hidden(); }

    bool all_finite() const;
    std::size_t flat_size() const noexcept;
};

/// ⟨σ^z_a⟩ for every unit (visible first) and ⟨σ^z_a σ^z_b⟩ for every
/// visible-hidden edge.
struct PhaseStats {
    Eigen::VectorXd units;
    Eigen::MatrixXd edges;

    bool all_finite() const;
};

struct AdamHyper {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Optimizer state over the flattened (visible_bias, hidden_bias, weights
/// row-major) parameter vector. With plain_sgd set the step is lr · direction.
struct AdamState {
    AdamHyper hyper;
    bool plain_sgd = false;
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    std::int64_t t = 0;

    static AdamState create(std::size_t n_params, AdamHyper hyper = {}, bool plain_sgd = false);
};

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 32;
    std::size_t budget = 40;
    bool plain_sgd = false;

    void validate() const;
};

/// Weights ~ N(0, 0.01²); visible biases are the log-odds of each bit being
/// on in the source (weighted), with the frequency clamped to
/// [1e-3, 1 - 1e-3]; hidden biases start at zero.
QbmParams init_params(const WeightedDataset& source, int n_hidden, double gamma, std::uint64_t seed);
QbmParams init_params(const Dataset& source, int n_hidden, double gamma, std::uint64_t seed);

inline constexpr double kInitWeightStddev = 0.01;
inline constexpr double kBitFrequencyClamp = 1e-3;

Eigen::VectorXd effective_bias(const QbmParams& params, std::span<const std::int8_t> visible);

/// Exact ⟨σ^z⟩ of a single qubit with H = -Γσ^x - b σ^z at β = 1:
/// (b / D) tanh(D), D = sqrt(Γ² + b²).
double clamped_expectation(double gamma, double b_eff);

Eigen::VectorXd positive_phase_hidden(const QbmParams& params, std::span<const std::int8_t> visible);

/// Weighted clamped statistics over a batch of visible configurations.
PhaseStats clamped_phase_stats(const QbmParams& params, std::span<const SpinVector> batch,
                               std::span<const double> weights);
PhaseStats clamped_phase_stats(const QbmParams& params, std::span<const SpinVector> batch);

/// Flattened ascent direction on the log-likelihood: positive − negative.
Eigen::VectorXd likelihood_gradient(const PhaseStats& positive, const PhaseStats& negative);

Eigen::VectorXd flatten(const QbmParams& params);
QbmParams unflatten(const Eigen::VectorXd& flat, double gamma, int n_visible, int n_hidden);

/// One optimizer step toward higher likelihood; gamma is never updated.
std::pair<QbmParams, AdamState> gradient_step(const QbmParams& params, const AdamState& adam,
                                              const PhaseStats& positive, const PhaseStats& negative);

struct QbmCheckpoint {
    QbmParams params;
    AdamState adam;
    std::string rng_state;
    std::int64_t update_index = 0;
};

nlohmann::json to_json(const QbmCheckpoint& checkpoint);
QbmCheckpoint checkpoint_from_json(const nlohmann::json& j);

} // namespace qbm
