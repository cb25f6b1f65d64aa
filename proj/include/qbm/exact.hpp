#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qbm/model.hpp"

namespace qbm::exact {

/// Largest qubit count handled densely.
inline constexpr int kMaxQubits = 14;

/// Real symmetric 2^n × 2^n Hamiltonian in the σ^z product basis. Qubit 0 is
/// the most significant bit of the basis index; bit value 0 is σ^z = +1.
struct DenseHamiltonian {
    int n_qubits = 0;
    Eigen::MatrixXd matrix;
};

struct GibbsState {
    int n_qubits = 0;
    double beta = 1.0;
    Eigen::MatrixXd rho;
};

/// σ^z eigenvalue of `qubit` in basis state `index`.
inline int spin_of(std::uint32_t index, int qubit, int n_qubits) {
    return ((index >> (n_qubits - 1 - qubit)) & 1u) ? -1 : 1;
}

/// H = -Σ Γ_a σ^x_a - Σ b_a σ^z_a - Σ J_ab σ^z_a σ^z_b.
DenseHamiltonian build_ising(std::span<const double> gammas, std::span<const double> biases,
                             std::span<const std::pair<std::pair<int, int>, double>> couplings);

/// Visible qubits first, then hidden; couplings on visible-hidden edges only.
DenseHamiltonian build_hamiltonian(const QbmParams& params);

/// ρ = exp(-βH) / Tr via symmetric eigendecomposition, shifted by the
/// lowest eigenvalue.
GibbsState gibbs_density(const DenseHamiltonian& h, double beta = 1.0);

/// P(v) = Tr[Λ_v ρ] where the first n_visible qubits are clamped to v.
double marginal_pv(const GibbsState& state, std::span<const std::int8_t> visible);

/// P(v) for every visible configuration, indexed with visible qubit 0 as
/// the most significant bit and bit value 1 meaning σ^z = -1.
Eigen::VectorXd visible_distribution(const GibbsState& state, int n_visible);

PhaseStats exact_phase_stats(const GibbsState& state, int n_visible);

/// Convenience: exact_phase_stats(gibbs_density(build_hamiltonian(params), β)).
PhaseStats exact_model_stats(const QbmParams& params, double beta = 1.0);

/// ⟨σ^z⟩ of every hidden unit with visible spins substituted as constants,
/// from the dense hidden-only Hamiltonian at β = 1.
Eigen::VectorXd clamped_hidden_oracle(const QbmParams& params, std::span<const std::int8_t> visible);

/// Σ p log(p / q); +infinity when p has mass outside the support of q.
double kl_divergence(std::span<const double> p_data, std::span<const double> p_model);

} // namespace qbm::exact
