#include "qbm/exact.hpp"

#include <cmath>
#include <limits>

#include "qbm/error.hpp"

namespace qbm::exact {

namespace {

void check_size(int n) {
    if (n < 1 || n > kMaxQubits) {
        throw Error(ErrorCode::too_large,
                    "dense oracle supports 1.." + std::to_string(kMaxQubits) + " qubits, got " + std::to_string(n));
    }
}

std::uint32_t dim_of(int n) { return 1u << n; }

} // namespace

DenseHamiltonian build_ising(std::span<const double> gammas, std::span<const double> biases,
                             std::span<const std::pair<std::pair<int, int>, double>> couplings) {
    const int n = static_cast<int>(biases.size());
    check_size(n);
    if (gammas.size() != biases.size()) {
        throw Error(ErrorCode::dimension_mismatch, "one transverse field per qubit required");
    }
    const std::uint32_t dim = dim_of(n);
    DenseHamiltonian h{n, Eigen::MatrixXd::Zero(dim, dim)};
    for (std::uint32_t s = 0; s < dim; ++s) {
        double diag = 0.0;
        for (int a = 0; a < n; ++a) {
            diag -= biases[static_cast<std::size_t>(a)] * spin_of(s, a, n);
        }
        for (const auto& [edge, j] : couplings) {
            diag -= j * spin_of(s, edge.first, n) * spin_of(s, edge.second, n);
        }
        h.matrix(s, s) = diag;
        for (int a = 0; a < n; ++a) {
            const std::uint32_t flipped = s ^ (1u << (n - 1 - a));
            h.matrix(s, flipped) -= gammas[static_cast<std::size_t>(a)];
        }
    }
    return h;
}

DenseHamiltonian build_hamiltonian(const QbmParams& params) {
    const int nv = params.n_visible();
    const int nh = params.n_hidden();
    check_size(nv + nh);
    std::vector<double> gammas(static_cast<std::size_t>(nv + nh), params.gamma);
    std::vector<double> biases;
    biases.reserve(gammas.size());
    for (int a = 0; a < nv; ++a) {
        biases.push_back(params.visible_bias[a]);
    }
    for (int j = 0; j < nh; ++j) {
        biases.push_back(params.hidden_bias[j]);
    }
    std::vector<std::pair<std::pair<int, int>, double>> couplings;
    for (int a = 0; a < nv; ++a) {
        for (int j = 0; j < nh; ++j) {
            couplings.push_back({{a, nv + j}, params.weights(a, j)});
        }
    }
    return build_ising(gammas, biases, couplings);
}

GibbsState gibbs_density(const DenseHamiltonian& h, double beta) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw Error(ErrorCode::invalid_argument, "beta must be finite and non-negative");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h.matrix);
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorCode::numeric, "eigendecomposition failed");
    }
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double lowest = lambda.minCoeff();
    Eigen::VectorXd boltz = (-beta * (lambda.array() - lowest)).exp().matrix();
    boltz /= boltz.sum();
    const Eigen::MatrixXd& vecs = eig.eigenvectors();
    GibbsState g{h.n_qubits, beta, vecs * boltz.asDiagonal() * vecs.transpose()};
    g.rho = 0.5 * (g.rho + g.rho.transpose());
    return g;
}

double marginal_pv(const GibbsState& state, std::span<const std::int8_t> visible) {
    const int n = state.n_qubits;
    const int nv = static_cast<int>(visible.size());
    if (nv > n) {
        throw Error(ErrorCode::dimension_mismatch, "visible configuration longer than the system");
    }
    std::uint32_t prefix = 0;
    for (int a = 0; a < nv; ++a) {
        prefix = (prefix << 1) | (visible[static_cast<std::size_t>(a)] < 0 ? 1u : 0u);
    }
    const int nh = n - nv;
    double p = 0.0;
    for (std::uint32_t h = 0; h < dim_of(nh); ++h) {
        const std::uint32_t s = (prefix << nh) | h;
        p += state.rho(s, s);
    }
    return p;
}

Eigen::VectorXd visible_distribution(const GibbsState& state, int n_visible) {
    const int n = state.n_qubits;
    if (n_visible < 0 || n_visible > n) {
        throw Error(ErrorCode::dimension_mismatch, "n_visible out of range");
    }
    const int nh = n - n_visible;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(dim_of(n_visible));
    for (std::uint32_t s = 0; s < dim_of(n); ++s) {
        p[s >> nh] += state.rho(s, s);
    }
    return p;
}

PhaseStats exact_phase_stats(const GibbsState& state, int n_visible) {
    const int n = state.n_qubits;
    const int nh = n - n_visible;
    PhaseStats st{Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n_visible, nh)};
    Eigen::VectorXd z(n);
    for (std::uint32_t s = 0; s < dim_of(n); ++s) {
        const double p = state.rho(s, s);
        for (int a = 0; a < n; ++a) {
            z[a] = spin_of(s, a, n);
        }
        st.units += p * z;
        st.edges.noalias() += p * z.head(n_visible) * z.tail(nh).transpose();
    }
    return st;
}

PhaseStats exact_model_stats(const QbmParams& params, double beta) {
    return exact_phase_stats(gibbs_density(build_hamiltonian(params), beta), params.n_visible());
}

Eigen::VectorXd clamped_hidden_oracle(const QbmParams& params, std::span<const std::int8_t> visible) {
    const Eigen::VectorXd b_eff = effective_bias(params, visible);
    const int nh = params.n_hidden();
    check_size(nh);
    std::vector<double> gammas(static_cast<std::size_t>(nh), params.gamma);
    std::vector<double> biases(b_eff.data(), b_eff.data() + nh);
    const auto state = gibbs_density(build_ising(gammas, biases, {}), 1.0);
    return exact_phase_stats(state, 0).units;
}

double kl_divergence(std::span<const double> p_data, std::span<const double> p_model) {
    if (p_data.size() != p_model.size()) {
        throw Error(ErrorCode::dimension_mismatch, "distributions must have the same support size");
    }
    double sp = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < p_data.size(); ++i) {
        if (p_data[i] < 0.0 || p_model[i] < 0.0) {
            throw Error(ErrorCode::unnormalized, "probabilities must be non-negative");
        }
        sp += p_data[i];
        sq += p_model[i];
    }
    if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) {
        throw Error(ErrorCode::unnormalized, "distributions must sum to 1 within 1e-9");
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < p_data.size(); ++i) {
        if (p_data[i] == 0.0) {
            continue;
        }
        if (p_model[i] == 0.0) {
            return std::numeric_limits<double>::infinity();
        }
        kl += p_data[i] * std::log(p_data[i] / p_model[i]);
    }
    return std::max(kl, 0.0);
}

} // namespace qbm::exact
