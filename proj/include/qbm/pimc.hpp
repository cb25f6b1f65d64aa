#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qbm/bxs.hpp"
#include "qbm/model.hpp"
#include "qbm/rng.hpp"

namespace qbm {

/// One path-integral configuration: n_units spins on each of M periodic
/// imaginary-time slices, stored slice-major.
class Replica {
public:
    Replica() = default;
    Replica(int n_units, int slices);

    int n_units() const noexcept { return n_units_; }
    int slices() const noexcept { return slices_; }

    std::int8_t at(int unit, int slice) const { return spins_[index(unit, slice)]; }
    void set(int unit, int slice, std::int8_t s) { spins_[index(unit, slice)] = s; }
    void flip(int unit, int slice) { spins_[index(unit, slice)] = static_cast<std::int8_t>(-spins_[index(unit, slice)]); }

    std::span<const std::int8_t> slice(int m) const {
        return {spins_.data() + static_cast<std::size_t>(m) * static_cast<std::size_t>(n_units_),
                static_cast<std::size_t>(n_units_)};
    }
    std::span<std::int8_t> slice(int m) {
        return {spins_.data() + static_cast<std::size_t>(m) * static_cast<std::size_t>(n_units_),
                static_cast<std::size_t>(n_units_)};
    }

    friend bool operator==(const Replica&, const Replica&) = default;

private:
    std::size_t index(int unit, int slice) const {
        return static_cast<std::size_t>(slice) * static_cast<std::size_t>(n_units_) + static_cast<std::size_t>(unit);
    }

    int n_units_ = 0;
    int slices_ = 0;
    std::vector<std::int8_t> spins_;
};

struct Population {
    std::vector<Replica> replicas;
    double beta = 0.0;
};

/// Strictly increasing inverse temperatures, all positive.
struct AnnealSchedule {
    std::vector<double> betas;

    /// beta_t = beta_final · t / steps for t = 1..steps.
    static AnnealSchedule linear(int steps, double beta_final = 1.0);
    void validate() const;
};

/// How replicas are drawn before the first annealing step (β = 0).
enum class InitialState {
    /// Every (unit, slice) spin independent and uniform.
    independent_spins,
    /// One uniform spin per unit, repeated on every slice; the β → 0 limit
    /// of the path-integral weight at fixed M.
    constant_worldlines,
};

struct SamplerConfig {
    std::size_t replicas = 128;
    int slices = 10;
    AnnealSchedule schedule = AnnealSchedule::linear(5);
    int sweeps = 10;
    std::uint64_t seed = 0;
    InitialState initial_state = InitialState::constant_worldlines;
    /// Follow every Metropolis pass with a worldline_sweep.
    bool worldline_moves = true;
    /// Worker threads for sweeps; results do not depend on it.
    unsigned threads = 1;

    void validate() const;
};

/// E(z) = -Σ b_a z_a - Σ u_ab z_a z_b over one slice of all units.
double slice_energy(const QbmParams& params, std::span<const std::int8_t> z);

/// Mean slice energy.
double action_cl(const QbmParams& params, const Replica& r);

/// Coupling J(β) = -½ ln tanh(βΓ/M) between neighbouring slices of a unit,
/// so that β·E_qm = -J Σ z z'. Zero when Γ = 0.
double imaginary_time_coupling(double gamma, double beta, int slices);

/// E_qm(β) = (1 / 2β) Σ_{a,m} ln tanh(βΓ/M) z_a^m z_a^{m+1}, periodic in m.
double action_qm(const QbmParams& params, const Replica& r, double beta);

/// β · (E_cl + E_qm(β)); the exponent of the path-integral weight.
double reduced_action(const QbmParams& params, const Replica& r, double beta);

/// One raster pass over all (slice, unit) sites with single-spin Metropolis
/// flips of the path-integral weight.
void metropolis_sweep(const QbmParams& params, Replica& r, double beta, Rng& rng);

/// Redraws each unit's whole imaginary-time worldline from its exact
/// conditional distribution given the other units (a heat-bath block move).
/// Exact for the bipartite model because units within a layer do not
/// interact.
void worldline_sweep(const QbmParams& params, Replica& r, double beta, Rng& rng);

/// Systematic resampling: K indices drawn proportionally to `weights`
/// (need not be normalized). Indices come out in nondecreasing order.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t count, Rng& rng);

/// log of the incremental importance weight exp(-[S(β_new) - S(β_old)])
/// for each replica; the old term is dropped when β_old = 0.
std::vector<double> resampling_log_weights(const QbmParams& params, const Population& pop, double beta_old,
                                           double beta_new);

Population resample(const QbmParams& params, const Population& pop, double beta_old, double beta_new, Rng& rng);

/// Full population-annealing run; returns the population at the final β.
Population anneal(const QbmParams& params, const SamplerConfig& config);

/// Slice 0 of every replica after annealing.
std::vector<SpinVector> sample_gibbs(const QbmParams& params, const SamplerConfig& config);

/// Unit means and visible-hidden product means over the samples.
PhaseStats negative_phase(std::span<const SpinVector> samples, int n_visible);

} // namespace qbm
