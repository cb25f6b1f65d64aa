#include "qbm/pimc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "qbm/error.hpp"
#include "qbm/parallel.hpp"

namespace qbm {

namespace {

/// Dense copies of the couplings in both access orders so the local field
/// of any unit is a contiguous dot product.
struct LocalFields {
    int nv;
    int nh;
    std::vector<double> bias;       // all units
    std::vector<double> w_by_vis;   // [a * nh + j]
    std::vector<double> w_by_hid;   // [j * nv + a]

    explicit LocalFields(const QbmParams& p) : nv(p.n_visible()), nh(p.n_hidden()) {
        bias.resize(static_cast<std::size_t>(nv + nh));
        w_by_vis.resize(static_cast<std::size_t>(nv * nh));
        w_by_hid.resize(static_cast<std::size_t>(nv * nh));
        for (int a = 0; a < nv; ++a) {
            bias[static_cast<std::size_t>(a)] = p.visible_bias[a];
        }
        for (int j = 0; j < nh; ++j) {
            bias[static_cast<std::size_t>(nv + j)] = p.hidden_bias[j];
        }
        for (int a = 0; a < nv; ++a) {
            for (int j = 0; j < nh; ++j) {
                w_by_vis[static_cast<std::size_t>(a * nh + j)] = p.weights(a, j);
                w_by_hid[static_cast<std::size_t>(j * nv + a)] = p.weights(a, j);
            }
        }
    }

    /// b_u + Σ_neighbours u z, within one slice.
    double field(int unit, const std::int8_t* z) const {
        double h = bias[static_cast<std::size_t>(unit)];
        if (unit < nv) {
            const double* w = &w_by_vis[static_cast<std::size_t>(unit * nh)];
            const std::int8_t* zh = z + nv;
            for (int j = 0; j < nh; ++j) {
                h += w[j] * zh[j];
            }
        } else {
            const double* w = &w_by_hid[static_cast<std::size_t>((unit - nv) * nv)];
            for (int a = 0; a < nv; ++a) {
                h += w[a] * z[a];
            }
        }
        return h;
    }

    void sweep(Replica& r, double beta, double coupling, Rng& rng) const {
        const int n = r.n_units();
        const int m_count = r.slices();
        const double slice_beta = beta / m_count;
        for (int m = 0; m < m_count; ++m) {
            const int prev = (m + m_count - 1) % m_count;
            const int next = (m + 1) % m_count;
            std::int8_t* z = r.slice(m).data();
            const std::int8_t* zp = r.slice(prev).data();
            const std::int8_t* zn = r.slice(next).data();
            for (int a = 0; a < n; ++a) {
                const double s = z[a];
                const double delta = 2.0 * s * (slice_beta * field(a, z) + coupling * (zp[a] + zn[a]));
                if (delta <= 0.0 || rng.uniform() < std::exp(-delta)) {
                    z[a] = static_cast<std::int8_t>(-z[a]);
                }
            }
        }
    }
};

/// Resamples every unit's imaginary-time worldline from its exact
/// conditional given all other units. Given the rest, one worldline is a
/// periodic 1-D Ising chain with site fields f_m = (β/M)·h_m and coupling J; it is
/// drawn by fixing slice 0 from its transfer-matrix marginal and then
/// sampling slices 1..M-1 against normalized backward messages.
void worldline_pass(const LocalFields& fields, Replica& r, double beta, double coupling, Rng& rng,
                    std::vector<double>& site_field, std::vector<std::array<double, 2>>& back) {
    const int n = r.n_units();
    const int m_count = r.slices();
    const double slice_beta = beta / m_count;
    site_field.resize(static_cast<std::size_t>(m_count)); // holds exp(f_m)
    back.resize(static_cast<std::size_t>(m_count));
    const double ej[2][2] = {{std::exp(coupling), std::exp(-coupling)}, {std::exp(-coupling), std::exp(coupling)}};
    // spin index 0 is +1, 1 is -1
    auto spin_value = [](int idx) { return idx == 0 ? 1.0 : -1.0; };
    for (int a = 0; a < n; ++a) {
        for (int m = 0; m < m_count; ++m) {
            site_field[static_cast<std::size_t>(m)] = std::exp(slice_beta * fields.field(a, r.slice(m).data()));
        }
        // Product of transfer matrices T_m(s, s') = exp(f_m s) exp(J s s').
        double prod[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
        for (int m = 0; m < m_count; ++m) {
            const double ef = site_field[static_cast<std::size_t>(m)];
            const double site[2] = {ef, 1.0 / ef};
            double t[2][2];
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    t[i][j] = site[i] * ej[i][j];
                }
            }
            double next[2][2];
            double scale = 0.0;
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    next[i][j] = prod[i][0] * t[0][j] + prod[i][1] * t[1][j];
                    scale = std::max(scale, next[i][j]);
                }
            }
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    prod[i][j] = next[i][j] / scale;
                }
            }
        }
        const int first = rng.uniform() * (prod[0][0] + prod[1][1]) < prod[0][0] ? 0 : 1;

        // back[m][s]: weight of slices m..M-1 given s_m = s, closing onto slice 0.
        for (int m = m_count - 1; m >= 1; --m) {
            const double ef = site_field[static_cast<std::size_t>(m)];
            const double site[2] = {ef, 1.0 / ef};
            auto& b = back[static_cast<std::size_t>(m)];
            for (int i = 0; i < 2; ++i) {
                const double onward = (m == m_count - 1)
                                          ? ej[i][first]
                                          : ej[i][0] * back[static_cast<std::size_t>(m + 1)][0] +
                                                ej[i][1] * back[static_cast<std::size_t>(m + 1)][1];
                b[static_cast<std::size_t>(i)] = site[i] * onward;
            }
            const double norm = b[0] + b[1];
            b[0] /= norm;
            b[1] /= norm;
        }

        r.set(a, 0, static_cast<std::int8_t>(spin_value(first)));
        int prev = first;
        for (int m = 1; m < m_count; ++m) {
            const auto& b = back[static_cast<std::size_t>(m)];
            const double w_up = ej[prev][0] * b[0];
            const double w_down = ej[prev][1] * b[1];
            const int cur = rng.uniform() * (w_up + w_down) < w_up ? 0 : 1;
            r.set(a, m, static_cast<std::int8_t>(spin_value(cur)));
            prev = cur;
        }
    }
}

void check_replica(const QbmParams& params, const Replica& r) {
    if (r.n_units() != params.n_units()) {
        throw Error(ErrorCode::dimension_mismatch, "replica unit count does not match parameters");
    }
}

} // namespace

Replica::Replica(int n_units, int slices)
    : n_units_(n_units), slices_(slices),
      spins_(static_cast<std::size_t>(n_units) * static_cast<std::size_t>(slices), 1) {
    if (n_units < 1 || slices < 1) {
        throw Error(ErrorCode::invalid_argument, "replica needs at least one unit and one slice");
    }
}

AnnealSchedule AnnealSchedule::linear(int steps, double beta_final) {
    if (steps < 1 || !(beta_final > 0.0)) {
        throw Error(ErrorCode::config, "linear schedule needs steps >= 1 and beta_final > 0");
    }
    AnnealSchedule s;
    for (int t = 1; t <= steps; ++t) {
        s.betas.push_back(beta_final * t / steps);
    }
    return s;
}

void AnnealSchedule::validate() const {
    if (betas.empty()) {
        throw Error(ErrorCode::config, "annealing schedule is empty");
    }
    double prev = 0.0;
    for (double b : betas) {
        if (!(b > prev) || !std::isfinite(b)) {
            throw Error(ErrorCode::config, "annealing schedule must be strictly increasing and positive");
        }
        prev = b;
    }
}

void SamplerConfig::validate() const {
    if (replicas < 2) {
        throw Error(ErrorCode::config, "sampler needs at least 2 replicas");
    }
    if (slices < 2) {
        throw Error(ErrorCode::config, "sampler needs at least 2 imaginary-time slices");
    }
    if (sweeps < 1) {
        throw Error(ErrorCode::config, "sampler needs at least one sweep per step");
    }
    schedule.validate();
}

double slice_energy(const QbmParams& params, std::span<const std::int8_t> z) {
    const int nv = params.n_visible();
    const int nh = params.n_hidden();
    if (z.size() != static_cast<std::size_t>(nv + nh)) {
        throw Error(ErrorCode::dimension_mismatch, "slice must cover every unit");
    }
    double e = 0.0;
    for (int a = 0; a < nv; ++a) {
        e -= params.visible_bias[a] * z[static_cast<std::size_t>(a)];
    }
    for (int j = 0; j < nh; ++j) {
        e -= params.hidden_bias[j] * z[static_cast<std::size_t>(nv + j)];
    }
    for (int a = 0; a < nv; ++a) {
        double coupled = 0.0;
        for (int j = 0; j < nh; ++j) {
            coupled += params.weights(a, j) * z[static_cast<std::size_t>(nv + j)];
        }
        e -= coupled * z[static_cast<std::size_t>(a)];
    }
    return e;
}

double action_cl(const QbmParams& params, const Replica& r) {
    check_replica(params, r);
    double total = 0.0;
    for (int m = 0; m < r.slices(); ++m) {
        total += slice_energy(params, r.slice(m));
    }
    return total / r.slices();
}

double imaginary_time_coupling(double gamma, double beta, int slices) {
    if (gamma == 0.0) {
        return 0.0;
    }
    return -0.5 * std::log(std::tanh(beta * gamma / slices));
}

namespace {

/// Σ_{a,m} z_a^m z_a^{m+1} with periodic m.
double slice_alignment(const Replica& r) {
    long total = 0;
    for (int m = 0; m < r.slices(); ++m) {
        const auto z = r.slice(m);
        const auto zn = r.slice((m + 1) % r.slices());
        for (int a = 0; a < r.n_units(); ++a) {
            total += z[static_cast<std::size_t>(a)] * zn[static_cast<std::size_t>(a)];
        }
    }
    return static_cast<double>(total);
}

} // namespace

double action_qm(const QbmParams& params, const Replica& r, double beta) {
    check_replica(params, r);
    if (!(beta > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "imaginary-time action needs beta > 0");
    }
    return -imaginary_time_coupling(params.gamma, beta, r.slices()) * slice_alignment(r) / beta;
}

double reduced_action(const QbmParams& params, const Replica& r, double beta) {
    check_replica(params, r);
    if (!(beta > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "reduced action needs beta > 0");
    }
    return beta * action_cl(params, r) - imaginary_time_coupling(params.gamma, beta, r.slices()) * slice_alignment(r);
}

void metropolis_sweep(const QbmParams& params, Replica& r, double beta, Rng& rng) {
    check_replica(params, r);
    if (!(beta > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "metropolis sweep needs beta > 0");
    }
    LocalFields(params).sweep(r, beta, imaginary_time_coupling(params.gamma, beta, r.slices()), rng);
}

void worldline_sweep(const QbmParams& params, Replica& r, double beta, Rng& rng) {
    check_replica(params, r);
    if (!(beta > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "worldline sweep needs beta > 0");
    }
    std::vector<double> site_field;
    std::vector<std::array<double, 2>> back;
    worldline_pass(LocalFields(params), r, beta, imaginary_time_coupling(params.gamma, beta, r.slices()), rng,
                   site_field, back);
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t count, Rng& rng) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw Error(ErrorCode::degenerate_population, "resampling weights must be finite and non-negative");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        throw Error(ErrorCode::degenerate_population, "all resampling weights are zero");
    }
    std::vector<std::size_t> out;
    out.reserve(count);
    const double step = 1.0 / static_cast<double>(count);
    const double offset = rng.uniform() * step;
    double cumulative = 0.0;
    std::size_t i = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double u = offset + static_cast<double>(k) * step;
        while (i + 1 < weights.size() && cumulative + weights[i] / total <= u) {
            cumulative += weights[i] / total;
            ++i;
        }
        out.push_back(i);
    }
    return out;
}

std::vector<double> resampling_log_weights(const QbmParams& params, const Population& pop, double beta_old,
                                           double beta_new) {
    if (!(beta_new > beta_old) || beta_old < 0.0) {
        throw Error(ErrorCode::invalid_argument, "resampling needs beta_new > beta_old >= 0");
    }
    std::vector<double> logw(pop.replicas.size());
    for (std::size_t r = 0; r < pop.replicas.size(); ++r) {
        const auto& rep = pop.replicas[r];
        double lw = -reduced_action(params, rep, beta_new);
        if (beta_old > 0.0) {
            lw += reduced_action(params, rep, beta_old);
        }
        logw[r] = lw;
    }
    return logw;
}

Population resample(const QbmParams& params, const Population& pop, double beta_old, double beta_new, Rng& rng) {
    if (pop.replicas.empty()) {
        throw Error(ErrorCode::empty_input, "cannot resample an empty population");
    }
    const auto logw = resampling_log_weights(params, pop, beta_old, beta_new);
    double max_lw = -std::numeric_limits<double>::infinity();
    for (double lw : logw) {
        if (std::isnan(lw)) {
            throw Error(ErrorCode::degenerate_population, "resampling weight is NaN");
        }
        max_lw = std::max(max_lw, lw);
    }
    if (!std::isfinite(max_lw)) {
        throw Error(ErrorCode::degenerate_population, "no replica has a finite resampling weight");
    }
    std::vector<double> w(logw.size());
    for (std::size_t r = 0; r < logw.size(); ++r) {
        w[r] = std::exp(logw[r] - max_lw);
    }
    const auto picks = systematic_resample(w, pop.replicas.size(), rng);
    Population next;
    next.beta = beta_new;
    next.replicas.reserve(picks.size());
    for (auto i : picks) {
        next.replicas.push_back(pop.replicas[i]);
    }
    return next;
}

namespace {

constexpr std::uint64_t kInitStream = 0;

std::uint64_t sweep_stream(std::size_t step) { return 2 * static_cast<std::uint64_t>(step); }
std::uint64_t resample_stream(std::size_t step) { return 2 * static_cast<std::uint64_t>(step) + 1; }

} // namespace

Population anneal(const QbmParams& params, const SamplerConfig& config) {
    config.validate();
    const int n = params.n_units();
    const std::size_t k = config.replicas;

    Population pop;
    pop.replicas.assign(k, Replica(n, config.slices));
    for (std::size_t r = 0; r < k; ++r) {
        Rng rng = Rng::stream(config.seed, kInitStream, r);
        Replica& rep = pop.replicas[r];
        if (config.initial_state == InitialState::constant_worldlines) {
            for (int a = 0; a < n; ++a) {
                const auto s = static_cast<std::int8_t>(rng.spin());
                for (int m = 0; m < config.slices; ++m) {
                    rep.set(a, m, s);
                }
            }
        } else {
            for (int m = 0; m < config.slices; ++m) {
                for (int a = 0; a < n; ++a) {
                    rep.set(a, m, static_cast<std::int8_t>(rng.spin()));
                }
            }
        }
    }

    const LocalFields fields(params);
    double beta_old = 0.0;
    for (std::size_t t = 0; t < config.schedule.betas.size(); ++t) {
        const double beta = config.schedule.betas[t];
        Rng resample_rng = Rng::stream(config.seed, resample_stream(t + 1));
        pop = resample(params, pop, beta_old, beta, resample_rng);
        const double coupling = imaginary_time_coupling(params.gamma, beta, config.slices);
        parallel_for(k, config.threads, [&](std::size_t r) {
            Rng rng = Rng::stream(config.seed, sweep_stream(t + 1), r);
            std::vector<double> site_field;
            std::vector<std::array<double, 2>> back;
            for (int s = 0; s < config.sweeps; ++s) {
                fields.sweep(pop.replicas[r], beta, coupling, rng);
                if (config.worldline_moves) {
                    worldline_pass(fields, pop.replicas[r], beta, coupling, rng, site_field, back);
                }
            }
        });
        beta_old = beta;
    }
    return pop;
}

std::vector<SpinVector> sample_gibbs(const QbmParams& params, const SamplerConfig& config) {
    const Population pop = anneal(params, config);
    std::vector<SpinVector> samples;
    samples.reserve(pop.replicas.size());
    for (const auto& rep : pop.replicas) {
        const auto s = rep.slice(0);
        samples.emplace_back(s.begin(), s.end());
    }
    return samples;
}

PhaseStats negative_phase(std::span<const SpinVector> samples, int n_visible) {
    if (samples.empty()) {
        throw Error(ErrorCode::empty_input, "negative phase needs at least one sample");
    }
    const auto n = static_cast<int>(samples.front().size());
    if (n_visible < 0 || n_visible > n) {
        throw Error(ErrorCode::dimension_mismatch, "n_visible exceeds sample length");
    }
    const int nh = n - n_visible;
    PhaseStats s{Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n_visible, nh)};
    Eigen::VectorXd z(n);
    for (const auto& sample : samples) {
        if (static_cast<int>(sample.size()) != n) {
            throw Error(ErrorCode::dimension_mismatch, "samples must share a length");
        }
        for (int a = 0; a < n; ++a) {
            z[a] = sample[static_cast<std::size_t>(a)];
        }
        s.units += z;
        s.edges.noalias() += z.head(n_visible) * z.tail(nh).transpose();
    }
    const auto count = static_cast<double>(samples.size());
    s.units /= count;
    s.edges /= count;
    return s;
}

} // namespace qbm
