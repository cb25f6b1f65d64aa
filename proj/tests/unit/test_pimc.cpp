#include <doctest.h>

#include <cmath>
#include <map>

#include "qbm/error.hpp"
#include "qbm/exact.hpp"
#include "qbm/pimc.hpp"

using namespace qbm;

namespace {

QbmParams two_qubit() {
    return {2.0, Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Constant(1, -0.2),
            Eigen::MatrixXd::Constant(1, 1, 0.4)};
}

Replica from_code(int code, int n, int m) {
    Replica r(n, m);
    for (int s = 0; s < m; ++s) {
        for (int a = 0; a < n; ++a) {
            r.set(a, s, (code >> (s * n + a)) & 1 ? -1 : 1);
        }
    }
    return r;
}

int to_code(const Replica& r) {
    int code = 0;
    for (int s = 0; s < r.slices(); ++s) {
        for (int a = 0; a < r.n_units(); ++a) {
            if (r.at(a, s) < 0) {
                code |= 1 << (s * r.n_units() + a);
            }
        }
    }
    return code;
}

/// Empirical state frequencies under `step` against exp(-reduced_action).
template <typename Step>
double stationary_error(const QbmParams& params, int slices, double beta, int iterations, Step step) {
    const int n = params.n_units();
    const int states = 1 << (n * slices);
    std::vector<double> target(static_cast<std::size_t>(states));
    double z = 0.0;
    for (int c = 0; c < states; ++c) {
        target[static_cast<std::size_t>(c)] = std::exp(-reduced_action(params, from_code(c, n, slices), beta));
        z += target[static_cast<std::size_t>(c)];
    }
    std::vector<double> freq(static_cast<std::size_t>(states), 0.0);
    Replica r = from_code(0, n, slices);
    Rng rng(17);
    for (int i = 0; i < iterations; ++i) {
        step(r, rng);
        freq[static_cast<std::size_t>(to_code(r))] += 1.0;
    }
    double worst = 0.0;
    for (int c = 0; c < states; ++c) {
        worst = std::max(worst, std::abs(freq[static_cast<std::size_t>(c)] / iterations - target[static_cast<std::size_t>(c)] / z));
    }
    return worst;
}

} // namespace

TEST_CASE("imaginary-time coupling and quantum action") {
    CHECK(imaginary_time_coupling(2.0, 1.0, 10) == doctest::Approx(0.8113240919944403).epsilon(1e-14));
    CHECK(imaginary_time_coupling(0.0, 1.0, 10) == 0.0);
    const QbmParams one(2.0, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(0), Eigen::MatrixXd::Zero(1, 0));
    Replica r(1, 10);
    for (int m = 0; m < 10; ++m) {
        r.set(0, m, 1);
    }
    CHECK(action_qm(one, r, 1.0) == doctest::Approx(-8.113240919944403).epsilon(1e-13));
    r.flip(0, 3); // breaks two links
    CHECK(action_qm(one, r, 1.0) == doctest::Approx(-8.113240919944403 * 6.0 / 10.0).epsilon(1e-13));
    CHECK_THROWS_AS(action_qm(one, r, 0.0), Error);
}

TEST_CASE("classical action is the mean slice energy") {
    const auto params = two_qubit();
    Replica r(2, 2);
    r.set(0, 0, 1);
    r.set(1, 0, 1);
    r.set(0, 1, -1);
    r.set(1, 1, 1);
    const double e0 = -0.3 + 0.2 - 0.4;
    const double e1 = 0.3 + 0.2 + 0.4;
    CHECK(slice_energy(params, r.slice(0)) == doctest::Approx(e0));
    CHECK(action_cl(params, r) == doctest::Approx(0.5 * (e0 + e1)));
}

TEST_CASE("metropolis sweep leaves the path-integral weight stationary") {
    const auto params = two_qubit();
    const double err = stationary_error(params, 2, 1.0, 200000,
                                        [&](Replica& r, Rng& rng) { metropolis_sweep(params, r, 1.0, rng); });
    CHECK(err < 0.005);
}

TEST_CASE("worldline heat bath leaves the path-integral weight stationary") {
    const auto params = two_qubit();
    const double err = stationary_error(params, 3, 0.8, 200000,
                                        [&](Replica& r, Rng& rng) { worldline_sweep(params, r, 0.8, rng); });
    CHECK(err < 0.005);
}

TEST_CASE("systematic resampling copy counts") {
    const std::vector<double> w{0.1, 0.0, 0.45, 0.2, 0.25};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto picks = systematic_resample(w, 40, rng);
        REQUIRE(picks.size() == 40);
        CHECK(std::is_sorted(picks.begin(), picks.end()));
        std::map<std::size_t, int> copies;
        for (auto i : picks) {
            ++copies[i];
        }
        CHECK(copies[1] == 0);
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double expect = 40 * w[i];
            CHECK(copies[i] >= std::floor(expect - 1e-9));
            CHECK(copies[i] <= std::ceil(expect + 1e-9));
        }
    }
}

TEST_CASE("degenerate resampling weights") {
    Rng rng(1);
    CHECK_THROWS_AS(systematic_resample(std::vector<double>{0.0, 0.0}, 4, rng), Error);
    CHECK_THROWS_AS(systematic_resample(std::vector<double>{1.0, -1.0}, 4, rng), Error);
    CHECK_THROWS_AS(systematic_resample(std::vector<double>{1.0, NAN}, 4, rng), Error);
}

TEST_CASE("resampling log weights drop the old term at beta zero") {
    const auto params = two_qubit();
    Population pop;
    pop.replicas = {from_code(0, 2, 4), from_code(5, 2, 4)};
    const auto lw = resampling_log_weights(params, pop, 0.0, 0.4);
    CHECK(lw[1] == doctest::Approx(-reduced_action(params, pop.replicas[1], 0.4)));
    const auto lw2 = resampling_log_weights(params, pop, 0.4, 0.8);
    CHECK(lw2[0] == doctest::Approx(-(reduced_action(params, pop.replicas[0], 0.8) -
                                      reduced_action(params, pop.replicas[0], 0.4))));
}

TEST_CASE("schedule and config validation") {
    const auto s = AnnealSchedule::linear(5);
    REQUIRE(s.betas.size() == 5);
    CHECK(s.betas[0] == doctest::Approx(0.2));
    CHECK(s.betas[4] == 1.0);
    CHECK_THROWS_AS((AnnealSchedule{{0.5, 0.4}}.validate()), Error);
    SamplerConfig c;
    c.replicas = 1;
    CHECK_THROWS_AS(c.validate(), Error);
    c = SamplerConfig{};
    c.slices = 1;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("sampling is deterministic and thread-count independent") {
    const auto params = two_qubit();
    SamplerConfig c;
    c.replicas = 64;
    c.slices = 8;
    c.seed = 99;
    const auto a = sample_gibbs(params, c);
    c.threads = 3;
    const auto b = sample_gibbs(params, c);
    CHECK(a == b);
    c.seed = 100;
    CHECK(sample_gibbs(params, c) != a);
}

TEST_CASE("sampler matches the dense oracle on the two-qubit instance") {
    const auto params = two_qubit();
    const auto exact_stats = exact::exact_model_stats(params);
    SamplerConfig c;
    c.replicas = 4096;
    c.slices = 64;
    c.seed = 1;
    const auto est = negative_phase(sample_gibbs(params, c), 1);
    CHECK(std::abs(est.units[0] - exact_stats.units[0]) < 0.05);
    CHECK(std::abs(est.units[1] - exact_stats.units[1]) < 0.05);
    CHECK(std::abs(est.edges(0, 0) - exact_stats.edges(0, 0)) < 0.05);
}

TEST_CASE("negative phase averages") {
    const std::vector<SpinVector> s{{1, -1, 1}, {1, 1, -1}};
    const auto st = negative_phase(s, 2);
    CHECK(st.units[0] == 1.0);
    CHECK(st.units[1] == 0.0);
    CHECK(st.edges(0, 0) == 0.0);
    CHECK(st.edges(1, 0) == -1.0);
    CHECK_THROWS_AS(negative_phase(std::vector<SpinVector>{}, 1), Error);
}
