#include "qbm/model.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "qbm/error.hpp"

namespace qbm {

QbmParams::QbmParams(double gamma_, Eigen::VectorXd visible_bias_, Eigen::VectorXd hidden_bias_,
                     Eigen::MatrixXd weights_)
    : gamma(gamma_), visible_bias(std::move(visible_bias_)), hidden_bias(std::move(hidden_bias_)),
      weights(std::move(weights_)) {
    if (weights.rows() != visible_bias.size() || weights.cols() != hidden_bias.size()) {
        throw Error(ErrorCode::dimension_mismatch, "weights must be n_visible x n_hidden");
    }
    if (!all_finite()) {
        throw Error(ErrorCode::non_finite, "QBM parameters must be finite");
    }
}

QbmParams QbmParams::zeros(int n_visible, int n_hidden, double gamma) {
    return QbmParams(gamma, Eigen::VectorXd::Zero(n_visible), Eigen::VectorXd::Zero(n_hidden),
                     Eigen::MatrixXd::Zero(n_visible, n_hidden));
}

bool QbmParams::all_finite() const {
    return std::isfinite(gamma) && visible_bias.allFinite() && hidden_bias.allFinite() && weights.allFinite();
}

std::size_t QbmParams::flat_size() const noexcept {
    return static_cast<std::size_t>(visible_bias.size() + hidden_bias.size() + weights.size());
}

bool PhaseStats::all_finite() const { return units.allFinite() && edges.allFinite(); }

AdamState AdamState::create(std::size_t n_params, AdamHyper hyper, bool plain_sgd) {
    AdamState s;
    s.hyper = hyper;
    s.plain_sgd = plain_sgd;
    s.m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params));
    s.v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params));
    return s;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) {
        throw Error(ErrorCode::config, "learning rate must be positive");
    }
    if (batch_size < 1) {
        throw Error(ErrorCode::config, "batch size must be at least 1");
    }
    if (budget < 1) {
        throw Error(ErrorCode::config, "budget must be at least 1");
    }
}

QbmParams init_params(const WeightedDataset& source, int n_hidden, double gamma, std::uint64_t seed) {
    if (n_hidden < 1) {
        throw Error(ErrorCode::invalid_argument, "n_hidden must be at least 1");
    }
    const auto n_visible = static_cast<Eigen::Index>(source.points().front().size());
    Eigen::VectorXd on_weight = Eigen::VectorXd::Zero(n_visible);
    double total = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
        const auto& px = source.points()[i].pixels();
        const double w = source.weights()[i];
        total += w;
        for (Eigen::Index a = 0; a < n_visible; ++a) {
            on_weight[a] += w * px[static_cast<std::size_t>(a)];
        }
    }
    Eigen::VectorXd visible_bias(n_visible);
    for (Eigen::Index a = 0; a < n_visible; ++a) {
        const double p = std::clamp(on_weight[a] / total, kBitFrequencyClamp, 1.0 - kBitFrequencyClamp);
        visible_bias[a] = std::log(p / (1.0 - p));
    }

    Rng rng(seed);
    Eigen::MatrixXd weights(n_visible, n_hidden);
    for (Eigen::Index a = 0; a < n_visible; ++a) {
        for (Eigen::Index b = 0; b < n_hidden; ++b) {
            weights(a, b) = kInitWeightStddev * rng.normal();
        }
    }
    return QbmParams(gamma, std::move(visible_bias), Eigen::VectorXd::Zero(n_hidden), std::move(weights));
}

QbmParams init_params(const Dataset& source, int n_hidden, double gamma, std::uint64_t seed) {
    return init_params(WeightedDataset::unit_weights(source), n_hidden, gamma, seed);
}

Eigen::VectorXd effective_bias(const QbmParams& params, std::span<const std::int8_t> visible) {
    if (visible.size() != static_cast<std::size_t>(params.n_visible())) {
        throw Error(ErrorCode::dimension_mismatch, "visible configuration has wrong length");
    }
    Eigen::VectorXd b = params.hidden_bias;
    for (Eigen::Index a = 0; a < params.n_visible(); ++a) {
        b += params.weights.row(a).transpose() * static_cast<double>(visible[static_cast<std::size_t>(a)]);
    }
    return b;
}

double clamped_expectation(double gamma, double b_eff) {
    const double d = std::hypot(gamma, b_eff);
    if (d == 0.0) {
        return 0.0;
    }
    return b_eff / d * std::tanh(d);
}

Eigen::VectorXd positive_phase_hidden(const QbmParams& params, std::span<const std::int8_t> visible) {
    Eigen::VectorXd b = effective_bias(params, visible);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        b[i] = clamped_expectation(params.gamma, b[i]);
    }
    return b;
}

PhaseStats clamped_phase_stats(const QbmParams& params, std::span<const SpinVector> batch,
                               std::span<const double> weights) {
    if (batch.empty()) {
        throw Error(ErrorCode::empty_input, "clamped statistics need a nonempty batch");
    }
    if (weights.size() != batch.size()) {
        throw Error(ErrorCode::dimension_mismatch, "one weight per batch point required");
    }
    const int nv = params.n_visible();
    const int nh = params.n_hidden();
    PhaseStats s{Eigen::VectorXd::Zero(nv + nh), Eigen::MatrixXd::Zero(nv, nh)};
    double total = 0.0;
    Eigen::VectorXd v(nv);
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const double w = weights[j];
        if (!(w > 0.0)) {
            throw Error(ErrorCode::invalid_argument, "batch weights must be positive");
        }
        const Eigen::VectorXd h = positive_phase_hidden(params, batch[j]);
        for (int a = 0; a < nv; ++a) {
            v[a] = batch[j][static_cast<std::size_t>(a)];
        }
        s.units.head(nv) += w * v;
        s.units.tail(nh) += w * h;
        s.edges.noalias() += w * v * h.transpose();
        total += w;
    }
    s.units /= total;
    s.edges /= total;
    return s;
}

PhaseStats clamped_phase_stats(const QbmParams& params, std::span<const SpinVector> batch) {
    const std::vector<double> ones(batch.size(), 1.0);
    return clamped_phase_stats(params, batch, ones);
}

Eigen::VectorXd likelihood_gradient(const PhaseStats& positive, const PhaseStats& negative) {
    if (positive.units.size() != negative.units.size() || positive.edges.rows() != negative.edges.rows() ||
        positive.edges.cols() != negative.edges.cols()) {
        throw Error(ErrorCode::dimension_mismatch, "phase statistics have mismatched shapes");
    }
    const Eigen::Index nu = positive.units.size();
    const Eigen::Index nv = positive.edges.rows();
    const Eigen::Index nh = positive.edges.cols();
    Eigen::VectorXd g(nu + nv * nh);
    g.head(nu) = positive.units - negative.units;
    for (Eigen::Index a = 0; a < nv; ++a) {
        g.segment(nu + a * nh, nh) = (positive.edges.row(a) - negative.edges.row(a)).transpose();
    }
    return g;
}

Eigen::VectorXd flatten(const QbmParams& params) {
    const int nv = params.n_visible();
    const int nh = params.n_hidden();
    Eigen::VectorXd flat(static_cast<Eigen::Index>(params.flat_size()));
    flat.head(nv) = params.visible_bias;
    flat.segment(nv, nh) = params.hidden_bias;
    for (int a = 0; a < nv; ++a) {
        flat.segment(nv + nh + a * nh, nh) = params.weights.row(a).transpose();
    }
    return flat;
}

QbmParams unflatten(const Eigen::VectorXd& flat, double gamma, int n_visible, int n_hidden) {
    if (flat.size() != n_visible + n_hidden + n_visible * n_hidden) {
        throw Error(ErrorCode::dimension_mismatch, "flat parameter vector has wrong length");
    }
    Eigen::MatrixXd w(n_visible, n_hidden);
    for (int a = 0; a < n_visible; ++a) {
        w.row(a) = flat.segment(n_visible + n_hidden + a * n_hidden, n_hidden).transpose();
    }
    return QbmParams(gamma, flat.head(n_visible), flat.segment(n_visible, n_hidden), std::move(w));
}

std::pair<QbmParams, AdamState> gradient_step(const QbmParams& params, const AdamState& adam,
                                              const PhaseStats& positive, const PhaseStats& negative) {
    if (!positive.all_finite() || !negative.all_finite()) {
        throw Error(ErrorCode::non_finite, "phase statistics contain non-finite values");
    }
    if (positive.units.size() != params.n_units() || positive.edges.rows() != params.n_visible() ||
        positive.edges.cols() != params.n_hidden()) {
        throw Error(ErrorCode::dimension_mismatch, "phase statistics do not match parameter shapes");
    }
    const Eigen::VectorXd g = likelihood_gradient(positive, negative);
    if (adam.m.size() != g.size() || adam.v.size() != g.size()) {
        throw Error(ErrorCode::dimension_mismatch, "optimizer state does not match parameter count");
    }

    AdamState next = adam;
    Eigen::VectorXd flat = flatten(params);
    const auto& hp = adam.hyper;
    next.t = adam.t + 1;
    if (adam.plain_sgd) {
        flat += hp.learning_rate * g;
    } else {
        next.m = hp.beta1 * adam.m + (1.0 - hp.beta1) * g;
        next.v = hp.beta2 * adam.v + (1.0 - hp.beta2) * g.cwiseAbs2();
        const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(next.t));
        const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(next.t));
        const Eigen::ArrayXd m_hat = next.m.array() / c1;
        const Eigen::ArrayXd v_hat = next.v.array() / c2;
        flat.array() += hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon);
    }
    return {unflatten(flat, params.gamma, params.n_visible(), params.n_hidden()), std::move(next)};
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

} // namespace

nlohmann::json to_json(const QbmCheckpoint& c) {
    nlohmann::json weights = nlohmann::json::array();
    for (Eigen::Index a = 0; a < c.params.weights.rows(); ++a) {
        weights.push_back(vec_json(c.params.weights.row(a).transpose()));
    }
    return {
        {"gamma", c.params.gamma},
        {"visible_bias", vec_json(c.params.visible_bias)},
        {"hidden_bias", vec_json(c.params.hidden_bias)},
        {"weights", weights},
        {"adam_state",
         {{"m", vec_json(c.adam.m)},
          {"v", vec_json(c.adam.v)},
          {"t", c.adam.t},
          {"learning_rate", c.adam.hyper.learning_rate},
          {"beta1", c.adam.hyper.beta1},
          {"beta2", c.adam.hyper.beta2},
          {"epsilon", c.adam.hyper.epsilon},
          {"plain_sgd", c.adam.plain_sgd}}},
        {"rng_state", c.rng_state},
        {"update_index", c.update_index},
    };
}

QbmCheckpoint checkpoint_from_json(const nlohmann::json& j) {
    try {
        QbmCheckpoint c;
        const Eigen::VectorXd vb = vec_from(j.at("visible_bias"));
        const Eigen::VectorXd hb = vec_from(j.at("hidden_bias"));
        const auto& rows = j.at("weights");
        Eigen::MatrixXd w(vb.size(), hb.size());
        if (static_cast<Eigen::Index>(rows.size()) != vb.size()) {
            throw Error(ErrorCode::dimension_mismatch, "checkpoint weights have wrong row count");
        }
        for (Eigen::Index a = 0; a < vb.size(); ++a) {
            const Eigen::VectorXd row = vec_from(rows[static_cast<std::size_t>(a)]);
            if (row.size() != hb.size()) {
                throw Error(ErrorCode::dimension_mismatch, "checkpoint weights have wrong column count");
            }
            w.row(a) = row.transpose();
        }
        c.params = QbmParams(j.at("gamma").get<double>(), vb, hb, std::move(w));
        const auto& a = j.at("adam_state");
        c.adam.m = vec_from(a.at("m"));
        c.adam.v = vec_from(a.at("v"));
        c.adam.t = a.at("t").get<std::int64_t>();
        c.adam.hyper = {a.at("learning_rate").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
                        a.at("epsilon").get<double>()};
        c.adam.plain_sgd = a.value("plain_sgd", false);
        c.rng_state = j.at("rng_state").get<std::string>();
        c.update_index = j.at("update_index").get<std::int64_t>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::io, std::string("malformed QBM checkpoint: ") + e.what());
    }
}

} // namespace qbm
