#include "qbm/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "qbm/error.hpp"

namespace qbm {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

BxsImage random_grid(int width, int height, Rng& rng) {
    BxsImage img(width, height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (rng.uniform() < 0.5) {
            img.flip(i);
        }
    }
    return img;
}

BxsImage near_miss(const BxsImage& source, Rng& rng) {
    BxsImage img = source;
    const auto flips = 1 + rng.below(3);
    std::vector<std::size_t> order(img.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < flips && k < order.size(); ++k) {
        const auto j = k + static_cast<std::size_t>(rng.below(order.size() - k));
        std::swap(order[k], order[j]);
        img.flip(order[k]);
    }
    return img;
}

} // namespace

std::pair<LabeledSet, LabeledSet> make_labeled_set(int width, int height, std::size_t size, std::uint64_t seed) {
    if (size < 2 || size % 2 != 0) {
        throw Error(ErrorCode::invalid_argument, "labeled set size must be even and at least 2");
    }
    std::vector<BxsImage> members = distinct_images(generate_bxs_multiset(width, height).images());
    Rng order_rng = Rng::stream(seed, 1);
    order_rng.shuffle(std::span<BxsImage>(members));

    const std::size_t per_class = size / 2;
    std::vector<BxsImage> positives;
    positives.reserve(per_class);
    for (std::size_t i = 0; i < per_class; ++i) {
        positives.push_back(members[i % members.size()]);
    }

    Rng neg_rng = Rng::stream(seed, 2);
    std::vector<BxsImage> negatives;
    negatives.reserve(per_class);
    while (negatives.size() < per_class) {
        BxsImage candidate = (negatives.size() % 2 == 0)
                                 ? random_grid(width, height, neg_rng)
                                 : near_miss(members[static_cast<std::size_t>(neg_rng.below(members.size()))], neg_rng);
        if (!is_bxs(candidate)) {
            negatives.push_back(std::move(candidate));
        }
    }

    const std::size_t train_per_class = (per_class * 4 + 2) / 5;
    LabeledSet train{{}, {}, Split::train};
    LabeledSet val{{}, {}, Split::validation};
    for (std::size_t i = 0; i < per_class; ++i) {
        LabeledSet& dst = i < train_per_class ? train : val;
        dst.inputs.push_back(positives[i]);
        dst.labels.push_back(1);
        dst.inputs.push_back(negatives[i]);
        dst.labels.push_back(0);
    }
    for (auto* set : {&train, &val}) {
        std::vector<std::size_t> perm(set->size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng rng = Rng::stream(seed, set == &train ? 3 : 4);
        rng.shuffle(std::span<std::size_t>(perm));
        LabeledSet shuffled{{}, {}, set->split};
        for (auto i : perm) {
            shuffled.inputs.push_back(set->inputs[i]);
            shuffled.labels.push_back(set->labels[i]);
        }
        *set = std::move(shuffled);
    }
    return {std::move(train), std::move(val)};
}

ScorerNet::ScorerNet(int input_dim, int hidden_width)
    : w1(Eigen::MatrixXd::Zero(hidden_width, input_dim)), b1(Eigen::VectorXd::Zero(hidden_width)),
      w2(Eigen::MatrixXd::Zero(kEmbeddingWidth, hidden_width)), b2(Eigen::VectorXd::Zero(kEmbeddingWidth)),
      w3(Eigen::MatrixXd::Zero(1, kEmbeddingWidth)), b3(Eigen::VectorXd::Zero(1)) {
    if (input_dim < 1 || hidden_width < 1) {
        throw Error(ErrorCode::invalid_argument, "scorer layer widths must be positive");
    }
}

ScorerNet ScorerNet::random(int input_dim, int hidden_width, std::uint64_t seed) {
    ScorerNet net(input_dim, hidden_width);
    Rng rng(seed);
    auto fill = [&rng](Eigen::MatrixXd& w) {
        const double scale = std::sqrt(2.0 / static_cast<double>(w.cols()));
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            for (Eigen::Index i = 0; i < w.rows(); ++i) {
                w(i, j) = scale * rng.normal();
            }
        }
    };
    fill(net.w1);
    fill(net.w2);
    fill(net.w3);
    return net;
}

void ScorerNet::check() const {
    if (w2.rows() != kEmbeddingWidth || w3.rows() != 1 || w3.cols() != kEmbeddingWidth || w2.cols() != w1.rows() ||
        b1.size() != w1.rows() || b2.size() != w2.rows() || b3.size() != 1) {
        throw Error(ErrorCode::dimension_mismatch, "scorer layers are inconsistent with d -> h -> 8 -> 1");
    }
}

std::array<int, 4> ScorerNet::dims() const {
    return {static_cast<int>(w1.cols()), static_cast<int>(w1.rows()), kEmbeddingWidth, 1};
}

std::size_t ScorerNet::parameter_count() const {
    return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size());
}

Eigen::VectorXd ScorerNet::parameters() const {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index at = 0;
    auto put = [&](const auto& m) {
        flat.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        at += m.size();
    };
    put(w1);
    put(b1);
    put(w2);
    put(b2);
    put(w3);
    put(b3);
    return flat;
}

void ScorerNet::set_parameters(const Eigen::VectorXd& flat) {
    if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
        throw Error(ErrorCode::dimension_mismatch, "flat scorer parameter vector has wrong length");
    }
    Eigen::Index at = 0;
    auto take = [&](auto& m) {
        Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(at, m.size());
        at += m.size();
    };
    take(w1);
    take(b1);
    take(w2);
    take(b2);
    take(w3);
    take(b3);
}

Eigen::MatrixXd ScorerNet::embeddings(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != w1.cols()) {
        throw Error(ErrorCode::dimension_mismatch, "input dimension does not match the scorer");
    }
    const Eigen::MatrixXd a1 = relu((w1 * inputs).colwise() + b1);
    return relu((w2 * a1).colwise() + b2);
}

Eigen::RowVectorXd ScorerNet::logits(const Eigen::MatrixXd& inputs) const {
    return ((w3 * embeddings(inputs)).colwise() + b3).row(0);
}

double loss_and_gradient(const ScorerNet& net, const Eigen::MatrixXd& inputs, std::span<const std::uint8_t> labels,
                         Eigen::VectorXd& gradient) {
    const Eigen::Index batch = inputs.cols();
    if (batch == 0 || static_cast<std::size_t>(batch) != labels.size()) {
        throw Error(ErrorCode::dimension_mismatch, "one label per input column required");
    }
    if (inputs.rows() != net.w1.cols()) {
        throw Error(ErrorCode::dimension_mismatch, "input dimension does not match the scorer");
    }
    const Eigen::MatrixXd z1 = (net.w1 * inputs).colwise() + net.b1;
    const Eigen::MatrixXd a1 = relu(z1);
    const Eigen::MatrixXd z2 = (net.w2 * a1).colwise() + net.b2;
    const Eigen::MatrixXd a2 = relu(z2);
    const Eigen::RowVectorXd z3 = ((net.w3 * a2).colwise() + net.b3).row(0);

    double loss = 0.0;
    Eigen::RowVectorXd dz3(batch);
    for (Eigen::Index i = 0; i < batch; ++i) {
        const double y = labels[static_cast<std::size_t>(i)];
        loss += softplus(z3[i]) - y * z3[i];
        dz3[i] = (sigmoid(z3[i]) - y) / static_cast<double>(batch);
    }
    loss /= static_cast<double>(batch);

    const Eigen::MatrixXd dw3 = dz3 * a2.transpose();
    const Eigen::VectorXd db3 = Eigen::VectorXd::Constant(1, dz3.sum());
    const Eigen::MatrixXd dz2 = (net.w3.transpose() * dz3).cwiseProduct((z2.array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd dw2 = dz2 * a1.transpose();
    const Eigen::VectorXd db2 = dz2.rowwise().sum();
    const Eigen::MatrixXd dz1 = (net.w2.transpose() * dz2).cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd dw1 = dz1 * inputs.transpose();
    const Eigen::VectorXd db1 = dz1.rowwise().sum();

    ScorerNet g(static_cast<int>(net.w1.cols()), static_cast<int>(net.w1.rows()));
    g.w1 = dw1;
    g.b1 = db1;
    g.w2 = dw2;
    g.b2 = db2;
    g.w3 = dw3;
    g.b3 = db3;
    gradient = g.parameters();
    return loss;
}

Eigen::VectorXd image_features(const BxsImage& image) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(image.size()));
    for (std::size_t i = 0; i < image.size(); ++i) {
        x[static_cast<Eigen::Index>(i)] = image.pixels()[i];
    }
    return x;
}

Eigen::MatrixXd image_matrix(std::span<const BxsImage> images) {
    if (images.empty()) {
        return {};
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(images.front().size()), static_cast<Eigen::Index>(images.size()));
    for (std::size_t j = 0; j < images.size(); ++j) {
        if (images[j].size() != images.front().size()) {
            throw Error(ErrorCode::dimension_mismatch, "images must share dimensions");
        }
        x.col(static_cast<Eigen::Index>(j)) = image_features(images[j]);
    }
    return x;
}

double accuracy(const ScorerNet& net, const LabeledSet& set) {
    if (set.size() == 0) {
        throw Error(ErrorCode::empty_input, "accuracy of an empty set is undefined");
    }
    const Eigen::RowVectorXd z = net.logits(image_matrix(set.inputs));
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const bool predicted = sigmoid(z[i]) > 0.5;
        correct += predicted == (set.labels[static_cast<std::size_t>(i)] == 1) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

namespace {

ScorerNet train_once(const Eigen::MatrixXd& x, const std::vector<std::uint8_t>& y, std::uint64_t seed,
                     const ScorerTrainOptions& opt, std::vector<double>& epoch_losses) {
    ScorerNet net = ScorerNet::random(static_cast<int>(x.rows()), opt.hidden_width, seed);
    const auto n_params = net.parameter_count();
    AdamState adam = AdamState::create(n_params, {opt.learning_rate, 0.9, 0.999, 1e-8});
    Eigen::VectorXd theta = net.parameters();
    Eigen::VectorXd grad;

    const auto n = static_cast<std::size_t>(x.cols());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    epoch_losses.clear();
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        Rng rng = Rng::stream(seed, 1000 + static_cast<std::uint64_t>(epoch));
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        const double lr = opt.cosine_decay
                              ? 0.5 * opt.learning_rate * (1.0 + std::cos(std::numbers::pi * epoch / opt.epochs))
                              : opt.learning_rate;
        for (std::size_t start = 0; start < n; start += opt.batch_size) {
            const std::size_t end = std::min(start + opt.batch_size, n);
            Eigen::MatrixXd xb(x.rows(), static_cast<Eigen::Index>(end - start));
            std::vector<std::uint8_t> yb(end - start);
            for (std::size_t i = start; i < end; ++i) {
                xb.col(static_cast<Eigen::Index>(i - start)) = x.col(static_cast<Eigen::Index>(order[i]));
                yb[i - start] = y[order[i]];
            }
            net.set_parameters(theta);
            epoch_loss += loss_and_gradient(net, xb, yb, grad) * static_cast<double>(end - start);

            adam.t += 1;
            adam.m = adam.hyper.beta1 * adam.m + (1.0 - adam.hyper.beta1) * grad;
            adam.v = adam.hyper.beta2 * adam.v + (1.0 - adam.hyper.beta2) * grad.cwiseAbs2();
            const double c1 = 1.0 - std::pow(adam.hyper.beta1, static_cast<double>(adam.t));
            const double c2 = 1.0 - std::pow(adam.hyper.beta2, static_cast<double>(adam.t));
            theta.array() -= lr * (adam.m.array() / c1) /
                             ((adam.v.array() / c2).sqrt() + adam.hyper.epsilon);
        }
        epoch_losses.push_back(epoch_loss / static_cast<double>(n));
    }
    net.set_parameters(theta);
    return net;
}

} // namespace

ScorerNet train_scorer(const LabeledSet& train, const LabeledSet& validation, std::uint64_t seed,
                       const ScorerTrainOptions& options, ScorerReport* report) {
    if (train.size() == 0 || validation.size() == 0) {
        throw Error(ErrorCode::empty_input, "scorer training needs nonempty train and validation sets");
    }
    const Eigen::MatrixXd x = image_matrix(train.inputs);
    double best = -1.0;
    for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
        const std::uint64_t attempt_seed = attempt == 0 ? seed : splitmix64(seed + static_cast<std::uint64_t>(attempt));
        std::vector<double> losses;
        ScorerNet net = train_once(x, train.labels, attempt_seed, options, losses);
        const double acc = accuracy(net, validation);
        best = std::max(best, acc);
        if (acc >= options.target_accuracy) {
            if (report != nullptr) {
                *report = {attempt_seed, attempt + 1, acc, std::move(losses)};
            }
            return net;
        }
    }
    throw Error(ErrorCode::training_failed, "scorer validation accuracy " + std::to_string(best) +
                                                " below target after " + std::to_string(options.max_attempts) +
                                                " attempts");
}

double classify(const ScorerNet& net, const BxsImage& image) {
    return sigmoid(net.logits(image_features(image))[0]);
}

double model_score(const ScorerNet& net, std::span<const SpinVector> samples, int width, int height,
                   std::span<const double> weights) {
    if (samples.empty()) {
        throw Error(ErrorCode::empty_input, "model score needs at least one sample");
    }
    if (!weights.empty() && weights.size() != samples.size()) {
        throw Error(ErrorCode::dimension_mismatch, "one weight per sample required");
    }
    std::vector<BxsImage> images;
    images.reserve(samples.size());
    for (const auto& s : samples) {
        images.push_back(decode_spins(s, width, height));
    }
    const Eigen::RowVectorXd z = net.logits(image_matrix(images));
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
        num += w * sigmoid(z[i]);
        den += w;
    }
    return num / den;
}

Eigen::VectorXd embed(const ScorerNet& net, const BxsImage& image) {
    return net.embeddings(image_features(image)).col(0);
}

double inception_distance(const ScorerNet& net, const BxsImage& x, const BxsImage& y) {
    return (embed(net, x) - embed(net, y)).norm();
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row[static_cast<std::size_t>(j)] = m(i, j);
        }
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const nlohmann::json& rows) {
    const auto n_rows = static_cast<Eigen::Index>(rows.size());
    const auto n_cols = n_rows > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    Eigen::MatrixXd m(n_rows, n_cols);
    for (Eigen::Index i = 0; i < n_rows; ++i) {
        const auto row = rows[static_cast<std::size_t>(i)].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != n_cols) {
            throw Error(ErrorCode::io, "ragged matrix in scorer checkpoint");
        }
        for (Eigen::Index j = 0; j < n_cols; ++j) {
            m(i, j) = row[static_cast<std::size_t>(j)];
        }
    }
    return m;
}

} // namespace

nlohmann::json to_json(const ScorerNet& net, const nlohmann::json& metadata) {
    const auto d = net.dims();
    return {
        {"dims", {d[0], d[1], d[2], d[3]}},
        {"weights", {matrix_json(net.w1), matrix_json(net.w2), matrix_json(net.w3)}},
        {"biases",
         {std::vector<double>(net.b1.data(), net.b1.data() + net.b1.size()),
          std::vector<double>(net.b2.data(), net.b2.data() + net.b2.size()),
          std::vector<double>(net.b3.data(), net.b3.data() + net.b3.size())}},
        {"training", metadata},
    };
}

ScorerNet scorer_from_json(const nlohmann::json& j) {
    try {
        const auto dims = j.at("dims").get<std::vector<int>>();
        if (dims.size() != 4 || dims[2] != ScorerNet::kEmbeddingWidth || dims[3] != 1) {
            throw Error(ErrorCode::io, "scorer checkpoint must have dims [d, h, 8, 1]");
        }
        ScorerNet net(dims[0], dims[1]);
        const auto& w = j.at("weights");
        const auto& b = j.at("biases");
        net.w1 = matrix_from(w.at(0));
        net.w2 = matrix_from(w.at(1));
        net.w3 = matrix_from(w.at(2));
        auto vec = [](const nlohmann::json& v) {
            const auto values = v.get<std::vector<double>>();
            return Eigen::VectorXd(
                Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
        };
        net.b1 = vec(b.at(0));
        net.b2 = vec(b.at(1));
        net.b3 = vec(b.at(2));
        net.check();
        if (net.w1.cols() != dims[0] || net.w1.rows() != dims[1]) {
            throw Error(ErrorCode::io, "scorer checkpoint dims disagree with weights");
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::io, std::string("malformed scorer checkpoint: ") + e.what());
    }
}

} // namespace qbm
