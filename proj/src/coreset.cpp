#include "qbm/coreset.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "qbm/error.hpp"

namespace qbm {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

WeightedDataset uniform_coreset(const Dataset& dataset, std::size_t m, std::uint64_t seed) {
    const std::size_t n = dataset.size();
    if (m < 1 || m > n) {
        throw Error(ErrorCode::invalid_argument,
                    "coreset size " + std::to_string(m) + " outside 1.." + std::to_string(n));
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    std::vector<BxsImage> points;
    points.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        points.push_back(dataset[idx[i]]);
    }
    return {dataset.width(), dataset.height(), std::move(points), std::vector<double>(m, 1.0)};
}

KCenterResult greedy_k_center(std::size_t n, std::size_t m, const PairDistance& dist, std::size_t first) {
    if (m < 1 || m > n || first >= n) {
        throw Error(ErrorCode::invalid_argument, "k-center needs 1 <= m <= n and a valid first center");
    }
    KCenterResult out;
    out.centers.push_back(first);
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) {
        nearest[i] = dist(i, first);
    }
    while (out.centers.size() < m) {
        const auto next = static_cast<std::size_t>(std::max_element(nearest.begin(), nearest.end()) - nearest.begin());
        out.centers.push_back(next);
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], dist(i, next));
        }
    }
    out.radius = *std::max_element(nearest.begin(), nearest.end());
    return out;
}

double k_center_radius(std::size_t n, const std::vector<std::size_t>& centers, const PairDistance& dist) {
    if (n == 0 || centers.empty()) {
        throw Error(ErrorCode::empty_input, "radius needs points and centers");
    }
    double radius = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (auto c : centers) {
            best = std::min(best, dist(i, c));
        }
        radius = std::max(radius, best);
    }
    return radius;
}

KCenterResult brute_force_k_center(std::size_t n, std::size_t m, const PairDistance& dist) {
    if (m < 1 || m > n) {
        throw Error(ErrorCode::invalid_argument, "k-center needs 1 <= m <= n");
    }
    if (n > 24) {
        throw Error(ErrorCode::too_large, "brute-force k-center limited to 24 points");
    }
    KCenterResult best;
    best.radius = std::numeric_limits<double>::infinity();
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(m), true);
    do {
        std::vector<std::size_t> centers;
        for (std::size_t i = 0; i < n; ++i) {
            if (pick[i]) {
                centers.push_back(i);
            }
        }
        const double r = k_center_radius(n, centers, dist);
        if (r < best.radius) {
            best = {centers, r};
        }
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

Eigen::MatrixXd embedding_features(const ScorerNet& net, std::span<const BxsImage> images) {
    return net.embeddings(image_matrix(images));
}

Eigen::MatrixXd pixel_features(std::span<const BxsImage> images) { return image_matrix(images); }

WeightedDataset minimax_coreset(const Dataset& dataset, std::size_t m, const Eigen::MatrixXd& features) {
    if (dataset.size() == 0) {
        throw Error(ErrorCode::empty_input, "minimax coreset of an empty dataset");
    }
    if (static_cast<std::size_t>(features.cols()) != dataset.size()) {
        throw Error(ErrorCode::dimension_mismatch, "one feature column per image required");
    }
    std::map<std::vector<double>, std::size_t> seen;
    std::vector<std::size_t> unique;
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
        std::vector<double> key(features.col(j).data(), features.col(j).data() + features.rows());
        if (seen.emplace(std::move(key), static_cast<std::size_t>(j)).second) {
            unique.push_back(static_cast<std::size_t>(j));
        }
    }
    if (m < 1 || m > unique.size()) {
        throw Error(ErrorCode::invalid_argument, "coreset size " + std::to_string(m) + " exceeds the " +
                                                     std::to_string(unique.size()) + " distinct points");
    }

    const Eigen::VectorXd centroid = features.rowwise().mean();
    std::size_t first = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < unique.size(); ++u) {
        const double d = (features.col(static_cast<Eigen::Index>(unique[u])) - centroid).norm();
        if (d < best) {
            best = d;
            first = u;
        }
    }

    const auto dist = [&](std::size_t a, std::size_t b) {
        return (features.col(static_cast<Eigen::Index>(unique[a])) - features.col(static_cast<Eigen::Index>(unique[b])))
            .norm();
    };
    const auto result = greedy_k_center(unique.size(), m, dist, first);

    std::vector<BxsImage> points;
    points.reserve(m);
    for (auto c : result.centers) {
        points.push_back(dataset[unique[c]]);
    }
    return {dataset.width(), dataset.height(), std::move(points), std::vector<double>(m, 1.0)};
}

double coreset_radius(const Eigen::MatrixXd& dataset_features, const Eigen::MatrixXd& coreset_features) {
    if (dataset_features.cols() == 0 || coreset_features.cols() == 0) {
        throw Error(ErrorCode::empty_input, "radius needs a nonempty dataset and coreset");
    }
    if (dataset_features.rows() != coreset_features.rows()) {
        throw Error(ErrorCode::dimension_mismatch, "feature widths differ");
    }
    double radius = 0.0;
    for (Eigen::Index i = 0; i < dataset_features.cols(); ++i) {
        const double nearest = (coreset_features.colwise() - dataset_features.col(i)).colwise().norm().minCoeff();
        radius = std::max(radius, nearest);
    }
    return radius;
}

void write_coreset_jsonl(std::ostream& out, const WeightedDataset& coreset, const nlohmann::json& header) {
    nlohmann::json h = header;
    h["record"] = "header";
    h["p"] = coreset.width();
    h["q"] = coreset.height();
    h["m"] = coreset.size();
    out << h.dump() << '\n';
    for (std::size_t i = 0; i < coreset.size(); ++i) {
        out << nlohmann::json{{"bits", coreset.points()[i].bits()}, {"weight", coreset.weights()[i]}}.dump() << '\n';
    }
    if (!out) {
        throw Error(ErrorCode::io, "failed writing coreset");
    }
}

WeightedDataset read_coreset_jsonl(std::istream& in, nlohmann::json* header) {
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorCode::io, "coreset file is empty");
    }
    try {
        const auto h = nlohmann::json::parse(line);
        if (h.value("record", "") != "header") {
            throw Error(ErrorCode::io, "coreset file must start with a header record");
        }
        const int p = h.at("p").get<int>();
        const int q = h.at("q").get<int>();
        std::vector<BxsImage> points;
        std::vector<double> weights;
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            const auto row = nlohmann::json::parse(line);
            points.push_back(BxsImage::from_bits(p, q, row.at("bits").get<std::string>()));
            weights.push_back(row.at("weight").get<double>());
        }
        if (header != nullptr) {
            *header = h;
        }
        return {p, q, std::move(points), std::move(weights)};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::io, std::string("malformed coreset file: ") + e.what());
    }
}

} // namespace qbm
