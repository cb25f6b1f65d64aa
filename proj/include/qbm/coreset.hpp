#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "qbm/bxs.hpp"
#include "qbm/scorer.hpp"

namespace qbm {

/// 64-bit FNV-1a, used to fingerprint checkpoints and configs.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

/// m images drawn uniformly without replacement from the multiset, unit
/// weights.
WeightedDataset uniform_coreset(const Dataset& dataset, std::size_t m, std::uint64_t seed);

using PairDistance = std::function<double(std::size_t, std::size_t)>;

struct KCenterResult {
    std::vector<std::size_t> centers;
    double radius = 0.0;
};

/// Farthest-point k-center over points 0..n-1 starting from `first`.
/// Ties go to the lowest index.
KCenterResult greedy_k_center(std::size_t n, std::size_t m, const PairDistance& dist, std::size_t first);

/// Exhaustive optimum over all m-subsets; only for small n.
KCenterResult brute_force_k_center(std::size_t n, std::size_t m, const PairDistance& dist);

/// Max over points of the distance to the nearest center.
double k_center_radius(std::size_t n, const std::vector<std::size_t>& centers, const PairDistance& dist);

/// One column per image: the scorer embedding, or raw pixels.
Eigen::MatrixXd embedding_features(const ScorerNet& net, std::span<const BxsImage> images);
Eigen::MatrixXd pixel_features(std::span<const BxsImage> images);

/// Greedy minimax facility location under Euclidean distance between
/// feature columns. Points with identical features are merged first; the
/// seed is the point nearest the feature centroid of the whole multiset.
WeightedDataset minimax_coreset(const Dataset& dataset, std::size_t m, const Eigen::MatrixXd& features);

/// Max over dataset points of the Euclidean feature distance to the nearest
/// coreset point.
double coreset_radius(const Eigen::MatrixXd& dataset_features, const Eigen::MatrixXd& coreset_features);

/// A header record followed by one {"bits", "weight"} row per point.
void write_coreset_jsonl(std::ostream& out, const WeightedDataset& coreset, const nlohmann::json& header);
WeightedDataset read_coreset_jsonl(std::istream& in, nlohmann::json* header = nullptr);

} // namespace qbm
