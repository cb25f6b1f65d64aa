#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qbm/coreset.hpp"
#include "qbm/error.hpp"

using namespace qbm;

namespace {

const std::vector<double> kToy{0.0, 1.0, 2.0, 10.0};
double toy(std::size_t i, std::size_t j) { return std::abs(kToy[i] - kToy[j]); }

} // namespace

TEST_CASE("greedy k-center on the 1-D toy set") {
    const auto g = greedy_k_center(4, 2, toy, 0);
    CHECK(g.centers == std::vector<std::size_t>{0, 3});
    CHECK(g.radius == 2.0);
    const auto opt = brute_force_k_center(4, 2, toy);
    CHECK(opt.radius == 1.0);
    CHECK(opt.centers == std::vector<std::size_t>{1, 3});
    CHECK(k_center_radius(4, {0, 3}, toy) == 2.0);
    CHECK(k_center_radius(4, {0, 1, 2, 3}, toy) == 0.0);
    CHECK(k_center_radius(4, {0, 2, 3}, toy) <= k_center_radius(4, {0, 3}, toy));
    const auto one = greedy_k_center(4, 1, toy, 2);
    CHECK(one.radius == 8.0);
}

TEST_CASE("greedy ties go to the lowest index") {
    const std::vector<double> pts{0.0, -1.0, 1.0};
    const auto d = [&](std::size_t i, std::size_t j) { return std::abs(pts[i] - pts[j]); };
    CHECK(greedy_k_center(3, 2, d, 0).centers == std::vector<std::size_t>{0, 1});
}

TEST_CASE("uniform coreset") {
    const auto data = generate_bxs_multiset(3, 3);
    const auto full = uniform_coreset(data, data.size(), 4);
    auto bits = [](const std::vector<BxsImage>& v) {
        std::vector<std::string> b;
        for (const auto& x : v) b.push_back(x.bits());
        std::sort(b.begin(), b.end());
        return b;
    };
    CHECK(bits(full.points()) == bits(data.images()));
    const auto a = uniform_coreset(data, 10, 8);
    const auto b = uniform_coreset(data, 10, 8);
    CHECK(a.points() == b.points());
    CHECK(std::all_of(a.weights().begin(), a.weights().end(), [](double w) { return w == 1.0; }));
    CHECK_THROWS_AS(uniform_coreset(data, data.size() + 1, 0), Error);
    CHECK_THROWS_AS(uniform_coreset(data, 0, 0), Error);
}

TEST_CASE("minimax coreset in pixel space") {
    const auto data = generate_bxs_multiset(3, 3);
    const auto features = pixel_features(data.images());
    const auto distinct = distinct_count(data);
    const auto all = minimax_coreset(data, distinct, features);
    CHECK(all.size() == distinct);
    CHECK(coreset_radius(features, pixel_features(all.points())) == 0.0);
    CHECK_THROWS_AS(minimax_coreset(data, distinct + 1, features), Error);

    const auto c1 = minimax_coreset(data, 1, features);
    const Eigen::VectorXd centroid = features.rowwise().mean();
    const Eigen::VectorXd seed = image_features(c1.points()[0]);
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
        CHECK((seed - centroid).norm() <= (features.col(j) - centroid).norm() + 1e-12);
    }
    const auto c4 = minimax_coreset(data, 4, features);
    const auto c5 = minimax_coreset(data, 5, features);
    CHECK(c4.points() == std::vector<BxsImage>(c5.points().begin(), c5.points().begin() + 4));
    CHECK(coreset_radius(features, pixel_features(c5.points())) <=
          coreset_radius(features, pixel_features(c4.points())));
}

TEST_CASE("greedy is within twice the optimum on random metrics") {
    Rng rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 4 + rng.below(9);
        const std::size_t m = 1 + rng.below(3);
        std::vector<Eigen::Vector2d> pts(n);
        for (auto& p : pts) p = Eigen::Vector2d(rng.normal(), rng.normal());
        const auto d = [&](std::size_t i, std::size_t j) { return (pts[i] - pts[j]).norm(); };
        const auto g = greedy_k_center(n, m, d, rng.below(n));
        CHECK(g.radius <= 2.0 * brute_force_k_center(n, m, d).radius + 1e-12);
    }
}

TEST_CASE("coreset JSONL round trip and hashing") {
    const auto data = generate_bxs_multiset(2, 3);
    const auto cs = uniform_coreset(data, 5, 1);
    std::stringstream ss;
    write_coreset_jsonl(ss, cs, {{"method", "uniform"}, {"scorer_hash", "none"}});
    nlohmann::json header;
    const auto back = read_coreset_jsonl(ss, &header);
    CHECK(back.points() == cs.points());
    CHECK(back.weights() == cs.weights());
    CHECK(header["m"] == 5);
    CHECK(header["method"] == "uniform");
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hash_hex(0xabcULL) == "0000000000000abc");
}
