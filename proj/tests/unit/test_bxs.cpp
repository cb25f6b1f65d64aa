#include <doctest.h>

#include <set>
#include <sstream>

#include "qbm/bxs.hpp"
#include "qbm/error.hpp"

using namespace qbm;

TEST_CASE("2x2 multiset has 16 images and 10 distinct") {
    const auto d = generate_bxs_multiset(2, 2);
    CHECK(d.size() == 16);
    CHECK(distinct_count(d) == 10);
}

TEST_CASE("6x6 multiset") {
    const auto d = generate_bxs_multiset(6, 6);
    CHECK(d.size() == 4096);
    CHECK(distinct_count(d) == 3970);
    for (const auto& img : d.images()) {
        REQUIRE(is_bxs(img));
    }
}

TEST_CASE("distinct count formula for rectangles") {
    for (int p = 1; p <= 5; ++p) {
        for (int q = 1; q <= 5; ++q) {
            const std::size_t expect = ((1u << p) - 1) * ((1u << q) - 1) + 1;
            CHECK(distinct_count(generate_bxs_multiset(p, q)) == expect);
        }
    }
}

TEST_CASE("oversized enumeration is rejected") {
    CHECK_THROWS_AS(generate_bxs_multiset(12, 13), Error);
}

TEST_CASE("is_bxs on hand-made images") {
    CHECK(is_bxs(BxsImage::from_bits(3, 3, "000000000")));
    CHECK(is_bxs(BxsImage::from_bits(3, 3, "111010010")));
    CHECK_FALSE(is_bxs(BxsImage::from_bits(3, 3, "100000000")));
    CHECK_FALSE(is_bxs(BxsImage::from_bits(3, 3, "110000000")));
}

TEST_CASE("spin encoding round trip") {
    const auto img = BxsImage::from_bits(3, 2, "101100");
    const auto s = encode_spins(img);
    CHECK(s == SpinVector{1, -1, 1, 1, -1, -1});
    CHECK(decode_spins(s, 3, 2) == img);
    SpinVector longer = s;
    longer.push_back(1);
    CHECK(decode_spins(longer, 3, 2) == img);
}

TEST_CASE("minibatch stream covers each epoch exactly once") {
    MiniBatchStream stream(10, 3, 7);
    CHECK(stream.batches_per_epoch() == 4);
    std::multiset<std::size_t> seen;
    for (int b = 0; b < 4; ++b) {
        const auto batch = stream.next();
        CHECK(batch.epoch == 0);
        seen.insert(batch.indices.begin(), batch.indices.end());
    }
    CHECK(seen.size() == 10);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 10);
    CHECK(stream.next().epoch == 1);
}

TEST_CASE("minibatch determinism and bad sizes") {
    MiniBatchStream a(50, 8, 3), b(50, 8, 3);
    for (int i = 0; i < 20; ++i) {
        CHECK(a.next().indices == b.next().indices);
    }
    CHECK_THROWS_AS(MiniBatchStream(5, 0, 1), Error);
    CHECK_THROWS_AS(MiniBatchStream(5, 6, 1), Error);
}

TEST_CASE("epoch accounting for budget 40 at k=32") {
    MiniBatchStream coreset(128, 32, 0);
    for (int u = 0; u < 40; ++u) {
        coreset.next();
    }
    CHECK(coreset.epoch() == 9); // the 40th batch closes the tenth epoch
    std::size_t seen = 0;
    MiniBatchStream full(4096, 32, 0);
    for (int u = 0; u < 40; ++u) {
        seen += full.next().indices.size();
    }
    CHECK(seen == 1280);
    CHECK(full.epoch() == 0);
}

TEST_CASE("dataset JSONL round trip") {
    const auto d = generate_bxs_multiset(3, 2);
    std::stringstream ss;
    write_dataset_jsonl(ss, d);
    const auto back = read_dataset_jsonl(ss);
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back[i] == d[i]);
    }
}
