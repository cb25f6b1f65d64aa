#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qbm/rng.hpp"

namespace qbm {

/// ±1 spin configuration; bit 1 encodes as +1.
using SpinVector = std::vector<std::int8_t>;

/// A width × height binary image, stored row-major.
class BxsImage {
public:
    BxsImage() = default;
    BxsImage(int width, int height);
    BxsImage(int width, int height, std::vector<std::uint8_t> pixels);

    static BxsImage from_bits(int width, int height, std::string_view bits);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return pixels_.size(); }

    std::uint8_t at(int row, int col) const { return pixels_[static_cast<std::size_t>(row * width_ + col)]; }
    void set(int row, int col, std::uint8_t value) { pixels_[static_cast<std::size_t>(row * width_ + col)] = value; }
    const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }

    void flip(std::size_t index) { pixels_[index] ^= 1u; }

    /// Row-major '0'/'1' string.
    std::string bits() const;

    friend bool operator==(const BxsImage&, const BxsImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

class Dataset {
public:
    Dataset(int width, int height, std::vector<BxsImage> images);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return images_.size(); }
    const std::vector<BxsImage>& images() const noexcept { return images_; }
    const BxsImage& operator[](std::size_t i) const { return images_[i]; }

private:
    int width_;
    int height_;
    std::vector<BxsImage> images_;
};

/// Images with positive weights; a coreset, or a dataset with unit weights.
class WeightedDataset {
public:
    WeightedDataset(int width, int height, std::vector<BxsImage> points, std::vector<double> weights);
    static WeightedDataset unit_weights(const Dataset& dataset);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return points_.size(); }
    const std::vector<BxsImage>& points() const noexcept { return points_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

private:
    int width_;
    int height_;
    std::vector<BxsImage> points_;
    std::vector<double> weights_;
};

/// Largest width + height accepted by generate_bxs_multiset.
inline constexpr int kMaxEnumerationBits = 24;

/// One image per (row subset, column subset) pair, duplicates kept:
/// 2^(width + height) images.
Dataset generate_bxs_multiset(int width, int height);

/// True iff the image equals the union of its all-ones rows and columns.
bool is_bxs(const BxsImage& image);

std::size_t distinct_count(const Dataset& dataset);
std::vector<BxsImage> distinct_images(const std::vector<BxsImage>& images);

SpinVector encode_spins(const BxsImage& image);
BxsImage decode_spins(std::span<const std::int8_t> spins, int width, int height);

/// Seeded epoch-by-epoch batching. Each epoch is a fresh permutation drawn
/// from stream (seed, epoch); the last batch of an epoch may be short.
class MiniBatchStream {
public:
    struct Batch {
        std::vector<std::size_t> indices;
        std::size_t epoch;
    };

    MiniBatchStream(std::size_t source_size, std::size_t batch_size, std::uint64_t seed);

    Batch next();

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batches_per_epoch() const noexcept { return (n_ + k_ - 1) / k_; }

private:
    void start_epoch();

    std::size_t n_;
    std::size_t k_;
    std::uint64_t seed_;
    std::size_t epoch_ = 0;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;
};

MiniBatchStream minibatches(const Dataset& source, std::size_t batch_size, std::uint64_t seed);
MiniBatchStream minibatches(const WeightedDataset& source, std::size_t batch_size, std::uint64_t seed);

/// JSON Lines, one {"p", "q", "bits"} record per image.
void write_dataset_jsonl(std::ostream& out, const Dataset& dataset);
Dataset read_dataset_jsonl(std::istream& in);

} // namespace qbm
