#include "qbm/bxs.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "qbm/error.hpp"

namespace qbm {

namespace {

void check_dims(int width, int height) {
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::invalid_argument, "image dimensions must be positive");
    }
}

} // namespace

BxsImage::BxsImage(int width, int height)
    : width_(width), height_(height), pixels_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {
    check_dims(width, height);
}

BxsImage::BxsImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    check_dims(width, height);
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw Error(ErrorCode::dimension_mismatch, "pixel count does not match dimensions");
    }
    for (auto px : pixels_) {
        if (px > 1) {
            throw Error(ErrorCode::invalid_argument, "pixels must be 0 or 1");
        }
    }
}

BxsImage BxsImage::from_bits(int width, int height, std::string_view bits) {
    std::vector<std::uint8_t> pixels;
    pixels.reserve(bits.size());
    for (char c : bits) {
        if (c != '0' && c != '1') {
            throw Error(ErrorCode::invalid_argument, "bit string must contain only '0' and '1'");
        }
        pixels.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return BxsImage(width, height, std::move(pixels));
}

std::string BxsImage::bits() const {
    std::string s(pixels_.size(), '0');
    for (std::size_t i = 0; i < pixels_.size(); ++i) {
        s[i] = static_cast<char>('0' + pixels_[i]);
    }
    return s;
}

Dataset::Dataset(int width, int height, std::vector<BxsImage> images)
    : width_(width), height_(height), images_(std::move(images)) {
    check_dims(width, height);
    if (images_.empty()) {
        throw Error(ErrorCode::empty_input, "dataset must contain at least one image");
    }
    for (const auto& img : images_) {
        if (img.width() != width_ || img.height() != height_) {
            throw Error(ErrorCode::dimension_mismatch, "all images in a dataset must share dimensions");
        }
    }
}

WeightedDataset::WeightedDataset(int width, int height, std::vector<BxsImage> points, std::vector<double> weights)
    : width_(width), height_(height), points_(std::move(points)), weights_(std::move(weights)) {
    check_dims(width, height);
    if (points_.empty()) {
        throw Error(ErrorCode::empty_input, "weighted dataset must be nonempty");
    }
    if (points_.size() != weights_.size()) {
        throw Error(ErrorCode::dimension_mismatch, "one weight per point required");
    }
    for (double w : weights_) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw Error(ErrorCode::invalid_argument, "weights must be positive and finite");
        }
    }
    for (const auto& img : points_) {
        if (img.width() != width_ || img.height() != height_) {
            throw Error(ErrorCode::dimension_mismatch, "all points must share dimensions");
        }
    }
}

WeightedDataset WeightedDataset::unit_weights(const Dataset& dataset) {
    return WeightedDataset(dataset.width(), dataset.height(), dataset.images(),
                           std::vector<double>(dataset.size(), 1.0));
}

Dataset generate_bxs_multiset(int width, int height) {
    check_dims(width, height);
    if (width + height > kMaxEnumerationBits) {
        throw Error(ErrorCode::enumeration_too_large,
                    "width + height exceeds " + std::to_string(kMaxEnumerationBits));
    }
    const std::uint32_t row_sets = 1u << height;
    const std::uint32_t col_sets = 1u << width;
    std::vector<BxsImage> images;
    images.reserve(static_cast<std::size_t>(row_sets) * col_sets);
    for (std::uint32_t rows = 0; rows < row_sets; ++rows) {
        for (std::uint32_t cols = 0; cols < col_sets; ++cols) {
            BxsImage img(width, height);
            for (int r = 0; r < height; ++r) {
                for (int c = 0; c < width; ++c) {
                    const bool on = ((rows >> r) & 1u) || ((cols >> c) & 1u);
                    img.set(r, c, on ? 1 : 0);
                }
            }
            images.push_back(std::move(img));
        }
    }
    return Dataset(width, height, std::move(images));
}

bool is_bxs(const BxsImage& image) {
    const int w = image.width();
    const int h = image.height();
    std::vector<bool> full_row(static_cast<std::size_t>(h), true);
    std::vector<bool> full_col(static_cast<std::size_t>(w), true);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (image.at(r, c) == 0) {
                full_row[static_cast<std::size_t>(r)] = false;
                full_col[static_cast<std::size_t>(c)] = false;
            }
        }
    }
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const bool covered = full_row[static_cast<std::size_t>(r)] || full_col[static_cast<std::size_t>(c)];
            if (covered != (image.at(r, c) == 1)) {
                return false;
            }
        }
    }
    return true;
}

std::vector<BxsImage> distinct_images(const std::vector<BxsImage>& images) {
    std::unordered_set<std::string> seen;
    std::vector<BxsImage> out;
    for (const auto& img : images) {
        if (seen.insert(img.bits()).second) {
            out.push_back(img);
        }
    }
    return out;
}

std::size_t distinct_count(const Dataset& dataset) {
    std::unordered_set<std::string> seen;
    for (const auto& img : dataset.images()) {
        seen.insert(img.bits());
    }
    return seen.size();
}

SpinVector encode_spins(const BxsImage& image) {
    SpinVector s(image.size());
    const auto& px = image.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        s[i] = px[i] ? 1 : -1;
    }
    return s;
}

BxsImage decode_spins(std::span<const std::int8_t> spins, int width, int height) {
    if (spins.size() < static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw Error(ErrorCode::dimension_mismatch, "spin vector shorter than image");
    }
    std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = spins[i] > 0 ? 1 : 0;
    }
    return BxsImage(width, height, std::move(px));
}

MiniBatchStream::MiniBatchStream(std::size_t source_size, std::size_t batch_size, std::uint64_t seed)
    : n_(source_size), k_(batch_size), seed_(seed) {
    if (batch_size == 0 || batch_size > source_size) {
        throw Error(ErrorCode::invalid_batch_size,
                    "batch size " + std::to_string(batch_size) + " invalid for source of size " +
                        std::to_string(source_size));
    }
    start_epoch();
}

void MiniBatchStream::start_epoch() {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng = Rng::stream(seed_, epoch_);
    rng.shuffle(std::span<std::size_t>(order_));
    cursor_ = 0;
}

MiniBatchStream::Batch MiniBatchStream::next() {
    if (cursor_ >= n_) {
        ++epoch_;
        start_epoch();
    }
    const std::size_t end = std::min(cursor_ + k_, n_);
    Batch b{{order_.begin() + static_cast<std::ptrdiff_t>(cursor_), order_.begin() + static_cast<std::ptrdiff_t>(end)},
            epoch_};
    cursor_ = end;
    return b;
}

MiniBatchStream minibatches(const Dataset& source, std::size_t batch_size, std::uint64_t seed) {
    return MiniBatchStream(source.size(), batch_size, seed);
}

MiniBatchStream minibatches(const WeightedDataset& source, std::size_t batch_size, std::uint64_t seed) {
    return MiniBatchStream(source.size(), batch_size, seed);
}

void write_dataset_jsonl(std::ostream& out, const Dataset& dataset) {
    for (const auto& img : dataset.images()) {
        nlohmann::json rec = {{"p", img.width()}, {"q", img.height()}, {"bits", img.bits()}};
        out << rec.dump() << '\n';
    }
}

Dataset read_dataset_jsonl(std::istream& in) {
    std::vector<BxsImage> images;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            auto rec = nlohmann::json::parse(line);
            images.push_back(BxsImage::from_bits(rec.at("p").get<int>(), rec.at("q").get<int>(),
                                                 rec.at("bits").get<std::string>()));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::io, "dataset line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (images.empty()) {
        throw Error(ErrorCode::empty_input, "dataset file has no records");
    }
    const int w = images.front().width();
    const int h = images.front().height();
    return Dataset(w, h, std::move(images));
}

} // namespace qbm
