#pragma once

#include <string>
#include <vector>

#include "ctxseg/errors.hpp"
#include "ctxseg/image.hpp"
#include "ctxseg/stf.hpp"

namespace ctxseg {

// Whole-image descriptors used by the scene recognizer and the image-level
// prior. Dimensions never depend on image size.

constexpr int kColorHistogramBins = 16;
constexpr int kSpatialGrid = 4;
constexpr int kColorGridDim = 3 * kColorHistogramBins + kSpatialGrid * kSpatialGrid * 3;  // 96

// L1-normalized per-channel 16-bin color histograms (each channel's bins sum
// to 1) plus a 4x4 grid of mean RGB scaled to [0,1]. Every entry lives in
// [0,1] and nothing depends on the image size.
inline std::vector<double> extract_color_grid(const RgbImage& img) {
    std::vector<double> v(kColorGridDim, 0.0);
    const double npx = static_cast<double>(img.pixel_count());

    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                v[c * kColorHistogramBins + img.at(x, y, c) / kColorHistogramBins] += 1.0;
    for (int i = 0; i < 3 * kColorHistogramBins; ++i) v[i] /= npx;

    const int base = 3 * kColorHistogramBins;
    for (int gy = 0; gy < kSpatialGrid; ++gy) {
        for (int gx = 0; gx < kSpatialGrid; ++gx) {
            const int x0 = img.width * gx / kSpatialGrid;
            const int x1 = img.width * (gx + 1) / kSpatialGrid;
            const int y0 = img.height * gy / kSpatialGrid;
            const int y1 = img.height * (gy + 1) / kSpatialGrid;
            double sum[3] = {0, 0, 0};
            int count = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x, ++count)
                    for (int c = 0; c < 3; ++c) sum[c] += img.at(x, y, c);
            const int cell = base + (gy * kSpatialGrid + gx) * 3;
            for (int c = 0; c < 3; ++c)
                v[cell + c] = count > 0 ? sum[c] / (255.0 * count) : 0.0;
        }
    }
    return v;
}

// Normalized histogram of forest leaf ordinals over all pixels: a
// texton-occurrence signature of the image.
inline std::vector<double> extract_texton_histogram(const TextonForest& forest,
                                                    const RgbImage& img) {
    std::vector<double> hist(forest.leaf_count, 0.0);
    std::vector<int> ordinals;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            forest.leaf_ordinals(img, x, y, ordinals);
            for (int o : ordinals) hist[o] += 1.0;
        }
    }
    const double total = static_cast<double>(img.pixel_count()) * forest.trees.size();
    for (double& h : hist) h /= total;
    return hist;
}

// Registered extractors:
//   "color_grid"   - color histogram + spatial grid, dimension 96
//   "texton_color" - texton histogram over a forest's leaves ++ color_grid
class GlobalFeatureExtractor {
public:
    GlobalFeatureExtractor() = default;
    GlobalFeatureExtractor(std::string id, const TextonForest* forest = nullptr)
        : id_(std::move(id)), forest_(forest) {
        if (id_ == "color_grid") {
            dim_ = kColorGridDim;
        } else if (id_ == "texton_color") {
            require(forest_ != nullptr, "texton_color extractor needs a trained forest");
            dim_ = forest_->leaf_count + kColorGridDim;
        } else {
            throw DataError("unknown feature extractor: " + id_);
        }
    }

    std::vector<double> extract(const RgbImage& img) const {
        if (id_ == "color_grid") return extract_color_grid(img);
        std::vector<double> v = extract_texton_histogram(*forest_, img);
        const std::vector<double> color = extract_color_grid(img);
        v.insert(v.end(), color.begin(), color.end());
        return v;
    }

    const std::string& id() const { return id_; }
    int dim() const { return dim_; }

private:
    std::string id_;
    const TextonForest* forest_ = nullptr;
    int dim_ = 0;
};

}  // namespace ctxseg
