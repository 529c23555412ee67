#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ctxseg/clustering.hpp"
#include "ctxseg/dataset.hpp"
#include "ctxseg/errors.hpp"
#include "ctxseg/matrix.hpp"

namespace ctxseg {

// Which classes have at least one non-void pixel in the image.
inline std::vector<bool> classes_in_image(const LabelImage& labels, int class_count) {
    std::vector<bool> present(class_count, false);
    for (std::uint8_t v : labels.labels)
        if (v != kVoidLabel && v < class_count) present[v] = true;
    return present;
}

struct CooccurrenceResult {
    Matrix psi;                      // psi(x,y) = P(class y present | image containing x)
    std::vector<int> absent_classes; // classes that appear in no training image (zero rows)
};

inline CooccurrenceResult class_cooccurrence(const std::vector<LabelImage>& labels,
                                             int class_count) {
    require(!labels.empty(), "co-occurrence needs at least one training image");
    Matrix joint(class_count, class_count);
    std::vector<int> contains(class_count, 0);
    for (const auto& li : labels) {
        const auto present = classes_in_image(li, class_count);
        for (int x = 0; x < class_count; ++x) {
            if (!present[x]) continue;
            ++contains[x];
            for (int y = 0; y < class_count; ++y)
                if (present[y]) joint(x, y) += 1.0;
        }
    }
    CooccurrenceResult res;
    res.psi = Matrix(class_count, class_count);
    for (int x = 0; x < class_count; ++x) {
        if (contains[x] == 0) {
            res.absent_classes.push_back(x);
            continue;  // row stays all-zero
        }
        for (int y = 0; y < class_count; ++y) res.psi(x, y) = joint(x, y) / contains[x];
    }
    return res;
}

// Relevance of ground-truth image G to class c: sum over non-void pixels of
// the co-occurrence probability between c and the pixel's label.
inline double score_image(int c, const LabelImage& labels, const Matrix& psi) {
    double s = 0.0;
    for (std::uint8_t v : labels.labels)
        if (v != kVoidLabel) s += psi(c, v);
    return s;
}

enum class GatherMerge { round_robin, concatenate };

inline GatherMerge gather_merge_from_string(const std::string& s) {
    if (s == "round_robin") return GatherMerge::round_robin;
    if (s == "concatenate") return GatherMerge::concatenate;
    throw DataError("unknown gather merge rule: " + s);
}

// Per-cluster training image selection. Images are ranked for each member
// class separately by score_image; the per-class lists are merged either by
// round-robin interleaving (default) or by concatenation, de-duplicated, and
// cut off at ceil(cap_fraction * N) images.
inline std::vector<std::vector<int>> gather_training_sets(
    const ClusterAssignment& assignment, const Matrix& psi,
    const std::vector<LabelImage>& train_labels, double cap_fraction = 0.07,
    const std::vector<std::string>* class_names = nullptr,
    GatherMerge merge = GatherMerge::round_robin) {
    require(cap_fraction > 0.0 && cap_fraction <= 1.0, "cap_fraction must be in (0, 1]");
    const int n = static_cast<int>(train_labels.size());
    require(n >= 1, "gathering needs training images");
    // the epsilon keeps ceil(0.07 * 100) from landing on 8
    const int budget = std::max(1, static_cast<int>(std::ceil(cap_fraction * n - 1e-9)));

    const auto clusters = assignment.members();
    std::vector<std::vector<int>> gathered(clusters.size());

    std::vector<std::vector<bool>> presence(n);
    for (int i = 0; i < n; ++i) presence[i] = classes_in_image(train_labels[i], psi.rows);

    for (std::size_t k = 0; k < clusters.size(); ++k) {
        // stable descending sort per class; ties keep dataset order
        std::vector<std::vector<int>> ranked(clusters[k].size());
        for (std::size_t m = 0; m < clusters[k].size(); ++m) {
            const int c = clusters[k][m];
            std::vector<double> scores(n);
            for (int i = 0; i < n; ++i) scores[i] = score_image(c, train_labels[i], psi);
            std::vector<int>& order = ranked[m];
            order.resize(n);
            for (int i = 0; i < n; ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return scores[a] > scores[b]; });
        }

        std::vector<bool> taken(n, false);
        auto& out = gathered[k];
        auto take = [&](int image) {
            if (taken[image] || static_cast<int>(out.size()) >= budget) return;
            taken[image] = true;
            out.push_back(image);
        };
        if (merge == GatherMerge::concatenate) {
            for (const auto& list : ranked)
                for (int image : list) take(image);
        } else {
            std::vector<std::size_t> cursor(ranked.size(), 0);
            bool progress = true;
            while (static_cast<int>(out.size()) < budget && progress) {
                progress = false;
                for (std::size_t m = 0; m < ranked.size() && static_cast<int>(out.size()) < budget;
                     ++m) {
                    auto& cur = cursor[m];
                    while (cur < ranked[m].size() && taken[ranked[m][cur]]) ++cur;
                    if (cur >= ranked[m].size()) continue;
                    take(ranked[m][cur]);
                    ++cur;
                    progress = true;
                }
            }
        }

        // a cluster whose classes appear nowhere would otherwise train on noise
        bool any_signal = false;
        for (int c : clusters[k])
            for (int i = 0; i < n && !any_signal; ++i) any_signal = presence[i][c];
        if (!any_signal) {
            std::string names;
            for (int c : clusters[k]) {
                if (!names.empty()) names += ", ";
                names += class_names ? (*class_names)[c] : std::to_string(c);
            }
            throw DataError("cluster {" + names + "} has no training image containing its classes");
        }
    }
    return gathered;
}

}  // namespace ctxseg
