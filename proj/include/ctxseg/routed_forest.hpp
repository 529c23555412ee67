#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "ctxseg/clustering.hpp"
#include "ctxseg/cooccurrence.hpp"
#include "ctxseg/correlation.hpp"
#include "ctxseg/dataset.hpp"
#include "ctxseg/errors.hpp"
#include "ctxseg/features.hpp"
#include "ctxseg/linear.hpp"
#include "ctxseg/stf.hpp"

namespace ctxseg {

// A bank of specialist forests fronted by a scene recognizer. At test time an
// image costs one recognizer evaluation plus one forest lookup per pixel,
// regardless of how many specialists exist.
class RoutedForest {
public:
    ClusterAssignment assignment;
    LinearClassifier recognizer;
    std::string recognizer_feature = "color_grid";
    std::vector<TextonForest> specialists;  // indexed by cluster id; predict over all classes

    int cluster_count() const { return assignment.cluster_count; }

    int predict_cluster(const GlobalFeatureExtractor& extractor, const RgbImage& img) const {
        recognizer_evals_.fetch_add(1, std::memory_order_relaxed);
        return recognizer.predict(extractor.extract(img));
    }

    // Routes once, then runs only the selected specialist.
    std::vector<ClassDistribution> classify_image(const GlobalFeatureExtractor& extractor,
                                                  const RgbImage& img) const {
        const int k = predict_cluster(extractor, img);
        check_invariant(k >= 0 && k < static_cast<int>(specialists.size()),
                        "recognizer produced an out-of-range cluster");
        return specialists[k].classify_image(img);
    }

    std::uint64_t recognizer_evaluation_count() const {
        return recognizer_evals_.load(std::memory_order_relaxed);
    }
    void reset_counters() const {
        recognizer_evals_.store(0, std::memory_order_relaxed);
        for (const auto& s : specialists) s.reset_evaluation_count();
    }

    RoutedForest() = default;
    RoutedForest(const RoutedForest& o)
        : assignment(o.assignment),
          recognizer(o.recognizer),
          recognizer_feature(o.recognizer_feature),
          specialists(o.specialists) {}
    RoutedForest& operator=(const RoutedForest& o) {
        assignment = o.assignment;
        recognizer = o.recognizer;
        recognizer_feature = o.recognizer_feature;
        specialists = o.specialists;
        return *this;
    }
    RoutedForest(RoutedForest&&) = default;
    RoutedForest& operator=(RoutedForest&&) = default;

private:
    mutable std::atomic<std::uint64_t> recognizer_evals_{0};
};

struct RoutedForestParams {
    StfParams stf;
    double cap_fraction = 0.07;
    int min_cluster_members = 3;
    Linkage linkage = Linkage::average;
    GatherMerge gather_merge = GatherMerge::round_robin;
    std::string recognizer_feature = "color_grid";
    LinearSvmParams svm;
};

// Everything the training run produces, including the intermediate artifacts
// that go into the training report.
struct RoutedForestTraining {
    RoutedForest model;
    TextonForest base_forest;  // single forest over the full set; also the plain-STF baseline
    Matrix omega;
    Matrix psi;
    std::vector<std::vector<int>> gathered;  // per cluster: training image indices
    std::vector<int> zero_variance_classes;
    std::vector<int> classes_absent_from_train;
};

// Full training pipeline: base forest -> class correlation -> distance ->
// clusters -> co-occurrence ranking -> per-cluster image sets -> specialist
// forests + scene recognizer.
inline RoutedForestTraining train_routed_forest(const std::vector<LabeledImage>& data,
                                                const RoutedForestParams& params, int class_count,
                                                std::uint64_t seed) {
    RoutedForestTraining out;
    out.base_forest = train_stf(data, params.stf, class_count, Rng::derive(seed, 1));

    const Matrix obs = collect_leaf_observations(out.base_forest);
    CorrelationResult corr = class_correlation(obs);
    out.omega = std::move(corr.omega);
    out.zero_variance_classes = std::move(corr.zero_variance);
    const Matrix dist = correlation_distance(out.omega);
    out.model.assignment = cluster_classes(dist, params.min_cluster_members, params.linkage);

    std::vector<LabelImage> labels;
    labels.reserve(data.size());
    for (const auto& li : data) labels.push_back(li.labels);
    CooccurrenceResult cooc = class_cooccurrence(labels, class_count);
    out.psi = std::move(cooc.psi);
    out.classes_absent_from_train = std::move(cooc.absent_classes);

    out.gathered = gather_training_sets(out.model.assignment, out.psi, labels,
                                        params.cap_fraction, nullptr, params.gather_merge);

    const int k_clusters = out.model.assignment.cluster_count;
    out.model.recognizer_feature = params.recognizer_feature;
    out.model.specialists.reserve(k_clusters);
    for (int k = 0; k < k_clusters; ++k) {
        check_invariant(!out.gathered[k].empty(), "gathered set for cluster is empty");
        std::vector<LabeledImage> subset;
        subset.reserve(out.gathered[k].size());
        for (int i : out.gathered[k]) subset.push_back(data[i]);
        out.model.specialists.push_back(
            train_stf(subset, params.stf, class_count, Rng::derive(seed, 100 + k)));
    }

    GlobalFeatureExtractor extractor(params.recognizer_feature, &out.base_forest);
    std::vector<std::vector<double>> features;
    std::vector<int> targets;
    for (int k = 0; k < k_clusters; ++k) {
        for (int i : out.gathered[k]) {
            features.push_back(extractor.extract(data[i].image));
            targets.push_back(k);
        }
    }
    out.model.recognizer =
        LinearClassifier::train(features, targets, k_clusters, params.svm, Rng::derive(seed, 7));
    return out;
}

}  // namespace ctxseg
