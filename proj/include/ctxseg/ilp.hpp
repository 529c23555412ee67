#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ctxseg/dataset.hpp"
#include "ctxseg/errors.hpp"
#include "ctxseg/features.hpp"
#include "ctxseg/rng.hpp"
#include "ctxseg/serialize.hpp"

namespace ctxseg {

// Image-level prior: multi-label randomized trees over global image features.
// Leaves store independent per-class presence frequencies, not a distribution.

using PresenceVector = std::vector<double>;  // length C, each entry in [0,1]

// Gini impurity of one class over a set of presence indicators.
inline double gini_k(int present, int total) {
    require(total >= 1, "gini of an empty node is undefined");
    const double p = static_cast<double>(present) / total;
    return 2.0 * p * (1.0 - p);
}

// Post-split impurity for one class: plain sum of the child Ginis, with no
// size weighting. The weighted variant is available behind a flag.
inline double split_gini_k(int left_present, int left_total, int right_present, int right_total,
                           bool weighted = false) {
    require(left_total >= 1 && right_total >= 1, "split with an empty side");
    const double gl = gini_k(left_present, left_total);
    const double gr = gini_k(right_present, right_total);
    if (!weighted) return gl + gr;
    const double n = left_total + right_total;
    return (left_total / n) * gl + (right_total / n) * gr;
}

// Mean per-class Gini reduction of a split.
inline double score_split(const std::vector<int>& parent_present,
                          const std::vector<int>& left_present,
                          const std::vector<int>& right_present, int parent_total, int left_total,
                          int right_total, bool weighted = false) {
    const int c = static_cast<int>(parent_present.size());
    require(c >= 1, "score_split needs at least one class");
    double score = 0.0;
    for (int k = 0; k < c; ++k) {
        score += gini_k(parent_present[k], parent_total) -
                 split_gini_k(left_present[k], left_total, right_present[k], right_total, weighted);
    }
    return score / c;
}

struct IlpParams {
    int tree_count = 50;
    int max_depth = 12;
    int candidates_per_node = 64;
    bool weighted_split = false;  // size-weighted child Ginis instead of the plain sum
    double presence_min_pixels = 50.0;
    double presence_min_fraction = 0.001;

    void validate() const {
        require(tree_count >= 1 && max_depth >= 0 && candidates_per_node >= 1,
                "bad ILP parameters");
    }
};

// Class k counts as present when it covers at least min(50, 0.1% of pixels)
// non-void pixels; tiny slivers of labeling noise do not define presence.
inline std::vector<std::uint8_t> presence_from_labels(const LabelImage& labels, int class_count,
                                                      const IlpParams& params) {
    std::vector<int> count(class_count, 0);
    for (std::uint8_t v : labels.labels)
        if (v != kVoidLabel && v < class_count) ++count[v];
    const double threshold = std::max(
        1.0, std::min(params.presence_min_pixels,
                      params.presence_min_fraction * static_cast<double>(labels.pixel_count())));
    std::vector<std::uint8_t> present(class_count, 0);
    for (int k = 0; k < class_count; ++k) present[k] = count[k] >= threshold ? 1 : 0;
    return present;
}

struct IlpNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1, right = -1;
    std::vector<double> freqs;  // leaves: per-class presence frequency

    bool is_leaf() const { return left < 0; }
};

struct IlpTree {
    std::vector<IlpNode> nodes;

    const IlpNode& leaf_for(const std::vector<double>& x) const {
        int i = 0;
        while (!nodes[i].is_leaf())
            i = x[nodes[i].feature] > nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i];
    }
};

class PresenceForest {
public:
    std::vector<IlpTree> trees;
    int class_count = 0;
    int feature_dim = 0;

    PresenceVector predict(const std::vector<double>& x) const {
        PresenceVector out(class_count, 0.0);
        for (const auto& t : trees) {
            const auto& leaf = t.leaf_for(x);
            for (int k = 0; k < class_count; ++k) out[k] += leaf.freqs[k];
        }
        for (auto& v : out) v /= static_cast<double>(trees.size());
        return out;
    }
};

namespace detail {

class IlpTrainer {
public:
    IlpTrainer(const std::vector<std::vector<double>>& features,
               const std::vector<std::vector<std::uint8_t>>& presence, int class_count,
               const IlpParams& params, std::uint64_t seed)
        : features_(features),
          presence_(presence),
          class_count_(class_count),
          params_(params),
          rng_(seed) {}

    IlpTree grow() {
        std::vector<int> rows(features_.size());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
        IlpTree tree;
        grow_node(tree, std::move(rows), 0);
        return tree;
    }

private:
    std::vector<int> present_counts(const std::vector<int>& rows) const {
        std::vector<int> counts(class_count_, 0);
        for (int r : rows)
            for (int k = 0; k < class_count_; ++k) counts[k] += presence_[r][k];
        return counts;
    }

    int grow_node(IlpTree& tree, std::vector<int> rows, int depth) {
        const int index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        const auto parent_counts = present_counts(rows);
        const int n = static_cast<int>(rows.size());

        double best_score = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        if (depth < params_.max_depth && n >= 2) {
            for (int cand = 0; cand < params_.candidates_per_node; ++cand) {
                const int f = static_cast<int>(rng_.next_below(features_[rows[0]].size()));
                double lo = 1e300, hi = -1e300;
                for (int r : rows) {
                    lo = std::min(lo, features_[r][f]);
                    hi = std::max(hi, features_[r][f]);
                }
                if (lo == hi) continue;
                const double thr = rng_.uniform_real(lo, hi);

                std::vector<int> left_counts(class_count_, 0);
                int n_left = 0;
                for (int r : rows) {
                    if (features_[r][f] > thr) {
                        ++n_left;
                        for (int k = 0; k < class_count_; ++k) left_counts[k] += presence_[r][k];
                    }
                }
                if (n_left == 0 || n_left == n) continue;

                double score = 0.0;
                for (int k = 0; k < class_count_; ++k) {
                    score += gini_k(parent_counts[k], n) -
                             split_gini_k(left_counts[k], n_left, parent_counts[k] - left_counts[k],
                                          n - n_left, params_.weighted_split);
                }
                score /= class_count_;
                if (score > best_score) {  // strictly positive scores only; ties keep the first
                    best_score = score;
                    best_feature = f;
                    best_threshold = thr;
                }
            }
        }

        if (best_feature < 0) {
            auto& leaf = tree.nodes[index];
            leaf.freqs.resize(class_count_);
            for (int k = 0; k < class_count_; ++k)
                leaf.freqs[k] = static_cast<double>(parent_counts[k]) / n;
            return index;
        }

        std::vector<int> left, right;
        for (int r : rows)
            (features_[r][best_feature] > best_threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[index].feature = best_feature;
        tree.nodes[index].threshold = best_threshold;
        const int li = grow_node(tree, std::move(left), depth + 1);
        const int ri = grow_node(tree, std::move(right), depth + 1);
        tree.nodes[index].left = li;
        tree.nodes[index].right = ri;
        return index;
    }

    const std::vector<std::vector<double>>& features_;
    const std::vector<std::vector<std::uint8_t>>& presence_;
    int class_count_;
    const IlpParams& params_;
    Rng rng_;
};

}  // namespace detail

inline PresenceForest train_presence_forest(const std::vector<std::vector<double>>& features,
                                            const std::vector<std::vector<std::uint8_t>>& presence,
                                            int class_count, const IlpParams& params,
                                            std::uint64_t seed) {
    params.validate();
    require(features.size() >= 2, "image-level prior needs at least 2 training images");
    require(features.size() == presence.size(), "features/presence size mismatch");

    PresenceForest forest;
    forest.class_count = class_count;
    forest.feature_dim = static_cast<int>(features[0].size());
    forest.trees.reserve(params.tree_count);
    for (int t = 0; t < params.tree_count; ++t) {
        detail::IlpTrainer trainer(features, presence, class_count, params,
                                   Rng::derive(seed, static_cast<std::uint64_t>(t)));
        forest.trees.push_back(trainer.grow());
    }
    return forest;
}

// The deployed prior: either one multi-label forest trained on all classes
// jointly ("context"), or C independent single-class forests ("multiclass").
struct IlpModel {
    std::string variant = "context";
    std::string feature_id = "texton_color";
    int class_count = 0;
    std::vector<PresenceForest> forests;  // 1 forest (context) or C forests (multiclass)

    PresenceVector predict(const std::vector<double>& x) const {
        if (variant == "context") return forests[0].predict(x);
        PresenceVector out(class_count, 0.0);
        for (int k = 0; k < class_count; ++k) out[k] = forests[k].predict(x)[0];
        return out;
    }
};

inline IlpModel train_ilp(const std::vector<LabeledImage>& data,
                          const GlobalFeatureExtractor& extractor, int class_count,
                          const IlpParams& params, const std::string& variant,
                          std::uint64_t seed) {
    require(variant == "context" || variant == "multiclass", "unknown ILP variant: " + variant);
    require(data.size() >= 2, "image-level prior needs at least 2 training images");

    std::vector<std::vector<double>> features;
    std::vector<std::vector<std::uint8_t>> presence;
    features.reserve(data.size());
    presence.reserve(data.size());
    for (const auto& li : data) {
        features.push_back(extractor.extract(li.image));
        presence.push_back(presence_from_labels(li.labels, class_count, params));
    }

    IlpModel model;
    model.variant = variant;
    model.feature_id = extractor.id();
    model.class_count = class_count;
    if (variant == "context") {
        model.forests.push_back(
            train_presence_forest(features, presence, class_count, params, seed));
    } else {
        for (int k = 0; k < class_count; ++k) {
            std::vector<std::vector<std::uint8_t>> single(presence.size());
            for (std::size_t i = 0; i < presence.size(); ++i) single[i] = {presence[i][k]};
            model.forests.push_back(train_presence_forest(
                features, single, 1, params, Rng::derive(seed, 1000 + k)));
        }
    }
    return model;
}

// ---- serialization ----------------------------------------------------------

inline void write_ilp(BinaryWriter& w, const IlpModel& m) {
    write_envelope(w, PayloadKind::presence_forest);
    w.str(m.variant);
    w.str(m.feature_id);
    w.i32(m.class_count);
    w.u32(static_cast<std::uint32_t>(m.forests.size()));
    for (const auto& f : m.forests) {
        w.i32(f.class_count);
        w.i32(f.feature_dim);
        w.u32(static_cast<std::uint32_t>(f.trees.size()));
        for (const auto& t : f.trees) {
            w.u32(static_cast<std::uint32_t>(t.nodes.size()));
            for (const auto& node : t.nodes) {
                w.i32(node.feature);
                w.f64(node.threshold);
                w.i32(node.left);
                w.i32(node.right);
                if (node.is_leaf()) w.f64_vec(node.freqs);
            }
        }
    }
}

inline IlpModel read_ilp(BinaryReader& r) {
    read_envelope(r, PayloadKind::presence_forest);
    IlpModel m;
    m.variant = r.str();
    m.feature_id = r.str();
    m.class_count = r.i32();
    m.forests.resize(r.u32());
    for (auto& f : m.forests) {
        f.class_count = r.i32();
        f.feature_dim = r.i32();
        f.trees.resize(r.u32());
        for (auto& t : f.trees) {
            t.nodes.resize(r.u32());
            for (auto& node : t.nodes) {
                node.feature = r.i32();
                node.threshold = r.f64();
                node.left = r.i32();
                node.right = r.i32();
                if (node.is_leaf()) node.freqs = r.f64_vec();
            }
        }
    }
    return m;
}

}  // namespace ctxseg
