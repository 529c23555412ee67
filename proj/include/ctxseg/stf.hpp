#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxseg/dataset.hpp"
#include "ctxseg/errors.hpp"
#include "ctxseg/image.hpp"
#include "ctxseg/rng.hpp"
#include "ctxseg/serialize.hpp"

namespace ctxseg {

using ClassDistribution = std::vector<double>;

// Split test over raw pixel values of a small patch around the query pixel.
// Offsets outside the image clamp to the border.
struct PatchTest {
    enum class Kind : std::uint8_t { value = 0, sum = 1, diff = 2, abs_diff = 3 };

    Kind kind = Kind::value;
    std::int8_t dx0 = 0, dy0 = 0;
    std::int8_t dx1 = 0, dy1 = 0;
    std::uint8_t ch0 = 0, ch1 = 0;
    double threshold = 0.0;

    double feature(const RgbImage& img, int cx, int cy) const {
        const double a = img.at_clamped(cx + dx0, cy + dy0, ch0);
        switch (kind) {
            case Kind::value: return a;
            case Kind::sum: return a + img.at_clamped(cx + dx1, cy + dy1, ch1);
            case Kind::diff: return a - img.at_clamped(cx + dx1, cy + dy1, ch1);
            case Kind::abs_diff: return std::abs(a - img.at_clamped(cx + dx1, cy + dy1, ch1));
        }
        return a;
    }

    bool operator()(const RgbImage& img, int cx, int cy) const {
        return feature(img, cx, cy) > threshold;
    }
};

inline bool eval_patch_test(const RgbImage& img, int cx, int cy, const PatchTest& t) {
    return t(img, cx, cy);
}

struct StfParams {
    int patch_size = 21;  // window side d; offsets range over [-d/2, d/2]
    int tree_count = 5;
    int max_depth = 10;
    int candidates_per_node = 400;
    int min_samples_leaf = 5;
    int pixel_stride = 3;  // training pixels are taken on this grid

    void validate() const {
        require(patch_size >= 1 && patch_size % 2 == 1, "patch_size must be odd and >= 1");
        require(tree_count >= 1, "tree_count must be >= 1");
        require(max_depth >= 0, "max_depth must be >= 0");
        require(candidates_per_node >= 1, "candidates_per_node must be >= 1");
        require(min_samples_leaf >= 1, "min_samples_leaf must be >= 1");
        require(pixel_stride >= 1, "pixel_stride must be >= 1");
    }
};

// Node of one extremely randomized tree. Leaves hold a Laplace-smoothed class
// distribution plus the raw sample count that reached them.
struct StfNode {
    PatchTest test;
    std::int32_t left = -1;   // -1 on leaves
    std::int32_t right = -1;
    std::int32_t leaf_ordinal = -1;  // forest-wide leaf index, assigned after training
    std::uint32_t sample_count = 0;
    ClassDistribution dist;  // leaves only

    bool is_leaf() const { return left < 0; }
};

struct StfTree {
    std::vector<StfNode> nodes;  // nodes[0] is the root

    int walk_to_leaf(const RgbImage& img, int x, int y) const {
        int i = 0;
        while (!nodes[i].is_leaf())
            i = nodes[i].test(img, x, y) ? nodes[i].left : nodes[i].right;
        return i;
    }
};

class TextonForest {
public:
    std::vector<StfTree> trees;
    StfParams params;
    int class_count = 0;
    int leaf_count = 0;  // total leaves across all trees

    // Average of the reached leaves' class distributions; always sums to 1.
    ClassDistribution classify_pixel(const RgbImage& img, int x, int y) const {
        ClassDistribution out(class_count, 0.0);
        for (const auto& tree : trees) {
            const StfNode& leaf = tree.nodes[tree.walk_to_leaf(img, x, y)];
            for (int c = 0; c < class_count; ++c) out[c] += leaf.dist[c];
        }
        const double inv = 1.0 / static_cast<double>(trees.size());
        for (auto& v : out) v *= inv;
        return out;
    }

    std::vector<ClassDistribution> classify_image(const RgbImage& img) const {
        evaluations_.fetch_add(1, std::memory_order_relaxed);
        std::vector<ClassDistribution> grid(img.pixel_count());
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                grid[static_cast<std::size_t>(y) * img.width + x] = classify_pixel(img, x, y);
        return grid;
    }

    // Forest-wide leaf ordinal per (pixel, tree); the texton-occurrence
    // feature builds its histogram from these.
    void leaf_ordinals(const RgbImage& img, int x, int y, std::vector<int>& out) const {
        out.clear();
        for (const auto& tree : trees)
            out.push_back(tree.nodes[tree.walk_to_leaf(img, x, y)].leaf_ordinal);
    }

    std::uint64_t evaluation_count() const { return evaluations_.load(std::memory_order_relaxed); }
    void reset_evaluation_count() const { evaluations_.store(0, std::memory_order_relaxed); }

    TextonForest() = default;
    TextonForest(const TextonForest& o)
        : trees(o.trees), params(o.params), class_count(o.class_count), leaf_count(o.leaf_count) {}
    TextonForest& operator=(const TextonForest& o) {
        trees = o.trees;
        params = o.params;
        class_count = o.class_count;
        leaf_count = o.leaf_count;
        return *this;
    }
    TextonForest(TextonForest&&) = default;
    TextonForest& operator=(TextonForest&&) = default;

private:
    mutable std::atomic<std::uint64_t> evaluations_{0};  // instrumentation only
};

namespace detail {

struct PixelSample {
    std::uint16_t image;
    std::uint16_t x, y;
    std::uint8_t label;
};

inline double entropy(const std::vector<std::uint32_t>& counts, std::uint32_t total) {
    if (total == 0) return 0.0;
    double h = 0.0;
    for (std::uint32_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log2(p);
    }
    return h;
}

class StfTrainer {
public:
    StfTrainer(const std::vector<LabeledImage>& data, const StfParams& params, int class_count,
               std::uint64_t seed)
        : data_(data), params_(params), class_count_(class_count), rng_(seed) {}

    StfTree grow(std::vector<PixelSample> samples) {
        StfTree tree;
        tree.nodes.reserve(64);
        grow_node(tree, std::move(samples), 0);
        return tree;
    }

private:
    int grow_node(StfTree& tree, std::vector<PixelSample> samples, int depth) {
        const int index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[index].sample_count = static_cast<std::uint32_t>(samples.size());

        std::vector<std::uint32_t> counts(class_count_, 0);
        for (const auto& s : samples) ++counts[s.label];
        const bool pure = std::count_if(counts.begin(), counts.end(),
                                        [](std::uint32_t c) { return c > 0; }) <= 1;

        if (depth >= params_.max_depth || pure ||
            samples.size() < static_cast<std::size_t>(2 * params_.min_samples_leaf)) {
            make_leaf(tree.nodes[index], counts);
            return index;
        }

        PatchTest best;
        double best_gain = 0.0;
        bool found = false;
        const double parent_h = entropy(counts, static_cast<std::uint32_t>(samples.size()));
        std::vector<double> features(samples.size());

        for (int cand = 0; cand < params_.candidates_per_node; ++cand) {
            PatchTest t = random_test();
            double lo = 1e300, hi = -1e300;
            for (std::size_t i = 0; i < samples.size(); ++i) {
                const auto& s = samples[i];
                features[i] = t.feature(data_[s.image].image, s.x, s.y);
                lo = std::min(lo, features[i]);
                hi = std::max(hi, features[i]);
            }
            if (lo == hi) continue;  // constant feature on this node's sample
            t.threshold = rng_.uniform_real(lo, hi);

            std::vector<std::uint32_t> left_counts(class_count_, 0);
            std::uint32_t n_left = 0;
            for (std::size_t i = 0; i < samples.size(); ++i) {
                if (features[i] > t.threshold) {
                    ++left_counts[samples[i].label];
                    ++n_left;
                }
            }
            const std::uint32_t n = static_cast<std::uint32_t>(samples.size());
            const std::uint32_t n_right = n - n_left;
            if (n_left < static_cast<std::uint32_t>(params_.min_samples_leaf) ||
                n_right < static_cast<std::uint32_t>(params_.min_samples_leaf))
                continue;

            std::vector<std::uint32_t> right_counts(class_count_);
            for (int c = 0; c < class_count_; ++c) right_counts[c] = counts[c] - left_counts[c];
            const double gain = parent_h - (n_left * entropy(left_counts, n_left) +
                                            n_right * entropy(right_counts, n_right)) /
                                               n;
            if (gain > best_gain) {  // strict: ties keep the first candidate
                best_gain = gain;
                best = t;
                found = true;
            }
        }

        if (!found) {
            make_leaf(tree.nodes[index], counts);
            return index;
        }

        std::vector<PixelSample> left, right;
        left.reserve(samples.size());
        right.reserve(samples.size());
        for (const auto& s : samples) {
            if (best.feature(data_[s.image].image, s.x, s.y) > best.threshold)
                left.push_back(s);
            else
                right.push_back(s);
        }
        samples.clear();
        samples.shrink_to_fit();

        tree.nodes[index].test = best;
        const int li = grow_node(tree, std::move(left), depth + 1);
        const int ri = grow_node(tree, std::move(right), depth + 1);
        tree.nodes[index].left = li;
        tree.nodes[index].right = ri;
        return index;
    }

    void make_leaf(StfNode& node, const std::vector<std::uint32_t>& counts) {
        node.dist.assign(class_count_, 0.0);
        double total = 0.0;
        for (int c = 0; c < class_count_; ++c) total += counts[c] + 1.0;  // add-one smoothing
        for (int c = 0; c < class_count_; ++c) node.dist[c] = (counts[c] + 1.0) / total;
    }

    PatchTest random_test() {
        PatchTest t;
        const int r = params_.patch_size / 2;
        t.kind = static_cast<PatchTest::Kind>(rng_.next_below(4));
        t.dx0 = static_cast<std::int8_t>(rng_.uniform_int(-r, r));
        t.dy0 = static_cast<std::int8_t>(rng_.uniform_int(-r, r));
        t.ch0 = static_cast<std::uint8_t>(rng_.next_below(3));
        if (t.kind != PatchTest::Kind::value) {
            t.dx1 = static_cast<std::int8_t>(rng_.uniform_int(-r, r));
            t.dy1 = static_cast<std::int8_t>(rng_.uniform_int(-r, r));
            t.ch1 = static_cast<std::uint8_t>(rng_.next_below(3));
        }
        return t;
    }

    const std::vector<LabeledImage>& data_;
    const StfParams& params_;
    int class_count_;
    Rng rng_;
};

}  // namespace detail

// Grows an extremely randomized forest on raw-patch tests. Each tree samples
// training pixels on the stride grid with its own random grid offset, then
// greedily picks the best of `candidates_per_node` random tests by Shannon
// information gain. Deterministic for a fixed seed.
inline TextonForest train_stf(const std::vector<LabeledImage>& data, const StfParams& params,
                              int class_count, std::uint64_t seed) {
    params.validate();
    require(class_count >= 2, "training needs at least 2 classes");
    require(!data.empty(), "training set is empty");
    for (const auto& li : data)
        require(static_cast<int>(li.image.width) == li.labels.width &&
                    static_cast<int>(li.image.height) == li.labels.height,
                "image/label dimension mismatch");

    TextonForest forest;
    forest.params = params;
    forest.class_count = class_count;

    for (int tree_index = 0; tree_index < params.tree_count; ++tree_index) {
        const std::uint64_t tree_seed = Rng::derive(seed, static_cast<std::uint64_t>(tree_index));
        Rng offsets_rng(Rng::derive(tree_seed, 0xa11));
        const int ox = static_cast<int>(offsets_rng.next_below(params.pixel_stride));
        const int oy = static_cast<int>(offsets_rng.next_below(params.pixel_stride));

        std::vector<detail::PixelSample> samples;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& li = data[i];
            for (int y = oy; y < li.labels.height; y += params.pixel_stride) {
                for (int x = ox; x < li.labels.width; x += params.pixel_stride) {
                    const std::uint8_t lab = li.labels.at(x, y);
                    if (lab == kVoidLabel) continue;
                    require(lab < class_count, "label out of range in training data");
                    samples.push_back({static_cast<std::uint16_t>(i), static_cast<std::uint16_t>(x),
                                       static_cast<std::uint16_t>(y), lab});
                }
            }
        }
        require(!samples.empty(), "no labeled (non-void) training pixels");

        detail::StfTrainer trainer(data, params, class_count, tree_seed);
        forest.trees.push_back(trainer.grow(std::move(samples)));
    }

    int ordinal = 0;
    for (auto& tree : forest.trees)
        for (auto& node : tree.nodes)
            if (node.is_leaf()) node.leaf_ordinal = ordinal++;
    forest.leaf_count = ordinal;
    return forest;
}

// ---- serialization ----------------------------------------------------------

inline void write_forest(BinaryWriter& w, const TextonForest& f) {
    write_envelope(w, PayloadKind::texton_forest);
    w.i32(f.class_count);
    w.i32(f.leaf_count);
    w.i32(f.params.patch_size);
    w.i32(f.params.tree_count);
    w.i32(f.params.max_depth);
    w.i32(f.params.candidates_per_node);
    w.i32(f.params.min_samples_leaf);
    w.i32(f.params.pixel_stride);
    w.u32(static_cast<std::uint32_t>(f.trees.size()));
    for (const auto& tree : f.trees) {
        w.u32(static_cast<std::uint32_t>(tree.nodes.size()));
        for (const auto& n : tree.nodes) {
            w.i32(n.left);
            w.i32(n.right);
            w.i32(n.leaf_ordinal);
            w.u32(n.sample_count);
            w.u8(static_cast<std::uint8_t>(n.test.kind));
            w.u8(static_cast<std::uint8_t>(n.test.dx0));
            w.u8(static_cast<std::uint8_t>(n.test.dy0));
            w.u8(static_cast<std::uint8_t>(n.test.dx1));
            w.u8(static_cast<std::uint8_t>(n.test.dy1));
            w.u8(n.test.ch0);
            w.u8(n.test.ch1);
            w.f64(n.test.threshold);
            if (n.is_leaf())
                w.f64_vec(n.dist);
        }
    }
}

inline TextonForest read_forest(BinaryReader& r) {
    read_envelope(r, PayloadKind::texton_forest);
    TextonForest f;
    f.class_count = r.i32();
    f.leaf_count = r.i32();
    f.params.patch_size = r.i32();
    f.params.tree_count = r.i32();
    f.params.max_depth = r.i32();
    f.params.candidates_per_node = r.i32();
    f.params.min_samples_leaf = r.i32();
    f.params.pixel_stride = r.i32();
    const std::uint32_t trees = r.u32();
    f.trees.resize(trees);
    for (auto& tree : f.trees) {
        const std::uint32_t count = r.u32();
        tree.nodes.resize(count);
        for (auto& n : tree.nodes) {
            n.left = r.i32();
            n.right = r.i32();
            n.leaf_ordinal = r.i32();
            n.sample_count = r.u32();
            n.test.kind = static_cast<PatchTest::Kind>(r.u8());
            n.test.dx0 = static_cast<std::int8_t>(r.u8());
            n.test.dy0 = static_cast<std::int8_t>(r.u8());
            n.test.dx1 = static_cast<std::int8_t>(r.u8());
            n.test.dy1 = static_cast<std::int8_t>(r.u8());
            n.test.ch0 = r.u8();
            n.test.ch1 = r.u8();
            n.test.threshold = r.f64();
            if (n.is_leaf())
                n.dist = r.f64_vec();
        }
    }
    return f;
}

inline std::string forest_bytes(const TextonForest& f) {
    BinaryWriter w;
    write_forest(w, f);
    return w.buffer();
}

inline void save_forest(const TextonForest& f, const std::string& path) {
    BinaryWriter w;
    write_forest(w, f);
    w.save(path);
}

inline TextonForest load_forest(const std::string& path) {
    BinaryReader r = BinaryReader::from_file(path);
    return read_forest(r);
}

// Human-readable dump for debugging; not meant to be read back.
inline nlohmann::json forest_debug_json(const TextonForest& f) {
    nlohmann::json j;
    j["class_count"] = f.class_count;
    j["leaf_count"] = f.leaf_count;
    j["params"] = {{"patch_size", f.params.patch_size},
                   {"tree_count", f.params.tree_count},
                   {"max_depth", f.params.max_depth},
                   {"candidates_per_node", f.params.candidates_per_node},
                   {"min_samples_leaf", f.params.min_samples_leaf},
                   {"pixel_stride", f.params.pixel_stride}};
    j["trees"] = nlohmann::json::array();
    static const char* kind_names[] = {"value", "sum", "diff", "abs_diff"};
    for (const auto& tree : f.trees) {
        nlohmann::json jt = nlohmann::json::array();
        for (const auto& n : tree.nodes) {
            nlohmann::json jn;
            if (n.is_leaf()) {
                jn["leaf"] = n.leaf_ordinal;
                jn["samples"] = n.sample_count;
                jn["dist"] = n.dist;
            } else {
                jn["kind"] = kind_names[static_cast<int>(n.test.kind)];
                jn["off0"] = {n.test.dx0, n.test.dy0};
                jn["off1"] = {n.test.dx1, n.test.dy1};
                jn["channels"] = {n.test.ch0, n.test.ch1};
                jn["threshold"] = n.test.threshold;
                jn["left"] = n.left;
                jn["right"] = n.right;
            }
            jt.push_back(jn);
        }
        j["trees"].push_back(jt);
    }
    return j;
}

}  // namespace ctxseg
