#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "ctxseg/clustering.hpp"
#include "ctxseg/cooccurrence.hpp"
#include "ctxseg/correlation.hpp"
#include "ctxseg/features.hpp"
#include "ctxseg/routed_forest.hpp"
#include "ctxseg/rng.hpp"
#include "ctxseg/synth.hpp"
#include "oracles.hpp"

using namespace ctxseg;
namespace fs = std::filesystem;

namespace {

// Hand-built forest: two depth-0 trees with fixed leaf distributions.
TextonForest toy_forest(const std::vector<ClassDistribution>& leaves) {
    TextonForest f;
    f.class_count = static_cast<int>(leaves[0].size());
    int ordinal = 0;
    for (const auto& dist : leaves) {
        StfTree tree;
        StfNode leaf;
        leaf.dist = dist;
        leaf.leaf_ordinal = ordinal++;
        leaf.sample_count = 10;
        tree.nodes.push_back(leaf);
        f.trees.push_back(tree);
    }
    f.leaf_count = ordinal;
    return f;
}

LabelImage image_of(std::initializer_list<std::uint8_t> labels, int w, int h) {
    LabelImage img(w, h);
    img.labels.assign(labels);
    return img;
}

SynthSpec routed_spec() {
    SynthSpec spec;
    spec.width = 48;
    spec.height = 48;
    spec.images_per_category = 12;
    spec.train_fraction = 0.75;
    spec.val_fraction = 0.0;
    spec.categories.resize(2);
    spec.categories[0].name = "one";
    // every class has a pixel-identical twin in the other category, so the
    // only reliable cue separating e.g. amber from amber2 is the scene
    spec.categories[0].classes = {
        {"floor", {90, 90, 90}, Texture::flat, 1.0, 0.0},
        {"amber", {200, 160, 40}, Texture::flat, 1.0, 0.25},
        {"moss", {40, 180, 60}, Texture::stripes, 1.0, 0.2},
    };
    spec.categories[1].name = "two";
    spec.categories[1].classes = {
        {"wall", {90, 90, 90}, Texture::flat, 1.0, 0.0},
        {"amber2", {200, 160, 40}, Texture::flat, 1.0, 0.25},
        {"sky", {40, 180, 60}, Texture::stripes, 1.0, 0.2},
    };
    return spec;
}

RoutedForestParams fast_params() {
    RoutedForestParams p;
    p.stf.patch_size = 5;
    p.stf.tree_count = 3;
    p.stf.max_depth = 6;
    p.stf.candidates_per_node = 48;
    p.stf.min_samples_leaf = 2;
    p.stf.pixel_stride = 2;
    p.cap_fraction = 0.5;
    return p;
}

}  // namespace

TEST_CASE("leaf observation matrix") {
    SECTION("single depth-0 tree is rejected (T = 1)") {
        const TextonForest f = toy_forest({{0.5, 0.5}});
        CHECK_THROWS_AS(collect_leaf_observations(f), DataError);
    }

    SECTION("hand-built forest gives the exact matrix") {
        const TextonForest f = toy_forest({{0.8, 0.2}, {0.1, 0.9}, {0.5, 0.5}});
        const Matrix obs = collect_leaf_observations(f);
        REQUIRE(obs.rows == 2);
        REQUIRE(obs.cols == 3);
        CHECK(obs(0, 0) == 0.8);
        CHECK(obs(1, 0) == 0.2);
        CHECK(obs(0, 1) == 0.1);
        CHECK(obs(1, 2) == 0.5);
        for (int j = 0; j < 3; ++j)
            CHECK_THAT(obs(0, j) + obs(1, j), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("class correlation") {
    SECTION("identical rows correlate to 1, complementary rows to -1") {
        Matrix obs(2, 4);
        const double vals[] = {0.1, 0.4, 0.7, 0.2};
        for (int j = 0; j < 4; ++j) {
            obs(0, j) = vals[j];
            obs(1, j) = 1.0 - vals[j];
        }
        const auto res = class_correlation(obs);
        CHECK_THAT(res.omega(0, 1), Catch::Matchers::WithinAbs(-1.0, 1e-12));
        CHECK(res.omega(0, 0) == 1.0);

        Matrix same(2, 4);
        for (int j = 0; j < 4; ++j) same(0, j) = same(1, j) = vals[j];
        CHECK_THAT(class_correlation(same).omega(0, 1), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }

    SECTION("random matrix matches the two-pass oracle to 1e-9") {
        Rng rng(8);
        Matrix obs(4, 10);
        std::vector<std::vector<double>> rows(4, std::vector<double>(10));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 10; ++j) rows[i][j] = obs(i, j) = rng.uniform_real();
        const auto res = class_correlation(obs);
        const auto expected = oracles::correlation_two_pass(rows);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                CHECK_THAT(res.omega(i, j), Catch::Matchers::WithinAbs(expected[i][j], 1e-9));
        // symmetry + unit diagonal
        for (int i = 0; i < 4; ++i) {
            CHECK(res.omega(i, i) == 1.0);
            for (int j = 0; j < 4; ++j) CHECK(res.omega(i, j) == res.omega(j, i));
        }
    }

    SECTION("zero-variance rows are flagged and zeroed") {
        Matrix obs(2, 3);
        for (int j = 0; j < 3; ++j) {
            obs(0, j) = 0.5;
            obs(1, j) = 0.1 * (j + 1);
        }
        const auto res = class_correlation(obs);
        REQUIRE(res.zero_variance == std::vector<int>{0});
        CHECK(res.omega(0, 1) == 0.0);
        CHECK(res.omega(0, 0) == 1.0);
    }
}

TEST_CASE("correlation distance") {
    Matrix omega(3, 3, 1.0);
    omega(0, 1) = omega(1, 0) = 0.9;
    omega(0, 2) = omega(2, 0) = -0.4;
    omega(1, 2) = omega(2, 1) = 0.2;
    const Matrix d = correlation_distance(omega);
    for (int i = 0; i < 3; ++i) CHECK(d(i, i) == 0.0);       // forced diagonal
    CHECK(d(0, 2) == 0.0);                                   // minimum entry maps to zero
    CHECK_THAT(d(0, 1), Catch::Matchers::WithinAbs(1.3, 1e-12));
    CHECK_THAT(d(1, 2), Catch::Matchers::WithinAbs(0.6, 1e-12));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(d(i, j) >= 0.0);
}

TEST_CASE("class clustering") {
    SECTION("two classes cannot satisfy min_members 3") {
        Matrix d(2, 2, 1.0);
        d(0, 0) = d(1, 1) = 0.0;
        const auto a = cluster_classes(d, 3);
        CHECK(a.cluster_count == 1);
    }

    SECTION("two tight groups of three split cleanly") {
        Matrix d(6, 6, 1.0);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                if (i / 3 == j / 3) d(i, j) = 0.0;
        const auto a = cluster_classes(d, 3);
        REQUIRE(a.cluster_count == 2);
        CHECK(a.cluster_of[0] == a.cluster_of[1]);
        CHECK(a.cluster_of[1] == a.cluster_of[2]);
        CHECK(a.cluster_of[3] == a.cluster_of[4]);
        CHECK(a.cluster_of[4] == a.cluster_of[5]);
        CHECK(a.cluster_of[0] != a.cluster_of[3]);
    }

    SECTION("all-equal distances give a single cluster") {
        Matrix d(6, 6, 1.0);
        for (int i = 0; i < 6; ++i) d(i, i) = 0.0;
        CHECK(cluster_classes(d, 3).cluster_count == 1);
    }

    SECTION("min_members 1 keeps singletons") {
        Matrix d(4, 4, 1.0);
        for (int i = 0; i < 4; ++i) d(i, i) = 0.0;
        CHECK(cluster_classes(d, 1).cluster_count == 4);
    }
}

TEST_CASE("co-occurrence matrix") {
    SECTION("classes always together give ones") {
        std::vector<LabelImage> labels{image_of({0, 1}, 2, 1), image_of({1, 0}, 2, 1)};
        const auto res = class_cooccurrence(labels, 2);
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y) CHECK(res.psi(x, y) == 1.0);
    }

    SECTION("x in 4 images, y in 2 of them -> 0.5") {
        std::vector<LabelImage> labels{
            image_of({0, 1}, 2, 1), image_of({0, 1}, 2, 1),
            image_of({0, 0}, 2, 1), image_of({0, 0}, 2, 1)};
        const auto res = class_cooccurrence(labels, 2);
        CHECK(res.psi(0, 1) == 0.5);
        CHECK(res.psi(1, 0) == 1.0);
        CHECK(res.psi(0, 0) == 1.0);
    }

    SECTION("absent class yields a zero row and a flag") {
        std::vector<LabelImage> labels{image_of({0, 0}, 2, 1)};
        const auto res = class_cooccurrence(labels, 3);
        CHECK(res.absent_classes == std::vector<int>{1, 2});
        CHECK(res.psi(1, 0) == 0.0);
        CHECK(res.psi(1, 1) == 0.0);
    }
}

TEST_CASE("image scoring") {
    Matrix psi(2, 2, 0.0);
    psi(0, 0) = 1.0;
    psi(0, 1) = 0.25;
    psi(1, 1) = 1.0;

    SECTION("pure image of the class scores its pixel count") {
        const LabelImage g = image_of({0, 0, 0, 0}, 2, 2);
        CHECK(score_image(0, g, psi) == 4.0);
    }

    SECTION("zero co-occurrence scores zero") {
        const LabelImage g = image_of({0, 0}, 2, 1);
        CHECK(score_image(1, g, psi) == 0.0);  // psi(1, 0) = 0
    }

    SECTION("mixed image accumulates per-pixel") {
        LabelImage g = image_of({0, 1, 1, kVoidLabel}, 2, 2);
        CHECK_THAT(score_image(0, g, psi), Catch::Matchers::WithinAbs(1.0 + 0.25 + 0.25, 1e-12));
    }
}

TEST_CASE("gathering training sets") {
    SECTION("single cluster with cap 1.0 takes everything, best first") {
        std::vector<LabelImage> labels{
            image_of({0, 1, 1, 1}, 2, 2),   // 1-heavy
            image_of({0, 0, 0, 1}, 2, 2),   // 0-heavy
            image_of({0, 0, 1, 1}, 2, 2)};
        const auto cooc = class_cooccurrence(labels, 2);
        ClusterAssignment a;
        a.cluster_of = {0, 0};
        a.cluster_count = 1;
        const auto gathered = gather_training_sets(a, cooc.psi, labels, 1.0);
        REQUIRE(gathered.size() == 1);
        CHECK(gathered[0].size() == 3);
    }

    SECTION("a 7% cap over 100 images takes exactly 7") {
        std::vector<LabelImage> labels(100, image_of({0, 1}, 2, 1));
        const auto cooc = class_cooccurrence(labels, 2);
        ClusterAssignment a;
        a.cluster_of = {0, 0};
        a.cluster_count = 1;
        const auto gathered = gather_training_sets(a, cooc.psi, labels, 0.07);
        CHECK(gathered[0].size() == 7);
    }

    SECTION("no duplicates, never exceeds the budget") {
        Rng rng(3);
        std::vector<LabelImage> labels;
        for (int i = 0; i < 20; ++i) {
            LabelImage img(3, 3);
            for (auto& v : img.labels) v = static_cast<std::uint8_t>(rng.next_below(4));
            labels.push_back(img);
        }
        const auto cooc = class_cooccurrence(labels, 4);
        ClusterAssignment a;
        a.cluster_of = {0, 0, 1, 1};
        a.cluster_count = 2;
        const auto gathered = gather_training_sets(a, cooc.psi, labels, 0.3);
        for (const auto& g : gathered) {
            CHECK(g.size() <= 6);  // ceil(0.3 * 20)
            auto sorted = g;
            std::sort(sorted.begin(), sorted.end());
            CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
        }
    }

    SECTION("cluster with classes in no image is an error naming the cluster") {
        std::vector<LabelImage> labels{image_of({0, 0}, 2, 1)};
        Matrix psi(3, 3, 0.0);
        psi(0, 0) = 1.0;
        ClusterAssignment a;
        a.cluster_of = {0, 1, 1};
        a.cluster_count = 2;
        const std::vector<std::string> names{"ok", "ghost-a", "ghost-b"};
        CHECK_THROWS_WITH(gather_training_sets(a, psi, labels, 0.5, &names),
                          Catch::Matchers::ContainsSubstring("ghost-a"));
    }
}

TEST_CASE("global feature extractors") {
    SECTION("constant image concentrates one histogram bin per channel") {
        RgbImage img(10, 10);
        for (int i = 0; i < 100; ++i) {
            img.data[i * 3 + 0] = 33;   // bin 2
            img.data[i * 3 + 1] = 150;  // bin 9
            img.data[i * 3 + 2] = 255;  // bin 15
        }
        const auto v = extract_color_grid(img);
        REQUIRE(static_cast<int>(v.size()) == kColorGridDim);
        // within each channel's block exactly one nonzero bin
        const int expected_bins[3] = {2, 9, 15};
        for (int ch = 0; ch < 3; ++ch)
            for (int b = 0; b < kColorHistogramBins; ++b) {
                const double val = v[ch * kColorHistogramBins + b];
                if (b == expected_bins[ch])
                    CHECK(val > 0.0);
                else
                    CHECK(val == 0.0);
            }
    }

    SECTION("identical images give identical vectors; size does not change the dimension") {
        Rng rng(4);
        RgbImage a(17, 9), b(40, 31);
        for (auto& v : a.data) v = static_cast<std::uint8_t>(rng.next_below(256));
        for (auto& v : b.data) v = static_cast<std::uint8_t>(rng.next_below(256));
        CHECK(extract_color_grid(a) == extract_color_grid(a));
        CHECK(extract_color_grid(a).size() == extract_color_grid(b).size());
    }

    SECTION("unknown extractor id is rejected") {
        CHECK_THROWS_AS(GlobalFeatureExtractor("bag_of_cnn"), DataError);
    }
}

TEST_CASE("routed forest end to end on two synthetic categories") {
    const auto dir = fs::temp_directory_path() / "ctxseg_test_routed";
    fs::remove_all(dir);
    const DatasetManifest manifest = generate_synthetic(routed_spec(), 21, dir.string());
    const auto train = load_split(manifest, Split::train);
    const auto test = load_split(manifest, Split::test);
    REQUIRE(!train.empty());
    REQUIRE(!test.empty());

    const RoutedForestTraining rft = train_routed_forest(train, fast_params(), 6, 5);
    const RoutedForest& model = rft.model;

    SECTION("confusable classes land in different clusters") {
        // amber (1) and amber2 (4) are pixel-identical across categories
        if (model.cluster_count() > 1)
            CHECK(model.assignment.cluster_of[1] != model.assignment.cluster_of[4]);
        else
            FAIL("expected more than one cluster on the confusable-pair dataset");
    }

    SECTION("routing is exclusive: one recognizer call, one specialist") {
        GlobalFeatureExtractor ex(model.recognizer_feature, &rft.base_forest);
        model.reset_counters();
        const auto grid = model.classify_image(ex, test[0].image);
        CHECK(grid.size() == test[0].image.pixel_count());
        CHECK(model.recognizer_evaluation_count() == 1);
        std::uint64_t evals = 0;
        for (const auto& s : model.specialists) evals += s.evaluation_count();
        CHECK(evals == 1);
    }

    SECTION("identical inputs route identically") {
        GlobalFeatureExtractor ex(model.recognizer_feature, &rft.base_forest);
        CHECK(model.predict_cluster(ex, test[0].image) == model.predict_cluster(ex, test[0].image));
    }

    SECTION("training is deterministic") {
        const RoutedForestTraining again = train_routed_forest(train, fast_params(), 6, 5);
        REQUIRE(again.model.specialists.size() == model.specialists.size());
        for (std::size_t k = 0; k < model.specialists.size(); ++k)
            CHECK(forest_bytes(again.model.specialists[k]) == forest_bytes(model.specialists[k]));
        CHECK(forest_bytes(again.base_forest) == forest_bytes(rft.base_forest));
    }
}

TEST_CASE("gathering follows the generator's category structure") {
    // manual category-aligned assignment: each cluster's classes live in one
    // category, so its gathered set must contain only that category's images
    const auto dir = fs::temp_directory_path() / "ctxseg_test_gather_cat";
    fs::remove_all(dir);
    const DatasetManifest manifest = generate_synthetic(routed_spec(), 9, dir.string());
    const auto train_entries = manifest.split_entries(Split::train);
    std::vector<LabelImage> labels;
    std::vector<std::string> categories;
    for (const auto* e : train_entries) {
        labels.push_back(load_entry(manifest, *e).labels);
        categories.push_back(e->category);
    }
    const auto cooc = class_cooccurrence(labels, 6);
    ClusterAssignment by_category;
    by_category.cluster_of = {0, 0, 0, 1, 1, 1};
    by_category.cluster_count = 2;

    for (const auto merge : {GatherMerge::round_robin, GatherMerge::concatenate}) {
        const auto gathered =
            gather_training_sets(by_category, cooc.psi, labels, 0.5, nullptr, merge);
        REQUIRE(gathered.size() == 2);
        for (int i : gathered[0]) CHECK(categories[i] == "one");
        for (int i : gathered[1]) CHECK(categories[i] == "two");
        CHECK(!gathered[0].empty());
        CHECK(!gathered[1].empty());
    }
}

TEST_CASE("recognizer routes held-out images to their own category") {
    // clusters given as the categories themselves: the recognizer machinery
    // must route at least 90% of unseen images correctly
    const auto dir = fs::temp_directory_path() / "ctxseg_test_route_acc";
    fs::remove_all(dir);
    SynthSpec spec = routed_spec();
    spec.images_per_category = 24;
    spec.train_fraction = 0.5;
    // distinct palettes: this test is about the recognizer, not the twins
    spec.categories[1].classes[0].color = {160, 160, 160};
    spec.categories[1].classes[1].color = {40, 40, 220};
    spec.categories[1].classes[2].color = {220, 220, 40};
    const DatasetManifest manifest = generate_synthetic(spec, 19, dir.string());
    const auto train = load_split(manifest, Split::train);

    GlobalFeatureExtractor ex("color_grid");
    std::vector<std::vector<double>> features;
    std::vector<int> targets;
    for (const auto& li : train) {
        features.push_back(ex.extract(li.image));
        targets.push_back(li.category == "one" ? 0 : 1);
    }
    RoutedForest model;
    model.assignment.cluster_of = {0, 0, 0, 1, 1, 1};
    model.assignment.cluster_count = 2;
    model.recognizer = LinearClassifier::train(features, targets, 2, LinearSvmParams{}, 77);

    int correct = 0, total = 0;
    for (const auto& e : manifest.entries) {
        if (e.split == Split::train) continue;
        const LabeledImage li = load_entry(manifest, e);
        correct += model.predict_cluster(ex, li.image) == (li.category == "one" ? 0 : 1);
        ++total;
    }
    REQUIRE(total >= 20);
    CHECK(correct >= (total * 9 + 9) / 10);  // at least 90%
}

TEST_CASE("a single-cluster model behaves like its one specialist") {
    // easy data with all-equal distances collapses to K = 1
    const auto dir = fs::temp_directory_path() / "ctxseg_test_k1";
    fs::remove_all(dir);
    SynthSpec spec = routed_spec();
    spec.categories[1].classes[1].color = {220, 40, 220};  // break the twins: distinct looks
    spec.categories[1].classes[2].color = {200, 200, 40};
    const DatasetManifest manifest = generate_synthetic(spec, 13, dir.string());
    const auto train = load_split(manifest, Split::train);
    RoutedForestParams params = fast_params();
    params.min_cluster_members = 6;  // force the single-cluster fallback
    const RoutedForestTraining rft = train_routed_forest(train, params, 6, 5);
    REQUIRE(rft.model.cluster_count() == 1);

    GlobalFeatureExtractor ex(rft.model.recognizer_feature, &rft.base_forest);
    const auto& img = train[0].image;
    CHECK(rft.model.predict_cluster(ex, img) == 0);
    CHECK(rft.model.classify_image(ex, img) == rft.model.specialists[0].classify_image(img));
}
