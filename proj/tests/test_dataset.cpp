#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>

#include "ctxseg/dataset.hpp"
#include "ctxseg/synth.hpp"

using namespace ctxseg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("ctxseg_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

SynthSpec two_category_spec() {
    SynthSpec spec;
    spec.width = 48;
    spec.height = 48;
    spec.images_per_category = 4;
    spec.categories.resize(2);
    spec.categories[0].name = "alpha";
    spec.categories[0].classes = {
        {"bg-a", {40, 40, 40}, Texture::flat, 1.0, 0.0},
        {"A", {200, 60, 60}, Texture::flat, 1.0, 0.25},
        {"B", {60, 200, 60}, Texture::flat, 1.0, 0.2},
    };
    spec.categories[1].name = "beta";
    spec.categories[1].classes = {
        {"bg-b", {90, 90, 90}, Texture::flat, 1.0, 0.0},
        {"C", {200, 60, 60}, Texture::flat, 1.0, 0.25},  // same look as A
        {"D", {60, 60, 200}, Texture::checker, 1.0, 0.2},
    };
    return spec;
}

}  // namespace

TEST_CASE("ppm/pgm round trip") {
    const auto dir = temp_dir("pnm");
    RgbImage img(5, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<std::uint8_t>(i * 7 % 256);
    write_ppm((dir / "a.ppm").string(), img);
    CHECK(read_ppm((dir / "a.ppm").string()) == img);

    LabelImage lab(5, 3, 1);
    lab.at(0, 0) = kVoidLabel;
    lab.at(4, 2) = 0;
    write_pgm((dir / "a.pgm").string(), lab);
    CHECK(read_pgm((dir / "a.pgm").string()) == lab);
}

TEST_CASE("manifest: empty dataset rejected") {
    const auto dir = temp_dir("empty_manifest");
    std::ofstream f(dir / "manifest.json");
    f << R"({"classes":["a","b"],"void":255,"entries":[]})";
    f.close();
    CHECK_THROWS_WITH(load_dataset((dir / "manifest.json").string()),
                      Catch::Matchers::ContainsSubstring("empty dataset"));
}

TEST_CASE("manifest: out-of-range label names the offending file") {
    const auto dir = temp_dir("bad_label");
    RgbImage img(4, 4);
    write_ppm((dir / "x.ppm").string(), img);
    LabelImage lab(4, 4, 2);  // 2 >= C = 2
    write_pgm((dir / "x.pgm").string(), lab);
    std::ofstream f(dir / "manifest.json");
    f << R"({"classes":["a","b"],"void":255,
            "entries":[{"image":"x.ppm","labels":"x.pgm","split":"train"}]})";
    f.close();
    CHECK_THROWS_WITH(load_dataset((dir / "manifest.json").string()),
                      Catch::Matchers::ContainsSubstring("x.pgm"));
}

TEST_CASE("manifest: valid three-entry round trip preserves splits") {
    const auto dir = temp_dir("roundtrip");
    DatasetManifest m;
    m.class_set.names = {"a", "b"};
    m.base_dir = dir.string();
    const Split splits[] = {Split::train, Split::val, Split::test};
    for (int i = 0; i < 3; ++i) {
        RgbImage img(4, 4);
        LabelImage lab(4, 4, static_cast<std::uint8_t>(i % 2));
        const std::string istem = "img" + std::to_string(i);
        write_ppm((dir / (istem + ".ppm")).string(), img);
        write_pgm((dir / (istem + ".pgm")).string(), lab);
        m.entries.push_back({istem + ".ppm", istem + ".pgm", splits[i], ""});
    }
    save_manifest(m, (dir / "manifest.json").string());

    const DatasetManifest loaded = load_dataset((dir / "manifest.json").string());
    REQUIRE(loaded.entries.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(loaded.entries[i].split == splits[i]);
    CHECK(loaded.class_set.count() == 2);
}

TEST_CASE("synthetic generation is byte-identical across runs") {
    const auto spec = two_category_spec();
    const auto dir1 = temp_dir("synth_det1");
    const auto dir2 = temp_dir("synth_det2");
    generate_synthetic(spec, 7, dir1.string());
    generate_synthetic(spec, 7, dir2.string());

    for (const auto& entry : fs::directory_iterator(dir1)) {
        const auto other = dir2 / entry.path().filename();
        REQUIRE(fs::exists(other));
        std::ifstream a(entry.path(), std::ios::binary), b(other, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), {});
        std::string sb((std::istreambuf_iterator<char>(b)), {});
        CHECK(sa == sb);
    }

    // a different seed must change the pixels
    const auto dir3 = temp_dir("synth_det3");
    generate_synthetic(spec, 8, dir3.string());
    std::ifstream a(dir1 / "img_0000.ppm", std::ios::binary), b(dir3 / "img_0000.ppm",
                                                                std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa != sb);
}

TEST_CASE("confusable pair renders pixel-identical patch statistics") {
    // classes A and C share color+texture but live in different categories;
    // their per-region color histograms must agree exactly (direct counting)
    const auto dir = temp_dir("synth_confusable");
    const DatasetManifest m = generate_synthetic(two_category_spec(), 3, dir.string());

    std::map<int, std::map<std::uint8_t, std::uint64_t>> red_histogram;  // class -> value counts
    for (const auto& e : m.entries) {
        const LabeledImage li = load_entry(m, e);
        for (int y = 0; y < li.labels.height; ++y)
            for (int x = 0; x < li.labels.width; ++x) {
                const std::uint8_t lab = li.labels.at(x, y);
                if (lab == kVoidLabel) continue;
                ++red_histogram[lab][li.image.at(x, y, 0)];
            }
    }
    const int a_id = 1, c_id = 4;  // palette order: bg-a, A, B, bg-b, C, D
    auto normalize = [](const std::map<std::uint8_t, std::uint64_t>& h) {
        double total = 0;
        for (auto& [k, v] : h) total += v;
        std::map<std::uint8_t, double> out;
        for (auto& [k, v] : h) out[k] = v / total;
        return out;
    };
    const auto ha = normalize(red_histogram[a_id]);
    const auto hc = normalize(red_histogram[c_id]);
    REQUIRE(ha.size() == hc.size());
    for (const auto& [value, frac] : ha) {
        REQUIRE(hc.count(value) == 1);
        CHECK_THAT(hc.at(value), Catch::Matchers::WithinAbs(frac, 1e-12));
    }
}

TEST_CASE("degenerate synth specs are rejected") {
    SynthSpec spec;
    spec.categories.resize(1);
    spec.categories[0].name = "only";
    spec.categories[0].classes = {{"solo", {10, 10, 10}, Texture::flat, 1.0, 0.0}};
    CHECK_THROWS_AS(spec.validate(), DataError);  // 1 category, 1 class

    SynthSpec none = two_category_spec();
    none.categories[1].classes.clear();
    CHECK_THROWS_AS(none.validate(), DataError);  // category with < 1 class
}

TEST_CASE("every palette class appears in its category") {
    SynthSpec spec = two_category_spec();
    spec.categories[0].classes[2].presence = 0.05;  // rarely sampled
    spec.images_per_category = 6;
    const auto dir = temp_dir("synth_coverage");
    const DatasetManifest m = generate_synthetic(spec, 11, dir.string());

    std::map<std::string, std::vector<bool>> seen;  // category -> class presence
    seen["alpha"] = std::vector<bool>(6, false);
    seen["beta"] = std::vector<bool>(6, false);
    for (const auto& e : m.entries) {
        const LabeledImage li = load_entry(m, e);
        for (std::uint8_t v : li.labels.labels)
            if (v != kVoidLabel) seen[e.category][v] = true;
    }
    for (int c : {0, 1, 2}) CHECK(seen["alpha"][c]);
    for (int c : {3, 4, 5}) CHECK(seen["beta"][c]);
}

TEST_CASE("void border stays void and loads back") {
    SynthSpec spec = two_category_spec();
    spec.void_border = 2;
    const auto dir = temp_dir("synth_void");
    const DatasetManifest m = generate_synthetic(spec, 5, dir.string());
    const LabeledImage li = load_entry(m, m.entries[0]);
    CHECK(li.labels.at(0, 0) == kVoidLabel);
    CHECK(li.labels.at(1, 1) == kVoidLabel);
    CHECK(li.labels.at(2, 2) != kVoidLabel);
}

TEST_CASE("fixed-size pinned rects have deterministic geometry") {
    SynthSpec spec;
    spec.width = 32;
    spec.height = 32;
    spec.images_per_category = 3;
    spec.train_fraction = 1.0;
    spec.val_fraction = 0.0;
    spec.categories.resize(1);
    spec.categories[0].name = "only";
    SynthClass bg{"bg", {10, 10, 10}, Texture::flat, 1.0, 0.0, 0.0, "any", "random"};
    SynthClass block{"block", {200, 10, 10}, Texture::flat, 1.0, 0.0, 0.5, "left", "start"};
    SynthClass dot{"dot", {10, 200, 10}, Texture::flat, 1.0, 0.0, 0.25, "right", "center"};
    spec.categories[0].classes = {bg, block, dot};

    const auto dir = temp_dir("synth_pinned");
    const DatasetManifest m = generate_synthetic(spec, 77, dir.string());
    LabeledImage first = load_entry(m, m.entries[0]);
    // block: 16x16 at the top-left corner in every image
    for (const auto& e : m.entries) {
        const LabeledImage li = load_entry(m, e);
        CHECK(li.labels.labels == first.labels.labels);
        CHECK(li.labels.at(0, 0) == 1);
        CHECK(li.labels.at(15, 15) == 1);
        CHECK(li.labels.at(16, 16) != 1);
    }
    // dot: 8x8 centered in the right half: x in [16 + (16-8)/2, ...)
    CHECK(first.labels.at(20, 12) == 2);
    CHECK(first.labels.at(20, 4) != 2);
}

TEST_CASE("generated manifests carry the class palette") {
    const auto dir = temp_dir("synth_palette");
    const DatasetManifest m = generate_synthetic(two_category_spec(), 5, dir.string());
    const DatasetManifest loaded = load_dataset((dir / "manifest.json").string());
    REQUIRE(loaded.palette.size() == 6);
    CHECK(loaded.palette[1] == std::array<int, 3>{200, 60, 60});  // class "A"
}
