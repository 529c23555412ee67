#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxseg/dataset.hpp"
#include "ctxseg/errors.hpp"
#include "ctxseg/image.hpp"
#include "ctxseg/rng.hpp"

namespace ctxseg {

// Synthetic scenes: every image belongs to one scene category and contains
// only classes from that category's palette. Two classes in different
// categories may share color+texture, which makes their patches pixel-wise
// indistinguishable to any local classifier.

enum class Texture { flat, stripes, checker, noise };

inline Texture texture_from_string(const std::string& s) {
    if (s == "flat") return Texture::flat;
    if (s == "stripes") return Texture::stripes;
    if (s == "checker") return Texture::checker;
    if (s == "noise") return Texture::noise;
    throw DataError("unknown texture: " + s);
}

struct SynthClass {
    std::string name;
    std::array<int, 3> color{128, 128, 128};
    Texture texture = Texture::flat;
    double presence = 1.0;  // probability the class appears in an image of its category
    double area = 0.15;     // rough fraction of the image it covers (rects layout)
    double rect_side = 0.0; // > 0: exactly one rect with this fixed side fraction
    std::string region = "any";  // placement constraint: any|left|right|top|bottom
    std::string placement = "random";  // random|center|start|end within the region
};

struct SynthCategory {
    std::string name;
    std::vector<SynthClass> classes;  // classes[0] is the background of the category
};

struct SynthSpec {
    int width = 64;
    int height = 64;
    int images_per_category = 30;
    double train_fraction = 0.7;
    double val_fraction = 0.15;  // remainder is test
    std::string layout = "rects";  // "rects" or "bands"
    int pixel_noise = 0;           // uniform +-amplitude added to every channel
    int void_border = 0;           // pixels of void around each label image
    int texture_amplitude = 24;
    std::vector<SynthCategory> categories;

    void validate() const {
        require(width >= 8 && height >= 8, "synthetic images must be at least 8x8");
        require(images_per_category >= 1, "images_per_category must be >= 1");
        require(!categories.empty(), "spec needs at least one category");
        int total = 0;
        for (const auto& cat : categories) {
            require(!cat.classes.empty(), "category \"" + cat.name + "\" has no classes");
            total += static_cast<int>(cat.classes.size());
        }
        require(total >= 2, "spec must define at least 2 classes overall");
        require(layout == "rects" || layout == "bands", "layout must be \"rects\" or \"bands\"");
        require(train_fraction > 0.0 && train_fraction + val_fraction <= 1.0,
                "split fractions out of range");
    }
};

inline SynthSpec parse_synth_spec(const nlohmann::json& j) {
    SynthSpec s;
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.images_per_category = j.value("images_per_category", s.images_per_category);
    s.train_fraction = j.value("train_fraction", s.train_fraction);
    s.val_fraction = j.value("val_fraction", s.val_fraction);
    s.layout = j.value("layout", s.layout);
    s.pixel_noise = j.value("pixel_noise", s.pixel_noise);
    s.void_border = j.value("void_border", s.void_border);
    s.texture_amplitude = j.value("texture_amplitude", s.texture_amplitude);
    require(j.contains("categories"), "synth spec missing \"categories\"");
    for (const auto& jc : j["categories"]) {
        SynthCategory cat;
        cat.name = jc.at("name").get<std::string>();
        for (const auto& jk : jc.value("classes", nlohmann::json::array())) {
            SynthClass k;
            k.name = jk.at("name").get<std::string>();
            if (jk.contains("color")) {
                k.color = {jk["color"][0].get<int>(), jk["color"][1].get<int>(),
                           jk["color"][2].get<int>()};
            }
            k.texture = texture_from_string(jk.value("texture", "flat"));
            k.presence = jk.value("presence", 1.0);
            k.area = jk.value("area", 0.15);
            k.rect_side = jk.value("rect_side", 0.0);
            k.region = jk.value("region", "any");
            require(k.region == "any" || k.region == "left" || k.region == "right" ||
                        k.region == "top" || k.region == "bottom",
                    "bad region for class " + k.name);
            k.placement = jk.value("placement", "random");
            require(k.placement == "random" || k.placement == "center" ||
                        k.placement == "start" || k.placement == "end",
                    "bad placement for class " + k.name);
            cat.classes.push_back(std::move(k));
        }
        s.categories.push_back(std::move(cat));
    }
    s.validate();
    return s;
}

inline SynthSpec load_synth_spec(const std::string& path) {
    std::ifstream in(path);
    require(in.is_open(), "cannot open synth spec: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("synth spec parse error: ") + e.what());
    }
    return parse_synth_spec(j);
}

namespace detail {

inline std::uint8_t clamp_channel(int v) {
    return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
}

inline void paint_rect(RgbImage& img, LabelImage& lab, int x0, int y0, int x1, int y1,
                       const SynthClass& k, std::uint8_t class_id, int amplitude, Rng& rng) {
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            int delta = 0;
            switch (k.texture) {
                case Texture::flat: break;
                case Texture::stripes: delta = (y % 4 < 2) ? amplitude : -amplitude; break;
                case Texture::checker: delta = ((x / 4 + y / 4) % 2) ? amplitude : -amplitude; break;
                case Texture::noise: delta = rng.uniform_int(-amplitude, amplitude); break;
            }
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = clamp_channel(k.color[c] + delta);
            lab.at(x, y) = class_id;
        }
    }
}

}  // namespace detail

// Renders one image of a category. present[i] says whether member i appears.
// Pure function of (spec, category, present, rng state).
inline LabeledImage render_synth_image(const SynthSpec& spec, const SynthCategory& cat,
                                       const std::vector<bool>& present, std::uint8_t first_id,
                                       Rng& rng) {
    const int w = spec.width;
    const int h = spec.height;
    RgbImage img(w, h);
    LabelImage lab(w, h);
    const int amp = spec.texture_amplitude;
    const int m = static_cast<int>(cat.classes.size());

    // background class fills everything first
    detail::paint_rect(img, lab, 0, 0, w, h, cat.classes[0], first_id, amp, rng);

    if (spec.layout == "bands") {
        // member i owns a horizontal band with height proportional to its
        // area weight (the background absorbs the rest); absent members leave
        // background showing. Band geometry is deterministic given the spec.
        double accent_total = 0.0;
        for (int i = 1; i < m; ++i) accent_total += std::max(0.01, cat.classes[i].area);
        const double scale = accent_total > 0.85 ? 0.85 / accent_total : 1.0;
        double cursor = h * (1.0 - accent_total * scale);  // background band on top
        for (int i = 1; i < m; ++i) {
            const double height = h * std::max(0.01, cat.classes[i].area) * scale;
            const int y0 = static_cast<int>(std::lround(cursor));
            const int y1 = std::min(h, static_cast<int>(std::lround(cursor + height)));
            cursor += height;
            if (!present[i]) continue;
            detail::paint_rect(img, lab, 0, y0, w, y1, cat.classes[i],
                               static_cast<std::uint8_t>(first_id + i), amp, rng);
        }
    } else {
        for (int i = 1; i < m; ++i) {
            if (!present[i]) continue;
            const auto& cls = cat.classes[i];
            int rects;
            double side;
            if (cls.rect_side > 0.0) {
                rects = 1;  // fixed-size rect: class mass is exact, not sampled
                side = cls.rect_side;
            } else {
                rects = 1 + static_cast<int>(rng.next_below(2));
                side = std::sqrt(std::max(0.01, cls.area / rects));
            }
            // placement window per the region constraint
            int wx0 = 0, wy0 = 0, wx1 = w, wy1 = h;
            if (cls.region == "left") wx1 = w / 2;
            else if (cls.region == "right") wx0 = w / 2;
            else if (cls.region == "top") wy1 = h / 2;
            else if (cls.region == "bottom") wy0 = h / 2;
            for (int r = 0; r < rects; ++r) {
                const double jitter =
                    cls.rect_side > 0.0 ? 1.0 : rng.uniform_real(0.75, 1.25);
                int rw = std::max(4, static_cast<int>(w * side * jitter));
                int rh = std::max(4, static_cast<int>(h * side *
                                                      (cls.rect_side > 0.0
                                                           ? 1.0
                                                           : rng.uniform_real(0.75, 1.25))));
                rw = std::min(rw, wx1 - wx0);
                rh = std::min(rh, wy1 - wy0);
                int x0, y0;
                if (cls.placement == "center") {
                    x0 = wx0 + (wx1 - wx0 - rw) / 2;
                    y0 = wy0 + (wy1 - wy0 - rh) / 2;
                } else if (cls.placement == "start") {
                    x0 = wx0;
                    y0 = wy0;
                } else if (cls.placement == "end") {
                    x0 = wx1 - rw;
                    y0 = wy1 - rh;
                } else {
                    x0 = wx0 + static_cast<int>(rng.next_below(wx1 - wx0 - rw + 1));
                    y0 = wy0 + static_cast<int>(rng.next_below(wy1 - wy0 - rh + 1));
                }
                detail::paint_rect(img, lab, x0, y0, x0 + rw, y0 + rh, cls,
                                   static_cast<std::uint8_t>(first_id + i), amp, rng);
            }
        }
    }

    if (spec.pixel_noise > 0) {
        for (auto& v : img.data)
            v = detail::clamp_channel(int(v) + rng.uniform_int(-spec.pixel_noise, spec.pixel_noise));
    }
    if (spec.void_border > 0) {
        const int b = spec.void_border;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (x < b || y < b || x >= w - b || y >= h - b) lab.at(x, y) = kVoidLabel;
    }
    LabeledImage out;
    out.image = std::move(img);
    out.labels = std::move(lab);
    out.category = cat.name;
    return out;
}

// Writes rasters + manifest.json under out_dir. Deterministic for a fixed
// seed: rerunning produces byte-identical files.
inline DatasetManifest generate_synthetic(const SynthSpec& spec, std::uint64_t seed,
                                          const std::string& out_dir) {
    spec.validate();
    std::filesystem::create_directories(out_dir);

    DatasetManifest manifest;
    manifest.base_dir = out_dir;
    for (const auto& cat : spec.categories) {
        for (const auto& k : cat.classes) {
            manifest.class_set.names.push_back(k.name);
            manifest.palette.push_back(k.color);
        }
    }
    manifest.class_set.validate();

    const int n = spec.images_per_category;
    const int n_train = std::max(1, static_cast<int>(std::lround(n * spec.train_fraction)));
    const int n_val = static_cast<int>(std::lround(n * spec.val_fraction));

    int global_index = 0;
    std::uint8_t first_id = 0;
    for (std::size_t ci = 0; ci < spec.categories.size(); ++ci) {
        const auto& cat = spec.categories[ci];
        const int m = static_cast<int>(cat.classes.size());
        std::vector<int> appearances(m, 0);

        for (int i = 0; i < n; ++i, ++global_index) {
            Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(global_index)));
            std::vector<bool> present(m, true);
            for (int k = 1; k < m; ++k) {
                present[k] = rng.bernoulli(cat.classes[k].presence);
                // every palette class must appear in at least one image of its category
                if (i == n - 1 && appearances[k] == 0) present[k] = true;
                if (present[k]) ++appearances[k];
            }
            LabeledImage li = render_synth_image(spec, cat, present, first_id, rng);

            char img_name[64], lab_name[64];
            std::snprintf(img_name, sizeof img_name, "img_%04d.ppm", global_index);
            std::snprintf(lab_name, sizeof lab_name, "lab_%04d.pgm", global_index);
            write_ppm((std::filesystem::path(out_dir) / img_name).string(), li.image);
            write_pgm((std::filesystem::path(out_dir) / lab_name).string(), li.labels);

            DatasetEntry e;
            e.image_path = img_name;
            e.label_path = lab_name;
            e.split = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
            e.category = cat.name;
            manifest.entries.push_back(std::move(e));
        }
        first_id = static_cast<std::uint8_t>(first_id + m);
    }

    save_manifest(manifest, (std::filesystem::path(out_dir) / "manifest.json").string());
    return manifest;
}

}  // namespace ctxseg
