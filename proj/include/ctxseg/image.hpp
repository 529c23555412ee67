#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ctxseg/errors.hpp"

namespace ctxseg {

constexpr std::uint8_t kVoidLabel = 255;

// 8-bit RGB image, row-major, interleaved channels.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // width * height * 3

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {
        require(w >= 1 && h >= 1, "image dimensions must be >= 1");
    }

    std::uint8_t at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    // Border-clamped access; patch tests near image edges rely on this.
    std::uint8_t at_clamped(int x, int y, int c) const {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        return at(x, y, c);
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    bool operator==(const RgbImage&) const = default;
};

// Per-pixel class ids in [0, C), with kVoidLabel marking unlabeled pixels.
struct LabelImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> labels;

    LabelImage() = default;
    LabelImage(int w, int h, std::uint8_t fill = kVoidLabel)
        : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {
        require(w >= 1 && h >= 1, "label image dimensions must be >= 1");
    }

    std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    bool operator==(const LabelImage&) const = default;
};

// The label alphabet. void_id is reserved and never counts as a class.
struct ClassSet {
    std::vector<std::string> names;
    std::uint8_t void_id = kVoidLabel;

    int count() const { return static_cast<int>(names.size()); }

    void validate() const {
        require(names.size() >= 2, "class set needs at least 2 classes");
        require(names.size() < 255, "at most 254 classes (255 is the void sentinel)");
        for (std::size_t i = 0; i < names.size(); ++i)
            for (std::size_t j = i + 1; j < names.size(); ++j)
                require(names[i] != names[j], "duplicate class name: " + names[i]);
    }
};

// ---- PPM (P6) / PGM (P5) ----------------------------------------------------

namespace detail {

inline void skip_pnm_whitespace(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

inline int read_pnm_int(std::istream& in, const std::string& path) {
    skip_pnm_whitespace(in);
    int v = -1;
    in >> v;
    require(in.good() && v >= 0, "bad PNM header in " + path);
    return v;
}

}  // namespace detail

inline RgbImage read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.is_open(), "cannot open image: " + path);
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    require(magic == "P6", "not a binary PPM (P6): " + path);
    const int w = detail::read_pnm_int(in, path);
    const int h = detail::read_pnm_int(in, path);
    const int maxval = detail::read_pnm_int(in, path);
    require(maxval == 255, "only maxval 255 PPM supported: " + path);
    in.get();  // single whitespace byte after header
    RgbImage img(w, h);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    require(in.gcount() == static_cast<std::streamsize>(img.data.size()), "truncated PPM: " + path);
    return img;
}

inline void write_ppm(const std::string& path, const RgbImage& img) {
    std::ofstream out(path, std::ios::binary);
    require(out.is_open(), "cannot write image: " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    require(out.good(), "write failed: " + path);
}

inline LabelImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.is_open(), "cannot open labels: " + path);
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    require(magic == "P5", "not a binary PGM (P5): " + path);
    const int w = detail::read_pnm_int(in, path);
    const int h = detail::read_pnm_int(in, path);
    const int maxval = detail::read_pnm_int(in, path);
    require(maxval == 255, "only maxval 255 PGM supported: " + path);
    in.get();
    LabelImage img(w, h);
    in.read(reinterpret_cast<char*>(img.labels.data()),
            static_cast<std::streamsize>(img.labels.size()));
    require(in.gcount() == static_cast<std::streamsize>(img.labels.size()),
            "truncated PGM: " + path);
    return img;
}

inline void write_pgm(const std::string& path, const LabelImage& img) {
    std::ofstream out(path, std::ios::binary);
    require(out.is_open(), "cannot write labels: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.labels.data()),
              static_cast<std::streamsize>(img.labels.size()));
    require(out.good(), "write failed: " + path);
}

}  // namespace ctxseg
