#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "ctxseg/dataset.hpp"
#include "ctxseg/errors.hpp"
#include "ctxseg/serialize.hpp"

namespace ctxseg {

// Absolute-position class statistics on a normalized G x G grid, estimated
// separately for portrait and landscape images. Square images count as
// landscape (W >= H).
class LocationModel {
public:
    int grid = 21;
    int class_count = 0;
    std::vector<double> landscape;  // grid*grid*C, cell-major, normalized per cell
    std::vector<double> portrait;

    bool empty() const { return landscape.empty(); }

    double lookup(int image_width, int image_height, int x, int y, int cls) const {
        const bool is_landscape = image_width >= image_height;
        const auto& table = is_landscape ? landscape : portrait;
        const int gx = std::min(grid - 1, x * grid / image_width);
        const int gy = std::min(grid - 1, y * grid / image_height);
        return table[(static_cast<std::size_t>(gy) * grid + gx) * class_count + cls];
    }

    // Whole per-cell distribution, for tests and dumps.
    std::vector<double> cell(bool is_landscape, int gx, int gy) const {
        const auto& table = is_landscape ? landscape : portrait;
        const std::size_t off = (static_cast<std::size_t>(gy) * grid + gx) * class_count;
        return std::vector<double>(table.begin() + off, table.begin() + off + class_count);
    }
};

// Counts non-void pixels into normalized cells, Laplace-smooths (+1 per class
// per cell) and normalizes per cell. If one orientation group has no images
// it borrows the other group's transposed grid.
inline LocationModel train_location(const std::vector<LabelImage>& labels, int class_count,
                                    int grid = 21) {
    require(grid >= 1, "location grid must be >= 1");
    require(!labels.empty(), "location potentials need at least one training image");

    LocationModel m;
    m.grid = grid;
    m.class_count = class_count;
    const std::size_t cells = static_cast<std::size_t>(grid) * grid;
    std::vector<double> counts[2];  // 0 = landscape, 1 = portrait
    counts[0].assign(cells * class_count, 0.0);
    counts[1].assign(cells * class_count, 0.0);
    int group_images[2] = {0, 0};
    bool any_label = false;

    for (const auto& li : labels) {
        const int g = li.width >= li.height ? 0 : 1;
        ++group_images[g];
        for (int y = 0; y < li.height; ++y) {
            for (int x = 0; x < li.width; ++x) {
                const std::uint8_t v = li.at(x, y);
                if (v == kVoidLabel) continue;
                any_label = true;
                const int gx = std::min(grid - 1, x * grid / li.width);
                const int gy = std::min(grid - 1, y * grid / li.height);
                counts[g][(static_cast<std::size_t>(gy) * grid + gx) * class_count + v] += 1.0;
            }
        }
    }
    require(any_label, "all training labels are void");

    auto normalize = [&](const std::vector<double>& raw) {
        std::vector<double> out(raw.size());
        for (std::size_t cell = 0; cell < cells; ++cell) {
            double total = 0.0;
            for (int c = 0; c < class_count; ++c) total += raw[cell * class_count + c] + 1.0;
            for (int c = 0; c < class_count; ++c)
                out[cell * class_count + c] = (raw[cell * class_count + c] + 1.0) / total;
        }
        return out;
    };
    auto transpose = [&](const std::vector<double>& src) {
        std::vector<double> out(src.size());
        for (int gy = 0; gy < grid; ++gy)
            for (int gx = 0; gx < grid; ++gx)
                for (int c = 0; c < class_count; ++c)
                    out[(static_cast<std::size_t>(gy) * grid + gx) * class_count + c] =
                        src[(static_cast<std::size_t>(gx) * grid + gy) * class_count + c];
        return out;
    };

    if (group_images[0] == 0) counts[0] = transpose(counts[1]);
    if (group_images[1] == 0) counts[1] = transpose(counts[0]);
    m.landscape = normalize(counts[0]);
    m.portrait = normalize(counts[1]);
    return m;
}

// Long-format dump for plotting: orientation, class, gy, gx, probability.
inline std::string location_csv(const LocationModel& m,
                                const std::vector<std::string>& class_names) {
    std::ostringstream out;
    out << "orientation,class,gy,gx,probability\n";
    for (int orient = 0; orient < 2; ++orient) {
        const bool landscape = orient == 0;
        for (int c = 0; c < m.class_count; ++c)
            for (int gy = 0; gy < m.grid; ++gy)
                for (int gx = 0; gx < m.grid; ++gx)
                    out << (landscape ? "landscape" : "portrait") << "," << class_names[c] << ","
                        << gy << "," << gx << "," << m.cell(landscape, gx, gy)[c] << "\n";
    }
    return out.str();
}

inline void write_location(BinaryWriter& w, const LocationModel& m) {
    write_envelope(w, PayloadKind::location_model);
    w.i32(m.grid);
    w.i32(m.class_count);
    w.f64_vec(m.landscape);
    w.f64_vec(m.portrait);
}

inline LocationModel read_location(BinaryReader& r) {
    read_envelope(r, PayloadKind::location_model);
    LocationModel m;
    m.grid = r.i32();
    m.class_count = r.i32();
    m.landscape = r.f64_vec();
    m.portrait = r.f64_vec();
    return m;
}

}  // namespace ctxseg
