#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxseg/errors.hpp"
#include "ctxseg/image.hpp"

namespace ctxseg {

enum class Split { train, val, test };

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw DataError("unknown split tag: " + s);
}

inline std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

struct DatasetEntry {
    std::string image_path;
    std::string label_path;
    Split split = Split::train;
    std::string category;  // optional metadata written by the generator
};

struct DatasetManifest {
    ClassSet class_set;
    std::vector<DatasetEntry> entries;
    std::vector<std::array<int, 3>> palette;  // optional per-class display colors
    std::string base_dir;  // directory of the manifest file; paths resolve against it

    std::string resolve(const std::string& rel) const {
        std::filesystem::path p(rel);
        if (p.is_absolute() || base_dir.empty()) return rel;
        return (std::filesystem::path(base_dir) / p).string();
    }

    std::vector<const DatasetEntry*> split_entries(Split s) const {
        std::vector<const DatasetEntry*> out;
        for (const auto& e : entries)
            if (e.split == s) out.push_back(&e);
        return out;
    }
};

// An image/label pair loaded into memory.
struct LabeledImage {
    RgbImage image;
    LabelImage labels;
    std::string category;
};

inline LabeledImage load_entry(const DatasetManifest& m, const DatasetEntry& e) {
    LabeledImage li;
    li.image = read_ppm(m.resolve(e.image_path));
    li.labels = read_pgm(m.resolve(e.label_path));
    li.category = e.category;
    require(li.image.width == li.labels.width && li.image.height == li.labels.height,
            "dimension mismatch between " + e.image_path + " and " + e.label_path);
    return li;
}

inline std::vector<LabeledImage> load_split(const DatasetManifest& m, Split s) {
    std::vector<LabeledImage> out;
    for (const auto* e : m.split_entries(s)) out.push_back(load_entry(m, *e));
    return out;
}

// Parses and fully validates a manifest: every referenced raster must load,
// dimensions must match, and every label must be a class id or void.
inline DatasetManifest load_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    require(in.is_open(), "cannot open manifest: " + manifest_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest parse error in " + manifest_path + ": " + e.what());
    }

    DatasetManifest m;
    m.base_dir = std::filesystem::path(manifest_path).parent_path().string();
    require(j.contains("classes") && j["classes"].is_array(), "manifest missing \"classes\"");
    for (const auto& name : j["classes"]) m.class_set.names.push_back(name.get<std::string>());
    m.class_set.void_id = j.value("void", kVoidLabel);
    m.class_set.validate();
    require(m.class_set.void_id >= m.class_set.names.size(),
            "void id collides with a class id");

    if (j.contains("palette")) {
        for (const auto& jc : j["palette"])
            m.palette.push_back({jc[0].get<int>(), jc[1].get<int>(), jc[2].get<int>()});
        require(m.palette.size() == m.class_set.names.size(),
                "palette size does not match the class count");
    }

    require(j.contains("entries") && j["entries"].is_array(), "manifest missing \"entries\"");
    require(!j["entries"].empty(), "empty dataset");
    for (const auto& je : j["entries"]) {
        DatasetEntry e;
        e.image_path = je.at("image").get<std::string>();
        e.label_path = je.at("labels").get<std::string>();
        e.split = split_from_string(je.at("split").get<std::string>());
        e.category = je.value("category", "");
        m.entries.push_back(std::move(e));
    }

    const int c = m.class_set.count();
    for (const auto& e : m.entries) {
        LabeledImage li = load_entry(m, e);
        for (std::uint8_t v : li.labels.labels) {
            if (v != m.class_set.void_id && v >= c)
                throw DataError("label value " + std::to_string(int(v)) + " out of range in " +
                                e.label_path);
        }
    }
    return m;
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
    nlohmann::json j;
    j["classes"] = m.class_set.names;
    j["void"] = m.class_set.void_id;
    if (!m.palette.empty()) j["palette"] = m.palette;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : m.entries) {
        nlohmann::json je;
        je["image"] = e.image_path;
        je["labels"] = e.label_path;
        je["split"] = to_string(e.split);
        if (!e.category.empty()) je["category"] = e.category;
        j["entries"].push_back(je);
    }
    std::ofstream out(path);
    require(out.is_open(), "cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace ctxseg
