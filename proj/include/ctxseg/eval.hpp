#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxseg/crf.hpp"
#include "ctxseg/errors.hpp"
#include "ctxseg/image.hpp"

namespace ctxseg {

// Rows are ground truth, columns are predictions; void pixels never counted.
struct ConfusionMatrix {
    int class_count = 0;
    std::vector<std::uint64_t> counts;  // row-major C x C

    explicit ConfusionMatrix(int c = 0)
        : class_count(c), counts(static_cast<std::size_t>(c) * c, 0) {}

    std::uint64_t at(int truth, int pred) const {
        return counts[static_cast<std::size_t>(truth) * class_count + pred];
    }
    std::uint64_t& at(int truth, int pred) {
        return counts[static_cast<std::size_t>(truth) * class_count + pred];
    }

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto v : counts) t += v;
        return t;
    }

    // partial matrices from parallel workers merge by plain summation
    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        check_invariant(class_count == o.class_count, "merging confusion matrices of mixed sizes");
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
        return *this;
    }
};

inline void accumulate(ConfusionMatrix& conf, const Labeling& prediction,
                       const LabelImage& truth) {
    require(prediction.size() == truth.labels.size(), "prediction/truth dimension mismatch");
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const std::uint8_t t = truth.labels[i];
        if (t == kVoidLabel) continue;
        require(t < conf.class_count && prediction[i] < conf.class_count,
                "label out of range in evaluation");
        ++conf.at(t, prediction[i]);
    }
}

struct RecallReport {
    std::vector<std::optional<double>> per_class;  // nullopt: class absent from truth
    double average = 0.0;                          // mean over defined classes
    double global = 0.0;                           // trace / total
};

inline RecallReport recalls(const ConfusionMatrix& conf) {
    require(conf.total() > 0, "empty confusion matrix");
    RecallReport r;
    r.per_class.resize(conf.class_count);
    double sum = 0.0;
    int defined = 0;
    std::uint64_t trace = 0;
    for (int c = 0; c < conf.class_count; ++c) {
        std::uint64_t row = 0;
        for (int p = 0; p < conf.class_count; ++p) row += conf.at(c, p);
        trace += conf.at(c, c);
        if (row == 0) continue;
        r.per_class[c] = static_cast<double>(conf.at(c, c)) / row;
        sum += *r.per_class[c];
        ++defined;
    }
    r.average = defined > 0 ? sum / defined : 0.0;
    r.global = static_cast<double>(trace) / conf.total();
    return r;
}

struct IouReport {
    std::vector<std::optional<double>> per_class;  // nullopt: never predicted nor present
    double mean = 0.0;
};

inline IouReport iou(const ConfusionMatrix& conf) {
    require(conf.total() > 0, "empty confusion matrix");
    IouReport r;
    r.per_class.resize(conf.class_count);
    double sum = 0.0;
    int defined = 0;
    for (int c = 0; c < conf.class_count; ++c) {
        std::uint64_t tp = conf.at(c, c), fp = 0, fn = 0;
        for (int k = 0; k < conf.class_count; ++k) {
            if (k == c) continue;
            fp += conf.at(k, c);
            fn += conf.at(c, k);
        }
        const std::uint64_t denom = tp + fp + fn;
        if (denom == 0) continue;
        r.per_class[c] = static_cast<double>(tp) / denom;
        sum += *r.per_class[c];
        ++defined;
    }
    r.mean = defined > 0 ? sum / defined : 0.0;
    return r;
}

// One row per class plus summary rows; mirrors the JSON report.
inline std::string metrics_csv(const ConfusionMatrix& conf,
                               const std::vector<std::string>& class_names) {
    const RecallReport rec = recalls(conf);
    const IouReport jac = iou(conf);
    std::ostringstream out;
    out << "class,recall,iou\n";
    auto fmt = [](const std::optional<double>& v) {
        return v ? std::to_string(*v) : std::string("undefined");
    };
    for (int c = 0; c < conf.class_count; ++c)
        out << class_names[c] << "," << fmt(rec.per_class[c]) << "," << fmt(jac.per_class[c])
            << "\n";
    out << "average," << rec.average << "," << jac.mean << "\n";
    out << "global," << rec.global << ",\n";
    return out.str();
}

inline nlohmann::json metrics_json(const ConfusionMatrix& conf,
                                   const std::vector<std::string>& class_names) {
    const RecallReport rec = recalls(conf);
    const IouReport jac = iou(conf);
    nlohmann::json j;
    j["classes"] = nlohmann::json::object();
    for (int c = 0; c < conf.class_count; ++c) {
        nlohmann::json jc;
        if (rec.per_class[c]) jc["recall"] = *rec.per_class[c];
        if (jac.per_class[c]) jc["iou"] = *jac.per_class[c];
        j["classes"][class_names[c]] = jc;
    }
    j["average_recall"] = rec.average;
    j["global_recall"] = rec.global;
    j["mean_iou"] = jac.mean;
    j["evaluated_pixels"] = conf.total();
    return j;
}

}  // namespace ctxseg
