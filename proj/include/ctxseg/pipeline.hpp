#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxseg/config.hpp"
#include "ctxseg/crf.hpp"
#include "ctxseg/dataset.hpp"
#include "ctxseg/eval.hpp"
#include "ctxseg/ilp.hpp"
#include "ctxseg/location.hpp"
#include "ctxseg/matrix.hpp"
#include "ctxseg/routed_forest.hpp"

namespace ctxseg {

// Everything a segmentation run needs, as saved in a model bundle directory.
struct SegModel {
    ClassSet class_set;
    TextonForest base_forest;  // full-data forest: texton features + the plain-STF baseline
    RoutedForest routed;
    IlpModel ilp_context;
    IlpModel ilp_multiclass;
    std::string ilp_variant = "context";  // which one `ilp()` serves
    LocationModel location;
    RunConfig config;

    const IlpModel& ilp() const {
        return ilp_variant == "multiclass" ? ilp_multiclass : ilp_context;
    }
    GlobalFeatureExtractor recognizer_extractor() const {
        return GlobalFeatureExtractor(routed.recognizer_feature, &base_forest);
    }
    GlobalFeatureExtractor ilp_extractor() const {
        return GlobalFeatureExtractor(ilp_context.feature_id, &base_forest);
    }
};

enum class AppearanceSource { dstf, stf };
enum class PriorSource { learned, none, ground_truth };

struct SegmentOptions {
    UnaryOptions unary;
    double lambda = 1.5;
    int max_sweeps = 10;
    AppearanceSource appearance = AppearanceSource::dstf;
    PriorSource prior = PriorSource::learned;
    const IlpModel* ilp_override = nullptr;        // ablation: evaluate a specific prior model
    const LabelImage* truth = nullptr;             // required for PriorSource::ground_truth

    static SegmentOptions from_config(const RunConfig& c) {
        SegmentOptions o;
        o.unary = c.unary_options();
        o.lambda = c.crf.lambda;
        o.max_sweeps = c.crf.max_sweeps;
        return o;
    }
};

inline PresenceVector predict_ilp(const SegModel& model, const IlpModel& ilp,
                                  const RgbImage& image) {
    return ilp.predict(model.ilp_extractor().extract(image));
}

// Core inference: appearance beliefs (skipped entirely at omega = 1) blended
// with location, scaled by the presence prior, then smoothed by expansion
// moves from the unary argmin.
inline Labeling segment_with_prior(const SegModel& model, const RgbImage& image,
                                   const PresenceVector& zeta, const SegmentOptions& opt) {
    const int c = model.class_set.count();
    std::vector<ClassDistribution> appearance;
    if (opt.unary.omega < 1.0) {
        if (opt.appearance == AppearanceSource::dstf) {
            appearance = model.routed.classify_image(model.recognizer_extractor(), image);
        } else {
            appearance = model.base_forest.classify_image(image);
        }
    }
    const CrfProblem prob = build_unary(image.width, image.height, c, appearance, model.location,
                                        zeta, opt.unary, opt.lambda);
    Labeling init = unary_argmin(prob);
    if (prob.lambda == 0.0) return init;  // expansions cannot improve a separable problem
    return alpha_expansion(prob, std::move(init), opt.max_sweeps);
}

inline PresenceVector make_prior(const SegModel& model, const RgbImage& image,
                                 const SegmentOptions& opt) {
    const int c = model.class_set.count();
    switch (opt.prior) {
        case PriorSource::none: return PresenceVector(c, 1.0);
        case PriorSource::ground_truth: {
            check_invariant(opt.truth != nullptr, "ground_truth prior needs a truth image");
            const auto present =
                presence_from_labels(*opt.truth, c, model.config.ilp.params);
            PresenceVector zeta(c);
            for (int k = 0; k < c; ++k) zeta[k] = present[k] ? 1.0 : 0.0;
            return zeta;
        }
        default: {
            const IlpModel& ilp = opt.ilp_override ? *opt.ilp_override : model.ilp();
            return predict_ilp(model, ilp, image);
        }
    }
}

inline Labeling segment_image(const SegModel& model, const RgbImage& image,
                              const SegmentOptions& opt) {
    return segment_with_prior(model, image, make_prior(model, image, opt), opt);
}

// ---- training ---------------------------------------------------------------

struct TrainReport {
    Matrix omega;
    Matrix psi;
    std::vector<std::vector<int>> gathered;  // per-cluster training image indices
    std::vector<int> zero_variance_classes;
    std::vector<int> classes_absent_from_train;
};

struct TrainedBundle {
    SegModel model;
    TrainReport report;
};

inline TrainedBundle train_full_model(const DatasetManifest& manifest, const RunConfig& config) {
    config.validate();
    const auto train_set = load_split(manifest, Split::train);
    require(!train_set.empty(), "manifest has no train entries");
    const int c = manifest.class_set.count();

    TrainedBundle out;
    out.model.class_set = manifest.class_set;
    out.model.config = config;
    out.model.ilp_variant = config.ilp.variant;

    RoutedForestParams rf;
    rf.stf = config.stf;
    rf.cap_fraction = config.dstf.cap_fraction;
    rf.min_cluster_members = config.dstf.min_cluster_members;
    rf.linkage = linkage_from_string(config.dstf.linkage);
    rf.gather_merge = gather_merge_from_string(config.dstf.gather_merge);
    rf.recognizer_feature = config.dstf.recognizer_feature;
    rf.svm = config.dstf.svm;

    RoutedForestTraining rft = train_routed_forest(train_set, rf, c, config.seed);
    out.model.base_forest = std::move(rft.base_forest);
    out.model.routed = std::move(rft.model);
    out.report.omega = std::move(rft.omega);
    out.report.psi = std::move(rft.psi);
    out.report.gathered = std::move(rft.gathered);
    out.report.zero_variance_classes = std::move(rft.zero_variance_classes);
    out.report.classes_absent_from_train = std::move(rft.classes_absent_from_train);

    GlobalFeatureExtractor ilp_features(config.ilp.feature, &out.model.base_forest);
    out.model.ilp_context = train_ilp(train_set, ilp_features, c, config.ilp.params, "context",
                                      Rng::derive(config.seed, 2));
    out.model.ilp_multiclass = train_ilp(train_set, ilp_features, c, config.ilp.params,
                                         "multiclass", Rng::derive(config.seed, 3));

    std::vector<LabelImage> labels;
    labels.reserve(train_set.size());
    for (const auto& li : train_set) labels.push_back(li.labels);
    out.model.location = train_location(labels, c, config.location.grid);
    return out;
}

// ---- bundle directory -------------------------------------------------------

inline void save_bundle(const TrainedBundle& bundle, const std::string& dir,
                        bool dump_json = false) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const SegModel& m = bundle.model;

    save_forest(m.base_forest, (fs::path(dir) / "texton_forest.bin").string());
    for (std::size_t k = 0; k < m.routed.specialists.size(); ++k) {
        save_forest(m.routed.specialists[k],
                    (fs::path(dir) / ("specialist_" + std::to_string(k) + ".bin")).string());
    }
    {
        BinaryWriter w;
        m.routed.recognizer.write(w);
        w.save((fs::path(dir) / "recognizer.bin").string());
    }
    {
        BinaryWriter w;
        write_ilp(w, m.ilp_context);
        w.save((fs::path(dir) / "ilp_context.bin").string());
    }
    {
        BinaryWriter w;
        write_ilp(w, m.ilp_multiclass);
        w.save((fs::path(dir) / "ilp_multiclass.bin").string());
    }
    {
        // the selected variant, under the canonical name
        BinaryWriter w;
        write_ilp(w, m.ilp());
        w.save((fs::path(dir) / "ilp.bin").string());
    }
    {
        BinaryWriter w;
        write_location(w, m.location);
        w.save((fs::path(dir) / "location.bin").string());
    }

    nlohmann::json assignment;
    for (int c = 0; c < m.class_set.count(); ++c)
        assignment[m.class_set.names[c]] = m.routed.assignment.cluster_of[c];
    std::ofstream af((fs::path(dir) / "assignment.json").string());
    af << assignment.dump(2) << "\n";

    save_csv(bundle.report.omega, (fs::path(dir) / "omega.csv").string(), m.class_set.names);
    save_csv(bundle.report.psi, (fs::path(dir) / "psi.csv").string(), m.class_set.names);
    {
        std::ofstream lf((fs::path(dir) / "location.csv").string());
        lf << location_csv(m.location, m.class_set.names);
    }

    nlohmann::json meta;
    meta["format_version"] = kFormatVersion;
    meta["classes"] = m.class_set.names;
    meta["void"] = m.class_set.void_id;
    meta["config"] = config_to_json(m.config);
    meta["ilp_variant"] = m.ilp_variant;
    meta["cluster_count"] = m.routed.cluster_count();
    meta["cluster_of"] = m.routed.assignment.cluster_of;
    nlohmann::json gathered = nlohmann::json::array();
    for (const auto& g : bundle.report.gathered) gathered.push_back(g);
    meta["gathered_train_indices"] = gathered;
    meta["zero_variance_classes"] = bundle.report.zero_variance_classes;
    meta["classes_absent_from_train"] = bundle.report.classes_absent_from_train;
    meta["omega_csv"] = "omega.csv";
    meta["psi_csv"] = "psi.csv";
    std::ofstream mf((fs::path(dir) / "meta.json").string());
    mf << meta.dump(2) << "\n";

    if (dump_json) {
        std::ofstream df((fs::path(dir) / "texton_forest.json").string());
        df << forest_debug_json(m.base_forest).dump(2) << "\n";
        for (std::size_t k = 0; k < m.routed.specialists.size(); ++k) {
            std::ofstream sf(
                (fs::path(dir) / ("specialist_" + std::to_string(k) + ".json")).string());
            sf << forest_debug_json(m.routed.specialists[k]).dump(2) << "\n";
        }
    }
}

inline SegModel load_bundle(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    require(fs::exists(root / "meta.json"), "not a model bundle (missing meta.json): " + dir);

    std::ifstream mf((root / "meta.json").string());
    nlohmann::json meta;
    try {
        mf >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt meta.json: " + std::string(e.what()));
    }

    SegModel m;
    for (const auto& n : meta.at("classes")) m.class_set.names.push_back(n.get<std::string>());
    m.class_set.void_id = meta.value("void", kVoidLabel);
    m.class_set.validate();
    m.config = config_from_json(meta.at("config"));
    m.ilp_variant = meta.value("ilp_variant", "context");

    m.base_forest = load_forest((root / "texton_forest.bin").string());
    const int k_clusters = meta.at("cluster_count").get<int>();
    m.routed.assignment.cluster_count = k_clusters;
    m.routed.assignment.cluster_of = meta.at("cluster_of").get<std::vector<int>>();
    m.routed.recognizer_feature = m.config.dstf.recognizer_feature;
    for (int k = 0; k < k_clusters; ++k) {
        const auto path = root / ("specialist_" + std::to_string(k) + ".bin");
        require(fs::exists(path), "bundle is missing " + path.string());
        m.routed.specialists.push_back(load_forest(path.string()));
    }
    {
        BinaryReader r = BinaryReader::from_file((root / "recognizer.bin").string());
        m.routed.recognizer = LinearClassifier::read(r);
    }
    {
        BinaryReader r = BinaryReader::from_file((root / "ilp_context.bin").string());
        m.ilp_context = read_ilp(r);
    }
    {
        BinaryReader r = BinaryReader::from_file((root / "ilp_multiclass.bin").string());
        m.ilp_multiclass = read_ilp(r);
    }
    {
        BinaryReader r = BinaryReader::from_file((root / "location.bin").string());
        m.location = read_location(r);
    }
    return m;
}

// ---- evaluation-oriented drivers ---------------------------------------------

struct SplitMetrics {
    double average_recall = 0.0;
    double global_recall = 0.0;
    double mean_iou = 0.0;
};

inline SplitMetrics evaluate_on(const SegModel& model, const std::vector<LabeledImage>& images,
                                const SegmentOptions& opt) {
    ConfusionMatrix conf(model.class_set.count());
    for (const auto& li : images) {
        SegmentOptions local = opt;
        if (opt.prior == PriorSource::ground_truth) local.truth = &li.labels;
        const Labeling pred = segment_image(model, li.image, local);
        accumulate(conf, pred, li.labels);
    }
    const RecallReport r = recalls(conf);
    return {r.average, r.global, iou(conf).mean};
}

struct SweepPoint {
    double omega;
    double average_recall;
    double global_recall;
};

inline std::vector<SweepPoint> sweep_omega(const SegModel& model,
                                           const std::vector<LabeledImage>& images,
                                           const std::vector<double>& omegas,
                                           const SegmentOptions& base) {
    require(!omegas.empty(), "empty omega list");
    require(!images.empty(), "sweep needs a non-empty validation split");
    std::vector<SweepPoint> out;
    for (double w : omegas) {
        SegmentOptions opt = base;
        opt.unary.omega = w;
        const SplitMetrics m = evaluate_on(model, images, opt);
        out.push_back({w, m.average_recall, m.global_recall});
    }
    return out;
}

struct AblationCell {
    std::string appearance;  // "stf" or "dstf"
    std::string prior;       // "none", "multiclass", "context"
    double average_recall;
    double global_recall;
    double mean_iou;
};

// The 2x3 grid: appearance source x prior variant. Location and smoothing
// settings come from `base` and are held fixed across cells.
inline std::vector<AblationCell> ablate(const SegModel& model,
                                        const std::vector<LabeledImage>& images,
                                        const SegmentOptions& base) {
    std::vector<AblationCell> cells;
    for (const auto appearance : {AppearanceSource::stf, AppearanceSource::dstf}) {
        for (const std::string& prior : {std::string("none"), std::string("multiclass"),
                                         std::string("context")}) {
            SegmentOptions opt = base;
            opt.appearance = appearance;
            if (prior == "none") {
                opt.prior = PriorSource::none;
            } else {
                opt.prior = PriorSource::learned;
                opt.ilp_override = prior == "context" ? &model.ilp_context : &model.ilp_multiclass;
            }
            const SplitMetrics m = evaluate_on(model, images, opt);
            cells.push_back({appearance == AppearanceSource::stf ? "stf" : "dstf", prior,
                             m.average_recall, m.global_recall, m.mean_iou});
        }
    }
    return cells;
}

}  // namespace ctxseg
