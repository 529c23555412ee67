#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "ctxseg/clustering.hpp"
#include "ctxseg/cooccurrence.hpp"
#include "ctxseg/crf.hpp"
#include "ctxseg/errors.hpp"
#include "ctxseg/ilp.hpp"
#include "ctxseg/linear.hpp"
#include "ctxseg/stf.hpp"

namespace ctxseg {

// Every tunable of the pipeline, with documented defaults. Unknown keys are
// hard errors so config typos cannot silently fall back to defaults.
struct RunConfig {
    std::uint64_t seed = 1;
    int workers = 1;

    StfParams stf;

    struct Dstf {
        double cap_fraction = 0.07;
        int min_cluster_members = 3;
        std::string linkage = "average";
        std::string gather_merge = "round_robin";
        std::string recognizer_feature = "color_grid";
        LinearSvmParams svm;
    } dstf;

    struct Ilp {
        std::string variant = "context";  // "context" or "multiclass"
        std::string feature = "texton_color";
        IlpParams params;
    } ilp;

    struct Location {
        int grid = 21;
    } location;

    struct Crf {
        double omega = 0.3;
        double lambda = 1.5;
        double alpha = 1.0;
        double epsilon = 1e-6;
        int max_sweeps = 10;
        bool scalar_prior = false;
    } crf;

    UnaryOptions unary_options() const {
        UnaryOptions o;
        o.omega = crf.omega;
        o.alpha = crf.alpha;
        o.epsilon = crf.epsilon;
        o.scalar_prior = crf.scalar_prior;
        return o;
    }

    void validate() const {
        stf.validate();
        require(dstf.cap_fraction > 0.0 && dstf.cap_fraction <= 1.0,
                "dstf.cap_fraction must be in (0, 1]");
        require(dstf.min_cluster_members >= 1, "dstf.min_cluster_members must be >= 1");
        linkage_from_string(dstf.linkage);
        gather_merge_from_string(dstf.gather_merge);
        require(ilp.variant == "context" || ilp.variant == "multiclass",
                "ilp.variant must be \"context\" or \"multiclass\"");
        ilp.params.validate();
        require(location.grid >= 1, "location.grid must be >= 1");
        require(crf.omega >= 0.0 && crf.omega <= 1.0, "crf.omega must lie in [0, 1]");
        require(crf.lambda >= 0.0 && crf.alpha >= 0.0 && crf.epsilon > 0.0, "bad crf settings");
        require(crf.max_sweeps >= 1, "crf.max_sweeps must be >= 1");
        require(workers >= 1, "workers must be >= 1");
    }
};

namespace detail {

// Tracks which keys a section consumed and rejects the rest.
class StrictObject {
public:
    StrictObject(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        require(j.is_object(), path_ + " must be a JSON object");
    }

    template <typename T>
    void get(const char* key, T& into) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            into = j_[key].get<T>();
        } catch (const nlohmann::json::exception&) {
            throw DataError("bad value type for " + path_ + "." + key);
        }
    }

    const nlohmann::json* section(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_[key] : nullptr;
    }

    // must be called once all keys were consumed
    void reject_unknown() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key()))
                throw DataError("unknown config key: " + path_ + "." + it.key());
        }
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    detail::StrictObject root(j, "config");
    root.get("seed", c.seed);
    root.get("workers", c.workers);
    if (const auto* s = root.section("stf")) {
        detail::StrictObject o(*s, "stf");
        o.get("patch_size", c.stf.patch_size);
        o.get("tree_count", c.stf.tree_count);
        o.get("max_depth", c.stf.max_depth);
        o.get("candidates_per_node", c.stf.candidates_per_node);
        o.get("min_samples_leaf", c.stf.min_samples_leaf);
        o.get("pixel_stride", c.stf.pixel_stride);
        o.reject_unknown();
    }
    if (const auto* s = root.section("dstf")) {
        detail::StrictObject o(*s, "dstf");
        o.get("cap_fraction", c.dstf.cap_fraction);
        o.get("min_cluster_members", c.dstf.min_cluster_members);
        o.get("linkage", c.dstf.linkage);
        o.get("gather_merge", c.dstf.gather_merge);
        o.get("recognizer_feature", c.dstf.recognizer_feature);
        o.get("svm_epochs", c.dstf.svm.epochs);
        o.get("svm_learning_rate", c.dstf.svm.learning_rate);
        o.get("svm_l2", c.dstf.svm.l2);
        o.reject_unknown();
    }
    if (const auto* s = root.section("ilp")) {
        detail::StrictObject o(*s, "ilp");
        o.get("variant", c.ilp.variant);
        o.get("feature", c.ilp.feature);
        o.get("tree_count", c.ilp.params.tree_count);
        o.get("max_depth", c.ilp.params.max_depth);
        o.get("candidates_per_node", c.ilp.params.candidates_per_node);
        o.get("weighted_split", c.ilp.params.weighted_split);
        o.get("presence_min_pixels", c.ilp.params.presence_min_pixels);
        o.get("presence_min_fraction", c.ilp.params.presence_min_fraction);
        o.reject_unknown();
    }
    if (const auto* s = root.section("location")) {
        detail::StrictObject o(*s, "location");
        o.get("grid", c.location.grid);
        o.reject_unknown();
    }
    if (const auto* s = root.section("crf")) {
        detail::StrictObject o(*s, "crf");
        o.get("omega", c.crf.omega);
        o.get("lambda", c.crf.lambda);
        o.get("alpha", c.crf.alpha);
        o.get("epsilon", c.crf.epsilon);
        o.get("max_sweeps", c.crf.max_sweeps);
        o.get("scalar_prior", c.crf.scalar_prior);
        o.reject_unknown();
    }
    root.reject_unknown();
    c.validate();
    return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["stf"] = {{"patch_size", c.stf.patch_size},
                {"tree_count", c.stf.tree_count},
                {"max_depth", c.stf.max_depth},
                {"candidates_per_node", c.stf.candidates_per_node},
                {"min_samples_leaf", c.stf.min_samples_leaf},
                {"pixel_stride", c.stf.pixel_stride}};
    j["dstf"] = {{"cap_fraction", c.dstf.cap_fraction},
                 {"min_cluster_members", c.dstf.min_cluster_members},
                 {"linkage", c.dstf.linkage},
                 {"gather_merge", c.dstf.gather_merge},
                 {"recognizer_feature", c.dstf.recognizer_feature},
                 {"svm_epochs", c.dstf.svm.epochs},
                 {"svm_learning_rate", c.dstf.svm.learning_rate},
                 {"svm_l2", c.dstf.svm.l2}};
    j["ilp"] = {{"variant", c.ilp.variant},
                {"feature", c.ilp.feature},
                {"tree_count", c.ilp.params.tree_count},
                {"max_depth", c.ilp.params.max_depth},
                {"candidates_per_node", c.ilp.params.candidates_per_node},
                {"weighted_split", c.ilp.params.weighted_split},
                {"presence_min_pixels", c.ilp.params.presence_min_pixels},
                {"presence_min_fraction", c.ilp.params.presence_min_fraction}};
    j["location"] = {{"grid", c.location.grid}};
    j["crf"] = {{"omega", c.crf.omega},     {"lambda", c.crf.lambda},
                {"alpha", c.crf.alpha},     {"epsilon", c.crf.epsilon},
                {"max_sweeps", c.crf.max_sweeps}, {"scalar_prior", c.crf.scalar_prior}};
    return j;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    require(in.is_open(), "cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace ctxseg
