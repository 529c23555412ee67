// Command-line front end: dataset generation, training, inference,
// evaluation, the omega sweep and the component ablation grid.

#include <array>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ctxseg/config.hpp"
#include "ctxseg/dataset.hpp"
#include "ctxseg/eval.hpp"
#include "ctxseg/pipeline.hpp"
#include "ctxseg/synth.hpp"

namespace fs = std::filesystem;
using namespace ctxseg;

namespace {

struct CommonOpts {
    std::string config_path;
    bool print_config = false;
    std::int64_t seed_override = -1;
    int workers_override = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file (defaults when omitted)");
    cmd->add_flag("--print-config", opts.print_config,
                  "print the effective config as JSON and exit");
    cmd->add_option("--seed", opts.seed_override, "override config seed");
    cmd->add_option("--workers", opts.workers_override, "override worker count");
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig config = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
    if (opts.seed_override >= 0) config.seed = static_cast<std::uint64_t>(opts.seed_override);
    if (opts.workers_override > 0) config.workers = opts.workers_override;
    if (const char* env = std::getenv("CTXSEG_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) config.workers = w;
    }
    config.validate();
    return config;
}

// returns true if the command should stop after printing
bool maybe_print_config(const CommonOpts& opts, const RunConfig& config) {
    if (!opts.print_config) return false;
    std::cout << config_to_json(config).dump(2) << "\n";
    return true;
}

std::vector<std::array<int, 3>> default_palette(int class_count) {
    // fixed, well-separated colors for label visualization
    static const std::array<int, 3> base[] = {
        {230, 25, 75},  {60, 180, 75},   {255, 225, 25}, {0, 130, 200},  {245, 130, 48},
        {145, 30, 180}, {70, 240, 240},  {240, 50, 230}, {210, 245, 60}, {250, 190, 212},
        {0, 128, 128},  {220, 190, 255}, {170, 110, 40}, {255, 250, 200}, {128, 0, 0},
        {170, 255, 195}, {128, 128, 0},  {255, 215, 180}, {0, 0, 128},   {128, 128, 128}};
    std::vector<std::array<int, 3>> out(class_count);
    for (int c = 0; c < class_count; ++c) out[c] = base[c % (sizeof(base) / sizeof(base[0]))];
    return out;
}

RgbImage colorize(const Labeling& labeling, int width, int height,
                  const std::vector<std::array<int, 3>>& palette) {
    RgbImage img(width, height);
    for (int i = 0; i < width * height; ++i)
        for (int ch = 0; ch < 3; ++ch)
            img.data[static_cast<std::size_t>(i) * 3 + ch] =
                static_cast<std::uint8_t>(palette[labeling[i]][ch]);
    return img;
}

void run_parallel(int workers, int jobs, const std::function<void(int)>& fn) {
    if (workers <= 1 || jobs <= 1) {
        for (int i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int n = std::min(workers, jobs);
    pool.reserve(n);
    for (int t = 0; t < n; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

int cmd_gen_synth(const std::string& spec_path, std::uint64_t seed, const std::string& out_dir) {
    const SynthSpec spec = load_synth_spec(spec_path);
    const DatasetManifest manifest = generate_synthetic(spec, seed, out_dir);
    std::cout << "wrote " << manifest.entries.size() << " images ("
              << manifest.class_set.count() << " classes) to " << out_dir << "\n";
    return 0;
}

int cmd_train(const CommonOpts& common, const std::string& manifest_path,
              const std::string& out_dir, const std::string& ilp_variant, bool dump_json) {
    RunConfig config = resolve_config(common);
    if (!ilp_variant.empty()) config.ilp.variant = ilp_variant;
    config.validate();
    if (maybe_print_config(common, config)) return 0;

    const DatasetManifest manifest = load_dataset(manifest_path);
    TrainedBundle bundle = train_full_model(manifest, config);
    save_bundle(bundle, out_dir, dump_json);

    std::cout << "clusters: " << bundle.model.routed.cluster_count() << "\n";
    const auto groups = bundle.model.routed.assignment.members();
    for (std::size_t k = 0; k < groups.size(); ++k) {
        std::cout << "  cluster " << k << " (" << bundle.report.gathered[k].size()
                  << " gathered images):";
        for (int c : groups[k]) std::cout << " " << manifest.class_set.names[c];
        std::cout << "\n";
    }
    if (!bundle.report.zero_variance_classes.empty()) {
        std::cout << "warning: zero-variance correlation rows for classes:";
        for (int c : bundle.report.zero_variance_classes)
            std::cout << " " << manifest.class_set.names[c];
        std::cout << "\n";
    }
    if (!bundle.report.classes_absent_from_train.empty()) {
        std::cout << "warning: classes absent from the train split:";
        for (int c : bundle.report.classes_absent_from_train)
            std::cout << " " << manifest.class_set.names[c];
        std::cout << "\n";
    }
    std::cout << "bundle written to " << out_dir << "\n";
    return 0;
}

int cmd_predict(const CommonOpts& common, const std::string& bundle_dir,
                const std::string& manifest_path, const std::string& split_tag,
                std::vector<std::string> images, const std::string& out_dir, bool color,
                double omega, double lambda, double alpha, const std::string& prior) {
    RunConfig config = resolve_config(common);
    if (maybe_print_config(common, config)) return 0;

    const SegModel model = load_bundle(bundle_dir);
    SegmentOptions opt = SegmentOptions::from_config(model.config);
    if (omega >= 0) opt.unary.omega = omega;
    if (lambda >= 0) opt.lambda = lambda;
    if (alpha >= 0) opt.unary.alpha = alpha;
    if (prior == "none") opt.prior = PriorSource::none;

    struct Job {
        std::string input;
        std::string out_stem;
    };
    std::vector<Job> jobs;
    std::vector<std::array<int, 3>> palette = default_palette(model.class_set.count());
    if (!manifest_path.empty()) {
        const DatasetManifest manifest = load_dataset(manifest_path);
        if (!manifest.palette.empty()) palette = manifest.palette;
        for (const auto& e : manifest.entries) {
            if (!split_tag.empty() && to_string(e.split) != split_tag) continue;
            jobs.push_back({manifest.resolve(e.image_path),
                            fs::path(e.label_path).stem().string()});
        }
    }
    for (const auto& p : images) jobs.push_back({p, fs::path(p).stem().string() + "_labels"});
    require(!jobs.empty(), "nothing to predict (empty split or no images)");

    fs::create_directories(out_dir);
    run_parallel(config.workers, static_cast<int>(jobs.size()), [&](int i) {
        const RgbImage img = read_ppm(jobs[i].input);
        const Labeling pred = segment_image(model, img, opt);
        LabelImage out(img.width, img.height);
        out.labels.assign(pred.begin(), pred.end());
        write_pgm((fs::path(out_dir) / (jobs[i].out_stem + ".pgm")).string(), out);
        if (color)
            write_ppm((fs::path(out_dir) / (jobs[i].out_stem + "_color.ppm")).string(),
                      colorize(pred, img.width, img.height, palette));
    });
    std::cout << "wrote " << jobs.size() << " predictions to " << out_dir << "\n";
    return 0;
}

int cmd_evaluate(const std::string& predictions_dir, const std::string& manifest_path,
                 const std::string& split_tag, const std::string& csv_path,
                 const std::string& json_path) {
    const DatasetManifest manifest = load_dataset(manifest_path);
    ConfusionMatrix conf(manifest.class_set.count());
    int evaluated = 0;
    for (const auto& e : manifest.entries) {
        if (!split_tag.empty() && to_string(e.split) != split_tag) continue;
        const fs::path pred_path =
            fs::path(predictions_dir) / (fs::path(e.label_path).stem().string() + ".pgm");
        require(fs::exists(pred_path), "missing prediction: " + pred_path.string());
        const LabelImage pred_img = read_pgm(pred_path.string());
        const LabelImage truth = read_pgm(manifest.resolve(e.label_path));
        require(pred_img.width == truth.width && pred_img.height == truth.height,
                "prediction/truth dimension mismatch for " + e.label_path);
        Labeling pred(pred_img.labels.begin(), pred_img.labels.end());
        accumulate(conf, pred, truth);
        ++evaluated;
    }
    require(evaluated > 0, "no entries evaluated (check --split)");

    const std::string csv = metrics_csv(conf, manifest.class_set.names);
    if (csv_path.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(csv_path);
        require(out.is_open(), "cannot write " + csv_path);
        out << csv;
    }
    if (!json_path.empty()) {
        std::ofstream out(json_path);
        require(out.is_open(), "cannot write " + json_path);
        out << metrics_json(conf, manifest.class_set.names).dump(2) << "\n";
    }
    return 0;
}

int cmd_sweep_omega(const CommonOpts& common, const std::string& bundle_dir,
                    const std::string& manifest_path, const std::string& split_tag,
                    const std::string& omegas_arg, const std::string& out_path) {
    RunConfig config = resolve_config(common);
    if (maybe_print_config(common, config)) return 0;

    std::vector<double> omegas;
    std::stringstream ss(omegas_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) omegas.push_back(std::stod(tok));
    }
    require(!omegas.empty(), "empty omega list");

    const SegModel model = load_bundle(bundle_dir);
    const DatasetManifest manifest = load_dataset(manifest_path);
    const auto images = load_split(manifest, split_from_string(split_tag));
    require(!images.empty(), "validation split is empty");

    const SegmentOptions base = SegmentOptions::from_config(model.config);
    const auto points = sweep_omega(model, images, omegas, base);

    std::ostringstream csv;
    csv << "omega,average_recall,global_recall\n";
    for (const auto& p : points)
        csv << p.omega << "," << p.average_recall << "," << p.global_recall << "\n";
    if (out_path.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(out_path);
        require(out.is_open(), "cannot write " + out_path);
        out << csv.str();
    }
    return 0;
}

int cmd_ablate(const CommonOpts& common, const std::string& bundle_dir,
               const std::string& manifest_path, const std::string& split_tag, double omega,
               double lambda, const std::string& out_path) {
    RunConfig config = resolve_config(common);
    if (maybe_print_config(common, config)) return 0;

    const SegModel model = load_bundle(bundle_dir);
    const DatasetManifest manifest = load_dataset(manifest_path);
    const auto images = load_split(manifest, split_from_string(split_tag));
    require(!images.empty(), "ablation split is empty");

    SegmentOptions base = SegmentOptions::from_config(model.config);
    if (omega >= 0) base.unary.omega = omega;
    if (lambda >= 0) base.lambda = lambda;

    const auto cells = ablate(model, images, base);
    std::ostringstream csv;
    csv << "appearance,prior,average_recall,global_recall,mean_iou\n";
    for (const auto& c : cells)
        csv << c.appearance << "," << c.prior << "," << c.average_recall << ","
            << c.global_recall << "," << c.mean_iou << "\n";
    if (out_path.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(out_path);
        require(out.is_open(), "cannot write " + out_path);
        out << csv.str();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semantic segmentation with clustered texton forests, a multi-label "
                 "image prior, location potentials and a Potts CRF"};
    app.require_subcommand(1);

    // gen-synth
    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic labeled dataset");
    std::string gen_spec, gen_out;
    std::uint64_t gen_seed = 1;
    gen->add_option("--spec", gen_spec, "synthetic dataset spec (JSON)")->required();
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train a model bundle from a manifest");
    CommonOpts train_common;
    std::string train_manifest, train_out, train_ilp;
    bool train_dump_json = false;
    add_common(train, train_common);
    train->add_option("--manifest", train_manifest, "dataset manifest")->required();
    train->add_option("--out", train_out, "bundle output directory")->required();
    train->add_option("--ilp", train_ilp, "prior variant: context|multiclass")
        ->check(CLI::IsMember({"context", "multiclass"}));
    train->add_flag("--dump-json", train_dump_json, "also write JSON forest dumps");

    // predict
    auto* predict = app.add_subcommand("predict", "segment images with a trained bundle");
    CommonOpts pred_common;
    std::string pred_bundle, pred_manifest, pred_split = "test", pred_out, pred_prior;
    std::vector<std::string> pred_images;
    bool pred_color = false;
    double pred_omega = -1, pred_lambda = -1, pred_alpha = -1;
    add_common(predict, pred_common);
    predict->add_option("--bundle", pred_bundle, "model bundle directory")->required();
    predict->add_option("--manifest", pred_manifest, "dataset manifest to segment");
    predict->add_option("--split", pred_split, "manifest split to segment");
    predict->add_option("--image", pred_images, "extra PPM images to segment");
    predict->add_option("--out", pred_out, "output directory")->required();
    predict->add_flag("--color", pred_color, "also write color-mapped PPMs");
    predict->add_option("--omega", pred_omega, "override appearance/location blend");
    predict->add_option("--lambda", pred_lambda, "override Potts strength");
    predict->add_option("--alpha", pred_alpha, "override prior exponent");
    predict->add_option("--prior", pred_prior, "set to \"none\" to disable the prior")
        ->check(CLI::IsMember({"none", "learned"}));

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "compare predictions against ground truth");
    std::string eval_pred, eval_manifest, eval_split = "test", eval_csv, eval_json;
    eval->add_option("--predictions", eval_pred, "directory of predicted PGMs")->required();
    eval->add_option("--manifest", eval_manifest, "dataset manifest")->required();
    eval->add_option("--split", eval_split, "manifest split to evaluate");
    eval->add_option("--csv", eval_csv, "write metrics CSV here (default: stdout)");
    eval->add_option("--json", eval_json, "also write metrics JSON here");

    // sweep-omega
    auto* sweep = app.add_subcommand("sweep-omega", "evaluate a list of omega values");
    CommonOpts sweep_common;
    std::string sweep_bundle, sweep_manifest, sweep_split = "val", sweep_omegas, sweep_out;
    add_common(sweep, sweep_common);
    sweep->add_option("--bundle", sweep_bundle, "model bundle directory")->required();
    sweep->add_option("--manifest", sweep_manifest, "dataset manifest")->required();
    sweep->add_option("--split", sweep_split, "split to evaluate");
    sweep->add_option("--omegas", sweep_omegas, "comma-separated omega values")->required();
    sweep->add_option("--out", sweep_out, "CSV output path (default: stdout)");

    // ablate
    auto* abl = app.add_subcommand("ablate", "appearance x prior ablation grid");
    CommonOpts abl_common;
    std::string abl_bundle, abl_manifest, abl_split = "test", abl_out;
    double abl_omega = -1, abl_lambda = -1;
    add_common(abl, abl_common);
    abl->add_option("--bundle", abl_bundle, "model bundle directory")->required();
    abl->add_option("--manifest", abl_manifest, "dataset manifest")->required();
    abl->add_option("--split", abl_split, "split to evaluate");
    abl->add_option("--omega", abl_omega, "fixed omega for all cells");
    abl->add_option("--lambda", abl_lambda, "fixed lambda for all cells");
    abl->add_option("--out", abl_out, "CSV output path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage errors
    }

    try {
        if (gen->parsed()) return cmd_gen_synth(gen_spec, gen_seed, gen_out);
        if (train->parsed())
            return cmd_train(train_common, train_manifest, train_out, train_ilp, train_dump_json);
        if (predict->parsed())
            return cmd_predict(pred_common, pred_bundle, pred_manifest, pred_split, pred_images,
                               pred_out, pred_color, pred_omega, pred_lambda, pred_alpha,
                               pred_prior);
        if (eval->parsed())
            return cmd_evaluate(eval_pred, eval_manifest, eval_split, eval_csv, eval_json);
        if (sweep->parsed())
            return cmd_sweep_omega(sweep_common, sweep_bundle, sweep_manifest, sweep_split,
                                   sweep_omegas, sweep_out);
        if (abl->parsed())
            return cmd_ablate(abl_common, abl_bundle, abl_manifest, abl_split, abl_omega,
                              abl_lambda, abl_out);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
