#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lungkit/classic.hpp"
#include "lungkit/config.hpp"
#include "lungkit/harness.hpp"
#include "lungkit/metrics.hpp"
#include "lungkit/morphoseg.hpp"
#include "lungkit/preprocess.hpp"
#include "lungkit/raster.hpp"
#include "lungkit/selftest.hpp"
#include "lungkit/tinynet.hpp"

namespace fs = std::filesystem;
using namespace lungkit;

namespace {

bool is_image_file(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".pgm" || ext == ".png";
}

/// Input images as (absolute path, output-relative path) pairs, sorted for
/// reproducible ordering. `in` may be an image directory or a CSV manifest.
std::vector<std::pair<fs::path, fs::path>> collect_images(const fs::path& in) {
    std::vector<std::pair<fs::path, fs::path>> files;
    if (fs::is_regular_file(in)) {
        const DatasetManifest manifest = load_manifest(in);
        for (const ManifestEntry& e : manifest.entries)
            files.emplace_back(e.path, fs::relative(e.path, in.parent_path()));
        return files;
    }
    if (!fs::is_directory(in)) throw std::runtime_error("missing input: " + in.string());
    for (const auto& entry : fs::recursive_directory_iterator(in))
        if (entry.is_regular_file() && is_image_file(entry.path()))
            files.emplace_back(entry.path(), fs::relative(entry.path(), in));
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no images under " + in.string());
    return files;
}

Raster preprocess_image(const Raster& img, const RunConfig& cfg) {
    Raster work = img;
    if (cfg.preprocess.apply_clahe) {
        ClaheParams p;
        p.clip_limit = cfg.preprocess.clahe_clip;
        p.tiles_x = p.tiles_y = cfg.preprocess.clahe_grid;
        work = clahe(work, p);
    }
    ResizeSpec spec;
    spec.target_w = spec.target_h = cfg.preprocess.size;
    return resize(work, spec);
}

struct SegDataset {
    std::vector<std::string> names;
    nn::Tensor4f inputs, targets;
};

SegDataset load_seg_dataset(const RunConfig& cfg) {
    if (cfg.dataset.images.empty() || cfg.dataset.masks.empty())
        throw std::runtime_error("config: dataset.images and dataset.masks are required");
    const auto files = collect_images(cfg.dataset.images);
    const fs::path mask_dir = cfg.dataset.masks;
    const int size = cfg.preprocess.size;
    SegDataset ds;
    ds.inputs = nn::Tensor4f(static_cast<int>(files.size()), 1, size, size);
    ds.targets = nn::Tensor4f(static_cast<int>(files.size()), 1, size, size);
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    std::vector<std::string> errors(files.size());
    parallel_for(files.size(), [&](std::size_t i) {
        const auto& [path, rel] = files[i];
        fs::path mask_path;
        for (const char* ext : {".pgm", ".png"}) {
            fs::path candidate = mask_dir / rel;
            candidate.replace_extension(ext);
            if (fs::exists(candidate)) {
                mask_path = candidate;
                break;
            }
        }
        if (mask_path.empty()) {
            errors[i] = "no mask for stem \"" + rel.stem().string() + "\"";
            return;
        }
        const FloatRaster img = normalize(preprocess_image(load_image(path), cfg));
        const Raster mask_raw = load_image(mask_path);
        BinaryMask mask(mask_raw.width, mask_raw.height);
        for (std::size_t p = 0; p < mask_raw.size(); ++p) mask.bits[p] = mask_raw.data[p] != 0;
        const BinaryMask mask_sized = resize(mask, size, size);
        std::copy_n(img.data.begin(), plane, ds.inputs.data.begin() + static_cast<std::ptrdiff_t>(i * plane));
        for (std::size_t p = 0; p < plane; ++p)
            ds.targets.data[i * plane + p] = static_cast<float>(mask_sized.bits[p]);
    });
    for (const std::string& e : errors)
        if (!e.empty()) throw std::runtime_error(e);
    for (const auto& [path, rel] : files) ds.names.push_back(rel.stem().string());
    return ds;
}

struct ClfDataset {
    std::vector<std::string> names;
    std::vector<int> labels;
    nn::Tensor4f inputs, targets;  // targets: labels as a [N,1,1,1] tensor
};

ClfDataset load_clf_dataset(const RunConfig& cfg) {
    if (cfg.dataset.root.empty())
        throw std::runtime_error("config: dataset.root is required");
    const DatasetManifest manifest = load_manifest(cfg.dataset.root);
    const int size = cfg.preprocess.size;
    ClfDataset ds;
    ds.inputs = nn::Tensor4f(static_cast<int>(manifest.size()), 1, size, size);
    ds.targets = nn::Tensor4f(static_cast<int>(manifest.size()), 1, 1, 1);
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    parallel_for(manifest.size(), [&](std::size_t i) {
        const FloatRaster img =
            normalize(preprocess_image(load_image(manifest.entries[i].path), cfg));
        std::copy_n(img.data.begin(), plane,
                    ds.inputs.data.begin() + static_cast<std::ptrdiff_t>(i * plane));
        ds.targets.data[i] = static_cast<float>(manifest.entries[i].label);
    });
    for (const ManifestEntry& e : manifest.entries) {
        ds.names.push_back(fs::path(e.path).stem().string());
        ds.labels.push_back(e.label);
    }
    return ds;
}

void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

void print_history(const std::vector<EpochStats>& history) {
    for (std::size_t e = 0; e < history.size(); ++e)
        std::cout << "epoch " << e + 1 << "  train " << history[e].train_loss << "  val "
                  << history[e].val_loss << "\n";
}

TrainConfig train_config_for(const RunConfig& cfg, bool segmentation) {
    TrainConfig tc;
    tc.lr = cfg.train.lr;
    tc.batch_size = segmentation ? cfg.train.batch_seg : cfg.train.batch_clf;
    tc.max_epochs = cfg.train.epochs;
    tc.patience = segmentation ? cfg.train.patience_seg : cfg.train.patience_clf;
    tc.val_fraction = cfg.train.val_fraction;
    tc.seed = cfg.train.seed;
    return tc;
}

nn::NetworkSpec spec_for(const RunConfig& cfg, bool segmentation) {
    const int size = cfg.preprocess.size;
    if (segmentation)
        return build_mini_unet(cfg.model.unet_depth, cfg.model.unet_base, size, size);
    return build_mini_cnn(size, size, cfg.model.cnn_widths, cfg.model.cnn_dense, 0.3, 0.5,
                          cfg.model.batchnorm);
}

// ------------------------------------------------------------- subcommands

int cmd_preprocess(const RunConfig& cfg, const std::string& in, const std::string& out) {
    const auto files = collect_images(in);
    fs::create_directories(out);
    std::vector<Raster> results(files.size());
    parallel_for(files.size(), [&](std::size_t i) {
        results[i] = preprocess_image(load_image(files[i].first), cfg);
    });
    for (std::size_t i = 0; i < files.size(); ++i) {
        fs::path target = fs::path(out) / files[i].second;
        target.replace_extension(".pgm");
        fs::create_directories(target.parent_path());
        save_image(results[i], target);
    }
    std::cout << "preprocessed " << files.size() << " images into " << out << "\n";
    return 0;
}

int cmd_genmask(const RunConfig& cfg, const std::string& in, const std::string& out) {
    MaskPipelineConfig mp;
    mp.polarity =
        cfg.morphology.polarity == "dark" ? Polarity::dark_foreground : Polarity::bright_foreground;
    mp.r_dilate = cfg.morphology.r_dilate;
    mp.r_erode = cfg.morphology.r_erode;
    mp.r_close = cfg.morphology.r_close;
    mp.keep = cfg.morphology.keep;

    const auto files = collect_images(in);
    fs::create_directories(out);
    std::vector<MaskPipelineResult> results(files.size());
    parallel_for(files.size(), [&](std::size_t i) {
        results[i] = generate_lung_mask(load_image(files[i].first), mp);
    });

    nlohmann::ordered_json report = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < files.size(); ++i) {
        const fs::path rel = files[i].second;
        const fs::path base = fs::path(out) / rel.parent_path() / rel.stem();
        fs::create_directories(base.parent_path());
        save_image(results[i].mask, base.string() + "_mask.pgm");
        save_image(results[i].masked, base.string() + "_masked.pgm");
        nlohmann::ordered_json entry;
        entry["name"] = (rel.parent_path() / rel.stem()).generic_string();
        entry["components"] = results[i].n_components;
        entry["area_fraction"] = results[i].area_fraction;
        entry["warnings"] = results[i].warnings;
        report.push_back(std::move(entry));
    }
    write_json_file(fs::path(out) / "genmask_report.json",
                    nlohmann::ordered_json{{"images", std::move(report)}});
    std::cout << "masked " << files.size() << " images into " << out << "\n";
    return 0;
}

int cmd_train_seg(const RunConfig& cfg) {
    const SegDataset ds = load_seg_dataset(cfg);
    const TrainResult result =
        train_model(spec_for(cfg, true), ds.inputs, ds.targets, train_config_for(cfg, true));
    print_history(result.history);
    fs::create_directories(cfg.output.dir);
    const fs::path path = fs::path(cfg.output.dir) / "seg_model.lkmb";
    save_bundle(result.bundle, path.string());
    std::cout << "saved " << path.string() << " (best monitored loss "
              << result.bundle.meta.best_val_loss << ")\n";
    return 0;
}

int cmd_train_clf(const RunConfig& cfg) {
    const ClfDataset ds = load_clf_dataset(cfg);
    const TrainResult result =
        train_model(spec_for(cfg, false), ds.inputs, ds.targets, train_config_for(cfg, false));
    print_history(result.history);
    fs::create_directories(cfg.output.dir);
    const fs::path path = fs::path(cfg.output.dir) / "clf_model.lkmb";
    save_bundle(result.bundle, path.string());
    std::cout << "saved " << path.string() << " (best monitored loss "
              << result.bundle.meta.best_val_loss << ")\n";
    return 0;
}

int cmd_train_hybrid(const RunConfig& cfg, const std::string& features_from,
                     const std::string& head) {
    const ModelBundle cnn = load_bundle(features_from);
    const ClfDataset ds = load_clf_dataset(cfg);
    const FeatureMatrix features = extract_features(cnn, ds.inputs);
    ClassicParams params;
    params.seed = cfg.train.seed;
    params.svm.seed = cfg.train.seed;
    const ClassicModel model = fit_classic_head(head_kind_from_name(head), features, ds.labels, params);
    const auto [labels, scores] = classic_predict(model, features);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += labels[i] == ds.labels[i];
    fs::create_directories(cfg.output.dir);
    const fs::path path =
        fs::path(cfg.output.dir) / ("hybrid_" + std::string(head_kind_name(model.kind)) + ".lkmb");
    save_classic(model, path.string());
    std::cout << "saved " << path.string() << " (training accuracy "
              << static_cast<double>(hits) / static_cast<double>(labels.size()) << ")\n";
    return 0;
}

BinaryMask load_mask_file(const fs::path& path) {
    const Raster img = load_image(path);
    BinaryMask mask(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) mask.bits[i] = img.data[i] != 0;
    return mask;
}

int cmd_eval(const std::string& pred_dir, const std::string& truth_dir,
             const std::string& report_path) {
    const auto preds = collect_images(pred_dir);
    std::vector<double> dices, ious;
    nlohmann::ordered_json per_image = nlohmann::ordered_json::array();
    for (const auto& [path, rel] : preds) {
        fs::path truth_path;
        for (const char* ext : {".pgm", ".png"}) {
            fs::path candidate = fs::path(truth_dir) / rel;
            candidate.replace_extension(ext);
            if (fs::exists(candidate)) {
                truth_path = candidate;
                break;
            }
        }
        const std::string stem = (rel.parent_path() / rel.stem()).generic_string();
        if (truth_path.empty())
            throw std::runtime_error("no truth mask for stem \"" + stem + "\"");
        const BinaryMask pred = load_mask_file(path);
        const BinaryMask truth = load_mask_file(truth_path);
        const double d = dice(pred, truth), i = iou(pred, truth);
        dices.push_back(d);
        ious.push_back(i);
        nlohmann::ordered_json entry;
        entry["name"] = stem;
        entry["dice"] = d;
        entry["iou"] = i;
        per_image.push_back(std::move(entry));
    }
    const auto [dice_mean, dice_sd] = aggregate(dices);
    const auto [iou_mean, iou_sd] = aggregate(ious);
    nlohmann::ordered_json report;
    report["per_image"] = std::move(per_image);
    report["summary"] = {{"dice", {{"mean", dice_mean}, {"sd", dice_sd}}},
                         {"iou", {{"mean", iou_mean}, {"sd", iou_sd}}}};
    write_json_file(report_path, report);
    std::cout << "dice: " << format_mean_sd(dice_mean, dice_sd) << "\n"
              << "iou:  " << format_mean_sd(iou_mean, iou_sd) << "\n";
    return 0;
}

int cmd_cv(const RunConfig& cfg, const std::string& out) {
    CvConfig cv;
    cv.k = cfg.cv.folds;
    cv.seed = cfg.cv.seed;
    cv.out_dir = out;
    cv.classic.seed = cfg.train.seed;

    EvalReport report;
    if (cfg.model.task == "segmentation") {
        cv.task = CvTask::segmentation;
        cv.spec = spec_for(cfg, true);
        cv.train = train_config_for(cfg, true);
        const SegDataset ds = load_seg_dataset(cfg);
        report = run_cv(cv, ds.inputs, ds.targets,
                        std::vector<int>(static_cast<std::size_t>(ds.inputs.n), 0));
    } else {
        cv.task = cfg.model.task == "hybrid" ? CvTask::hybrid : CvTask::classification;
        cv.head = head_kind_from_name(cfg.model.head);
        cv.spec = spec_for(cfg, false);
        cv.train = train_config_for(cfg, false);
        const ClfDataset ds = load_clf_dataset(cfg);
        report = run_cv(cv, ds.inputs, ds.targets, ds.labels);
    }
    for (const auto& [key, agg] : report.summary)
        std::cout << key << ": " << format_mean_sd(agg.mean, agg.sd) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lung CT preprocessing, segmentation and classification toolkit"};
    app.require_subcommand(1);

    std::string config_path, in_path, out_path;
    std::string pred_dir, truth_dir, report_path = "report.json";
    std::string features_from, head = "svm";
    double clahe_clip = 2.0;
    int clahe_grid = 8, size = 128;
    std::string polarity = "dark";
    int r_dilate = 5, r_erode = 4, r_close = 10, keep = 2;
    int folds = 5;
    std::uint64_t seed = 42;

    auto* pre = app.add_subcommand("preprocess", "Contrast-enhance and resize images");
    pre->add_option("--config", config_path, "JSON run configuration");
    pre->add_option("--in", in_path, "Image directory or CSV manifest")->required();
    pre->add_option("--out", out_path, "Output directory")->required();
    auto* o_clip = pre->add_option("--clahe-clip", clahe_clip, "CLAHE clip limit")
                       ->capture_default_str();
    auto* o_grid = pre->add_option("--clahe-grid", clahe_grid, "CLAHE tile grid (square)")
                       ->capture_default_str();
    auto* o_size = pre->add_option("--size", size, "Output side length")->capture_default_str();

    auto* gen = app.add_subcommand("genmask", "Generate lung masks by thresholding + morphology");
    gen->add_option("--config", config_path, "JSON run configuration");
    gen->add_option("--in", in_path, "Image directory or CSV manifest")->required();
    gen->add_option("--out", out_path, "Output directory")->required();
    auto* o_pol = gen->add_option("--polarity", polarity, "Foreground intensity: dark|bright")
                      ->capture_default_str()
                      ->check(CLI::IsMember({"dark", "bright"}));
    auto* o_rd = gen->add_option("--r-dilate", r_dilate, "Dilation disk radius")->capture_default_str();
    auto* o_re = gen->add_option("--r-erode", r_erode, "Erosion disk radius")->capture_default_str();
    auto* o_rc = gen->add_option("--r-close", r_close, "Closing disk radius")->capture_default_str();
    auto* o_keep = gen->add_option("--keep", keep, "Largest components kept")->capture_default_str();

    auto* tseg = app.add_subcommand("train-seg", "Train the segmentation network");
    tseg->add_option("--config", config_path, "JSON run configuration")->required();

    auto* tclf = app.add_subcommand("train-clf", "Train the classifier network");
    tclf->add_option("--config", config_path, "JSON run configuration")->required();

    auto* thyb = app.add_subcommand("train-hybrid", "Fit a classical head on CNN features");
    thyb->add_option("--config", config_path, "JSON run configuration")->required();
    thyb->add_option("--features-from", features_from, "Trained classifier bundle")->required();
    thyb->add_option("--head", head, "Classifier head: svm|rf|gb")
        ->capture_default_str()
        ->check(CLI::IsMember({"svm", "rf", "gb"}));

    auto* ev = app.add_subcommand("eval", "Score predicted masks against truth masks");
    ev->add_option("--pred", pred_dir, "Predicted mask directory")->required();
    ev->add_option("--truth", truth_dir, "Truth mask directory")->required();
    ev->add_option("--report", report_path, "Report JSON path")->capture_default_str();

    auto* cv = app.add_subcommand("cv", "Seeded stratified k-fold cross-validation");
    cv->add_option("--config", config_path, "JSON run configuration")->required();
    auto* o_folds = cv->add_option("--folds", folds, "Fold count")->capture_default_str();
    auto* o_seed = cv->add_option("--seed", seed, "Cross-validation seed")->capture_default_str();
    cv->add_option("--out", out_path, "Artifact directory")->required();

    auto* self = app.add_subcommand("selftest", "Run the built-in oracle and invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = parse_config(config_path);

        if (pre->parsed()) {
            if (o_clip->count()) cfg.preprocess.clahe_clip = clahe_clip;
            if (o_grid->count()) cfg.preprocess.clahe_grid = clahe_grid;
            if (o_size->count()) cfg.preprocess.size = size;
            return cmd_preprocess(cfg, in_path, out_path);
        }
        if (gen->parsed()) {
            if (o_pol->count()) cfg.morphology.polarity = polarity;
            if (o_rd->count()) cfg.morphology.r_dilate = r_dilate;
            if (o_re->count()) cfg.morphology.r_erode = r_erode;
            if (o_rc->count()) cfg.morphology.r_close = r_close;
            if (o_keep->count()) cfg.morphology.keep = keep;
            return cmd_genmask(cfg, in_path, out_path);
        }
        if (tseg->parsed()) return cmd_train_seg(cfg);
        if (tclf->parsed()) return cmd_train_clf(cfg);
        if (thyb->parsed()) return cmd_train_hybrid(cfg, features_from, head);
        if (ev->parsed()) return cmd_eval(pred_dir, truth_dir, report_path);
        if (cv->parsed()) {
            if (o_folds->count()) cfg.cv.folds = folds;
            if (o_seed->count()) cfg.cv.seed = seed;
            return cmd_cv(cfg, out_path);
        }
        if (self->parsed()) return run_selftest(std::cout) == 0 ? 0 : 1;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
