#include "lungkit/config.hpp"

#include <fstream>
#include <initializer_list>
#include <stdexcept>

namespace lungkit {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& section, const std::string& prefix,
                         std::initializer_list<const char*> known) {
    if (!section.is_object())
        throw std::invalid_argument("config: \"" + prefix + "\" must be an object");
    for (const auto& [key, value] : section.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok)
            throw std::invalid_argument("config: unknown key \"" +
                                        (prefix.empty() ? key : prefix + "." + key) + "\"");
    }
}

template <typename T>
void read_field(const json& section, const std::string& prefix, const char* key, T& out) {
    if (!section.contains(key)) return;
    try {
        section.at(key).get_to(out);
    } catch (const json::exception&) {
        throw std::invalid_argument("config: type mismatch at \"" + prefix + "." + key + "\"");
    }
}

void require(bool ok, const std::string& key, const std::string& constraint) {
    if (!ok) throw std::invalid_argument("config: \"" + key + "\" " + constraint);
}

}  // namespace

RunConfig config_from_json(const json& j) {
    reject_unknown_keys(j, "",
                        {"dataset", "preprocess", "morphology", "model", "train", "cv", "output"});
    RunConfig cfg;

    if (j.contains("dataset")) {
        const json& s = j.at("dataset");
        reject_unknown_keys(s, "dataset", {"root", "images", "masks"});
        read_field(s, "dataset", "root", cfg.dataset.root);
        read_field(s, "dataset", "images", cfg.dataset.images);
        read_field(s, "dataset", "masks", cfg.dataset.masks);
    }

    if (j.contains("preprocess")) {
        const json& s = j.at("preprocess");
        reject_unknown_keys(s, "preprocess", {"clahe_clip", "clahe_grid", "size", "apply_clahe"});
        read_field(s, "preprocess", "clahe_clip", cfg.preprocess.clahe_clip);
        read_field(s, "preprocess", "clahe_grid", cfg.preprocess.clahe_grid);
        read_field(s, "preprocess", "size", cfg.preprocess.size);
        read_field(s, "preprocess", "apply_clahe", cfg.preprocess.apply_clahe);
    }
    require(cfg.preprocess.clahe_clip >= 1.0, "preprocess.clahe_clip", "must be at least 1");
    require(cfg.preprocess.clahe_grid >= 1, "preprocess.clahe_grid", "must be at least 1");
    require(cfg.preprocess.size >= 8, "preprocess.size", "must be at least 8");

    if (j.contains("morphology")) {
        const json& s = j.at("morphology");
        reject_unknown_keys(s, "morphology", {"polarity", "r_dilate", "r_erode", "r_close", "keep"});
        read_field(s, "morphology", "polarity", cfg.morphology.polarity);
        read_field(s, "morphology", "r_dilate", cfg.morphology.r_dilate);
        read_field(s, "morphology", "r_erode", cfg.morphology.r_erode);
        read_field(s, "morphology", "r_close", cfg.morphology.r_close);
        read_field(s, "morphology", "keep", cfg.morphology.keep);
    }
    require(cfg.morphology.polarity == "dark" || cfg.morphology.polarity == "bright",
            "morphology.polarity", "must be \"dark\" or \"bright\"");
    require(cfg.morphology.r_dilate >= 0, "morphology.r_dilate", "must be non-negative");
    require(cfg.morphology.r_erode >= 0, "morphology.r_erode", "must be non-negative");
    require(cfg.morphology.r_close >= 0, "morphology.r_close", "must be non-negative");
    require(cfg.morphology.keep >= 1, "morphology.keep", "must be at least 1");

    if (j.contains("model")) {
        const json& s = j.at("model");
        reject_unknown_keys(s, "model",
                            {"task", "head", "unet_depth", "unet_base", "cnn_widths", "cnn_dense",
                             "batchnorm"});
        read_field(s, "model", "task", cfg.model.task);
        read_field(s, "model", "head", cfg.model.head);
        read_field(s, "model", "unet_depth", cfg.model.unet_depth);
        read_field(s, "model", "unet_base", cfg.model.unet_base);
        read_field(s, "model", "cnn_widths", cfg.model.cnn_widths);
        read_field(s, "model", "cnn_dense", cfg.model.cnn_dense);
        read_field(s, "model", "batchnorm", cfg.model.batchnorm);
    }
    require(cfg.model.task == "segmentation" || cfg.model.task == "classification" ||
                cfg.model.task == "hybrid",
            "model.task", "must be \"segmentation\", \"classification\" or \"hybrid\"");
    require(cfg.model.head == "svm" || cfg.model.head == "rf" || cfg.model.head == "gb",
            "model.head", "must be \"svm\", \"rf\" or \"gb\"");
    require(cfg.model.unet_depth >= 1, "model.unet_depth", "must be at least 1");
    require(cfg.model.unet_base >= 1, "model.unet_base", "must be at least 1");
    require(!cfg.model.cnn_widths.empty(), "model.cnn_widths", "must not be empty");
    for (int w : cfg.model.cnn_widths)
        require(w >= 1, "model.cnn_widths", "entries must be at least 1");
    require(cfg.model.cnn_dense >= 1, "model.cnn_dense", "must be at least 1");

    if (j.contains("train")) {
        const json& s = j.at("train");
        reject_unknown_keys(s, "train",
                            {"lr", "batch_seg", "batch_clf", "epochs", "patience_seg",
                             "patience_clf", "val_fraction", "seed"});
        read_field(s, "train", "lr", cfg.train.lr);
        read_field(s, "train", "batch_seg", cfg.train.batch_seg);
        read_field(s, "train", "batch_clf", cfg.train.batch_clf);
        read_field(s, "train", "epochs", cfg.train.epochs);
        read_field(s, "train", "patience_seg", cfg.train.patience_seg);
        read_field(s, "train", "patience_clf", cfg.train.patience_clf);
        read_field(s, "train", "val_fraction", cfg.train.val_fraction);
        read_field(s, "train", "seed", cfg.train.seed);
    }
    require(cfg.train.lr > 0.0, "train.lr", "must be positive");
    require(cfg.train.batch_seg >= 1, "train.batch_seg", "must be at least 1");
    require(cfg.train.batch_clf >= 1, "train.batch_clf", "must be at least 1");
    require(cfg.train.epochs >= 1, "train.epochs", "must be at least 1");
    require(cfg.train.patience_seg >= 0, "train.patience_seg", "must be non-negative");
    require(cfg.train.patience_clf >= 0, "train.patience_clf", "must be non-negative");
    require(cfg.train.val_fraction >= 0.0 && cfg.train.val_fraction < 1.0, "train.val_fraction",
            "must be in [0, 1)");

    if (j.contains("cv")) {
        const json& s = j.at("cv");
        reject_unknown_keys(s, "cv", {"folds", "seed"});
        read_field(s, "cv", "folds", cfg.cv.folds);
        read_field(s, "cv", "seed", cfg.cv.seed);
    }
    require(cfg.cv.folds >= 2, "cv.folds", "must be at least 2");

    if (j.contains("output")) {
        const json& s = j.at("output");
        reject_unknown_keys(s, "output", {"dir"});
        read_field(s, "output", "dir", cfg.output.dir);
    }
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: missing file: " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw std::runtime_error("config: invalid JSON in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["dataset"] = {{"root", cfg.dataset.root},
                    {"images", cfg.dataset.images},
                    {"masks", cfg.dataset.masks}};
    j["preprocess"] = {{"clahe_clip", cfg.preprocess.clahe_clip},
                       {"clahe_grid", cfg.preprocess.clahe_grid},
                       {"size", cfg.preprocess.size},
                       {"apply_clahe", cfg.preprocess.apply_clahe}};
    j["morphology"] = {{"polarity", cfg.morphology.polarity},
                       {"r_dilate", cfg.morphology.r_dilate},
                       {"r_erode", cfg.morphology.r_erode},
                       {"r_close", cfg.morphology.r_close},
                       {"keep", cfg.morphology.keep}};
    j["model"] = {{"task", cfg.model.task},
                  {"head", cfg.model.head},
                  {"unet_depth", cfg.model.unet_depth},
                  {"unet_base", cfg.model.unet_base},
                  {"cnn_widths", cfg.model.cnn_widths},
                  {"cnn_dense", cfg.model.cnn_dense},
                  {"batchnorm", cfg.model.batchnorm}};
    j["train"] = {{"lr", cfg.train.lr},
                  {"batch_seg", cfg.train.batch_seg},
                  {"batch_clf", cfg.train.batch_clf},
                  {"epochs", cfg.train.epochs},
                  {"patience_seg", cfg.train.patience_seg},
                  {"patience_clf", cfg.train.patience_clf},
                  {"val_fraction", cfg.train.val_fraction},
                  {"seed", cfg.train.seed}};
    j["cv"] = {{"folds", cfg.cv.folds}, {"seed", cfg.cv.seed}};
    j["output"] = {{"dir", cfg.output.dir}};
    return j;
}

}  // namespace lungkit
