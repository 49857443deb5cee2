#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lungkit {

/// Run configuration with paper-derived defaults. Unknown keys are rejected
/// and every constraint violation names the offending key.
struct RunConfig {
    struct Dataset {
        std::string root;    // classification data: cancerous/ + normal/ dirs, or a CSV
        std::string images;  // segmentation data: image directory ...
        std::string masks;   // ... paired with a mask directory, matched by stem
    } dataset;

    struct Preprocess {
        double clahe_clip = 2.0;
        int clahe_grid = 8;
        int size = 128;
        bool apply_clahe = true;
    } preprocess;

    struct Morphology {
        std::string polarity = "dark";
        int r_dilate = 5;
        int r_erode = 4;
        int r_close = 10;
        int keep = 2;
    } morphology;

    struct Model {
        std::string task = "classification";  // "segmentation" | "classification" | "hybrid"
        std::string head = "svm";             // hybrid head: "svm" | "rf" | "gb"
        int unet_depth = 3;
        int unet_base = 16;
        std::vector<int> cnn_widths = {16, 32, 64, 128};
        int cnn_dense = 64;
        bool batchnorm = false;
    } model;

    struct Train {
        double lr = 1e-3;
        int batch_seg = 2;
        int batch_clf = 16;
        int epochs = 50;
        int patience_seg = 15;
        int patience_clf = 10;
        double val_fraction = 0.1;
        std::uint64_t seed = 42;
    } train;

    struct Cv {
        int folds = 5;
        std::uint64_t seed = 42;
    } cv;

    struct Output {
        std::string dir = "out";
    } output;
};

RunConfig config_from_json(const nlohmann::json& j);
RunConfig parse_config(const std::string& path);
nlohmann::ordered_json config_to_json(const RunConfig& cfg);

}  // namespace lungkit
