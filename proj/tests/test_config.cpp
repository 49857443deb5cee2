#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "lungkit/config.hpp"
#include "support/tmpdir.hpp"

using namespace lungkit;
using nlohmann::json;
using testsupport::TempDir;

TEST_CASE("an empty document yields the documented defaults") {
    const RunConfig cfg = config_from_json(json::object());
    CHECK(cfg.preprocess.clahe_clip == 2.0);
    CHECK(cfg.preprocess.clahe_grid == 8);
    CHECK(cfg.preprocess.size == 128);
    CHECK(cfg.preprocess.apply_clahe);
    CHECK(cfg.morphology.polarity == "dark");
    CHECK(cfg.morphology.r_dilate == 5);
    CHECK(cfg.morphology.r_erode == 4);
    CHECK(cfg.morphology.r_close == 10);
    CHECK(cfg.morphology.keep == 2);
    CHECK(cfg.model.task == "classification");
    CHECK(cfg.model.head == "svm");
    CHECK(cfg.model.unet_depth == 3);
    CHECK(cfg.model.unet_base == 16);
    CHECK(cfg.model.cnn_widths == std::vector<int>{16, 32, 64, 128});
    CHECK(cfg.model.cnn_dense == 64);
    CHECK_FALSE(cfg.model.batchnorm);
    CHECK(cfg.train.lr == 1e-3);
    CHECK(cfg.train.batch_seg == 2);
    CHECK(cfg.train.batch_clf == 16);
    CHECK(cfg.train.epochs == 50);
    CHECK(cfg.train.patience_seg == 15);
    CHECK(cfg.train.patience_clf == 10);
    CHECK(cfg.train.val_fraction == 0.1);
    CHECK(cfg.train.seed == 42);
    CHECK(cfg.cv.folds == 5);
    CHECK(cfg.cv.seed == 42);
    CHECK(cfg.output.dir == "out");
}

TEST_CASE("sparse documents override only the named fields") {
    const json j = {{"preprocess", {{"size", 64}}}, {"cv", {{"folds", 3}}}};
    const RunConfig cfg = config_from_json(j);
    CHECK(cfg.preprocess.size == 64);
    CHECK(cfg.preprocess.clahe_clip == 2.0);
    CHECK(cfg.cv.folds == 3);
    CHECK(cfg.train.epochs == 50);
}

TEST_CASE("unknown keys are rejected with the dotted path") {
    CHECK_THROWS_WITH_AS(config_from_json({{"preprocess", {{"x", 1}}}}),
                         "config: unknown key \"preprocess.x\"", std::invalid_argument);
    CHECK_THROWS_WITH_AS(config_from_json({{"zzz", 1}}), "config: unknown key \"zzz\"",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(config_from_json({{"train", {{"momentum", 0.9}}}}),
                         "config: unknown key \"train.momentum\"", std::invalid_argument);
}

TEST_CASE("type and constraint violations name the offending key") {
    CHECK_THROWS_WITH_AS(config_from_json({{"preprocess", {{"size", "big"}}}}),
                         doctest::Contains("type mismatch at \"preprocess.size\""),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(config_from_json({{"preprocess", {{"clahe_clip", 0.5}}}}),
                         doctest::Contains("preprocess.clahe_clip"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(config_from_json({{"morphology", {{"polarity", "sideways"}}}}),
                         doctest::Contains("morphology.polarity"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(config_from_json({{"model", {{"task", "detection"}}}}),
                         doctest::Contains("model.task"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(config_from_json({{"model", {{"cnn_widths", json::array()}}}}),
                         doctest::Contains("model.cnn_widths"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(config_from_json({{"train", {{"val_fraction", 1.0}}}}),
                         doctest::Contains("train.val_fraction"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(config_from_json({{"cv", {{"folds", 1}}}}),
                         doctest::Contains("cv.folds"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(config_from_json({{"preprocess", 7}}),
                         doctest::Contains("must be an object"), std::invalid_argument);
}

TEST_CASE("serialization round-trips the full structure") {
    RunConfig cfg;
    cfg.dataset.root = "data/clf.csv";
    cfg.preprocess.size = 96;
    cfg.preprocess.apply_clahe = false;
    cfg.morphology.keep = 3;
    cfg.model.task = "hybrid";
    cfg.model.head = "gb";
    cfg.model.cnn_widths = {8, 16};
    cfg.train.seed = 1234567890123ULL;
    cfg.cv.folds = 7;
    cfg.output.dir = "results";

    const RunConfig back = config_from_json(config_to_json(cfg));
    CHECK(config_to_json(back) == config_to_json(cfg));
    CHECK(back.train.seed == cfg.train.seed);
    CHECK(back.model.cnn_widths == cfg.model.cnn_widths);
    CHECK(back.preprocess.apply_clahe == cfg.preprocess.apply_clahe);
}

TEST_CASE("file parsing reports missing files and broken JSON") {
    TempDir dir("config");
    CHECK_THROWS_WITH_AS(parse_config((dir / "absent.json").string()),
                         doctest::Contains("missing file"), std::runtime_error);

    const std::string bad = (dir / "bad.json").string();
    std::ofstream(bad) << "{ not json";
    CHECK_THROWS_WITH_AS(parse_config(bad), doctest::Contains("invalid JSON"),
                         std::runtime_error);

    const std::string good = (dir / "good.json").string();
    std::ofstream(good) << R"({"cv": {"folds": 4}})";
    CHECK(parse_config(good).cv.folds == 4);
}
