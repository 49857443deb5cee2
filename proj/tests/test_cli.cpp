// End-to-end checks of the command-line binary: exit codes, file outputs and
// report contents. The binary path arrives in the LUNGKIT_BIN environment
// variable, set by the test harness.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "lungkit/metrics.hpp"
#include "lungkit/raster.hpp"
#include "lungkit/rng.hpp"
#include "support/phantoms.hpp"
#include "support/tmpdir.hpp"

using namespace lungkit;
using nlohmann::json;
using testsupport::TempDir;

namespace {

std::string binary() {
    const char* env = std::getenv("LUNGKIT_BIN");
    REQUIRE(env != nullptr);
    return env;
}

struct RunOutput {
    int code = -1;
    std::string out, err;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

RunOutput run(const TempDir& dir, const std::string& args) {
    const auto out_file = dir / "stdout.txt";
    const auto err_file = dir / "stderr.txt";
    const std::string cmd =
        binary() + " " + args + " > " + out_file.string() + " 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    RunOutput r;
    r.code = status < 0 ? -1 : WEXITSTATUS(status);
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

json load_json(const std::filesystem::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    return json::parse(f);
}

}  // namespace

TEST_CASE("exit codes: help 0, usage errors 2, domain errors 1") {
    TempDir dir("cli_codes");
    CHECK(run(dir, "--help").code == 0);
    CHECK(run(dir, "genmask --help").code == 0);
    CHECK(run(dir, "").code == 2);                    // a subcommand is required
    CHECK(run(dir, "transmogrify").code == 2);        // unknown subcommand
    CHECK(run(dir, "genmask --out x").code == 2);     // missing required --in
    CHECK(run(dir, "genmask --in a --out b --polarity sideways").code == 2);

    const RunOutput r =
        run(dir, "cv --config /nonexistent.json --out " + (dir / "cv").string());
    CHECK(r.code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("selftest passes and reports its check count") {
    TempDir dir("cli_selftest");
    const RunOutput r = run(dir, "selftest");
    CHECK(r.code == 0);
    CHECK(r.out.find("selftest:") != std::string::npos);
    CHECK(r.out.find("0 failures") != std::string::npos);
}

TEST_CASE("preprocess resizes into mirrored .pgm files, byte-deterministically") {
    TempDir dir("cli_pre");
    const auto in = dir / "in";
    std::filesystem::create_directories(in);
    Rng rng(4);
    Raster img(64, 64);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
    save_image(img, in / "scan.pgm");

    const std::string base =
        "preprocess --in " + in.string() + " --size 32 --out ";
    CHECK(run(dir, base + (dir / "o1").string()).code == 0);
    CHECK(run(dir, base + (dir / "o2").string()).code == 0);

    const Raster out = load_image(dir / "o1" / "scan.pgm");
    CHECK(out.width == 32);
    CHECK(out.height == 32);
    CHECK(slurp(dir / "o1" / "scan.pgm") == slurp(dir / "o2" / "scan.pgm"));
}

TEST_CASE("genmask writes mask pairs and a faithful JSON report") {
    TempDir dir("cli_genmask");
    const auto in = dir / "in";
    std::filesystem::create_directories(in);
    Rng rng(11);
    const phantom::LungPhantom ph = phantom::make_lung_phantom(64, rng);
    save_image(ph.image, in / "case7.pgm");

    const RunOutput r = run(dir, "genmask --in " + in.string() + " --out " +
                                     (dir / "out").string() +
                                     " --r-dilate 2 --r-erode 2 --r-close 2");
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(dir / "out" / "case7_mask.pgm"));
    CHECK(std::filesystem::exists(dir / "out" / "case7_masked.pgm"));

    const json report = load_json(dir / "out" / "genmask_report.json");
    REQUIRE(report.contains("images"));
    REQUIRE(report["images"].size() == 1);
    const json& entry = report["images"][0];
    CHECK(entry["name"] == "case7");
    CHECK(entry["components"] == 2);
    CHECK(entry["warnings"].empty());

    // the report's area fraction matches the mask file it wrote
    const Raster mask_img = load_image(dir / "out" / "case7_mask.pgm");
    std::size_t fg = 0;
    for (const auto v : mask_img.data) fg += v != 0;
    const double area = static_cast<double>(fg) / static_cast<double>(mask_img.size());
    CHECK(entry["area_fraction"].get<double>() == doctest::Approx(area).epsilon(1e-12));
    CHECK(area > 0.05);
}

TEST_CASE("eval scores mask pairs and writes the per-image report") {
    TempDir dir("cli_eval");
    const auto pred = dir / "pred";
    const auto truth = dir / "truth";
    std::filesystem::create_directories(pred);
    std::filesystem::create_directories(truth);

    BinaryMask a(10, 10);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) a.at(x, y) = 1;
    save_image(a, pred / "a.pgm");
    save_image(a, truth / "a.pgm");  // identical: dice 1

    BinaryMask b_pred(10, 10), b_truth(10, 10);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
            b_pred.at(x, y) = 1;       // squares overlap in a 1x2 strip
            b_truth.at(x + 1, y) = 1;
        }
    save_image(b_pred, pred / "b.pgm");
    save_image(b_truth, truth / "b.pgm");

    const auto report_path = dir / "report.json";
    const RunOutput r = run(dir, "eval --pred " + pred.string() + " --truth " + truth.string() +
                                     " --report " + report_path.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("dice:") != std::string::npos);

    const json report = load_json(report_path);
    REQUIRE(report["per_image"].size() == 2);
    CHECK(report["per_image"][0]["name"] == "a");
    CHECK(report["per_image"][0]["dice"] == 1.0);
    CHECK(report["per_image"][0]["iou"] == 1.0);
    CHECK(report["per_image"][1]["dice"] == 0.5);  // 2*2 / (4+4)
    CHECK(report["per_image"][1]["iou"].get<double>() ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(report["summary"]["dice"]["mean"] == 0.75);
    CHECK(report["summary"]["dice"]["sd"].get<double>() ==
          doctest::Approx(std::sqrt(0.125)).epsilon(1e-12));

    std::filesystem::remove(truth / "b.pgm");
    const RunOutput miss = run(dir, "eval --pred " + pred.string() + " --truth " +
                                        truth.string() + " --report " + report_path.string());
    CHECK(miss.code == 1);
    CHECK(miss.err.find("no truth mask for stem \"b\"") != std::string::npos);
}

TEST_CASE("train-clf then train-hybrid produce model artifacts") {
    TempDir dir("cli_train");
    const auto root = dir / "data";
    std::filesystem::create_directories(root / "cancerous");
    std::filesystem::create_directories(root / "normal");
    Rng rng(9);
    for (int i = 0; i < 6; ++i) {
        Raster bright(8, 8), dark(8, 8);
        for (auto& v : bright.data) v = static_cast<std::uint8_t>(180 + rng.below(60));
        for (auto& v : dark.data) v = static_cast<std::uint8_t>(20 + rng.below(60));
        save_image(bright, root / "cancerous" / ("c" + std::to_string(i) + ".pgm"));
        save_image(dark, root / "normal" / ("n" + std::to_string(i) + ".pgm"));
    }

    const auto out = dir / "models";
    json cfg = {{"dataset", {{"root", root.string()}}},
                {"preprocess", {{"size", 8}, {"apply_clahe", false}}},
                {"model", {{"cnn_widths", {4, 8}}, {"cnn_dense", 8}}},
                {"train",
                 {{"epochs", 2}, {"batch_clf", 4}, {"val_fraction", 0.0}, {"seed", 7}}},
                {"output", {{"dir", out.string()}}}};
    const auto cfg_path = dir / "run.json";
    std::ofstream(cfg_path) << cfg.dump(2);

    const RunOutput clf = run(dir, "train-clf --config " + cfg_path.string());
    CHECK(clf.code == 0);
    CHECK(clf.out.find("epoch 1") != std::string::npos);
    REQUIRE(std::filesystem::exists(out / "clf_model.lkmb"));

    const RunOutput hyb = run(dir, "train-hybrid --config " + cfg_path.string() +
                                       " --features-from " + (out / "clf_model.lkmb").string() +
                                       " --head rf");
    CHECK(hyb.code == 0);
    CHECK(hyb.out.find("training accuracy") != std::string::npos);
    CHECK(std::filesystem::exists(out / "hybrid_random_forest.lkmb"));
}
