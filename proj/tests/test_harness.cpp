#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <vector>

#include "lungkit/harness.hpp"
#include "support/phantoms.hpp"
#include "support/tmpdir.hpp"

using namespace lungkit;
using testsupport::TempDir;

namespace {

std::vector<int> alternating(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i % 2;
    return v;
}

std::vector<std::vector<int>> per_fold_class_counts(const FoldAssignment& fa,
                                                    const std::vector<int>& labels) {
    std::vector<std::vector<int>> counts(static_cast<std::size_t>(fa.k), {0, 0});
    for (std::size_t i = 0; i < labels.size(); ++i)
        ++counts[static_cast<std::size_t>(fa.assignment[i])][static_cast<std::size_t>(labels[i])];
    return counts;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

nn::NetworkSpec tiny_clf(int side) {
    nn::NetworkSpec s;
    s.task = nn::Task::classification;
    s.in_channels = 1;
    s.in_h = s.in_w = side;
    s.layers = {nn::LayerSpec::make(nn::LayerKind::flatten), nn::LayerSpec::make_dense(6),
                nn::LayerSpec::make(nn::LayerKind::relu), nn::LayerSpec::make_dense(1),
                nn::LayerSpec::make(nn::LayerKind::sigmoid)};
    return s;
}

}  // namespace

TEST_CASE("stratified folds deal one of each class per fold when counts divide") {
    const std::vector<int> labels = alternating(10);
    const FoldAssignment fa = make_folds(labels, 5, 3);
    REQUIRE(fa.assignment.size() == labels.size());
    for (const auto& c : per_fold_class_counts(fa, labels)) {
        CHECK(c[0] == 1);
        CHECK(c[1] == 1);
    }
}

TEST_CASE("stratified folds balance totals within one across classes") {
    const std::vector<int> labels = alternating(832);
    const FoldAssignment fa = make_folds(labels, 5, 42);
    std::vector<int> sizes(5, 0);
    for (int f : fa.assignment) {
        REQUIRE(f >= 0);
        REQUIRE(f < 5);
        ++sizes[static_cast<std::size_t>(f)];
    }
    std::vector<int> sorted = sizes;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{166, 166, 166, 167, 167});
    for (const auto& c : per_fold_class_counts(fa, labels)) {
        CHECK(std::abs(c[0] - 416 / 5) <= 1);
        CHECK(std::abs(c[1] - 416 / 5) <= 1);
    }
}

TEST_CASE("fold assignment is seed-deterministic") {
    const std::vector<int> labels = alternating(64);
    const FoldAssignment a = make_folds(labels, 4, 7);
    const FoldAssignment b = make_folds(labels, 4, 7);
    const FoldAssignment c = make_folds(labels, 4, 8);
    CHECK(a.assignment == b.assignment);
    CHECK(a.assignment != c.assignment);
}

TEST_CASE("fold assignment rejects impossible requests") {
    CHECK_THROWS_WITH_AS(make_folds({0, 0, 0, 1}, 2, 1), doctest::Contains("minority"),
                         std::invalid_argument);
    CHECK_THROWS_AS(make_folds(alternating(10), 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_folds({0, 1, 2, 1}, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_folds({}, 2, 1), std::invalid_argument);
}

TEST_CASE("aggregate_report computes per-key mean and sample sd") {
    const std::vector<MetricMap> folds = {{{"acc", 1.0}, {"dice", 0.5}},
                                          {{"acc", 3.0}, {"dice", 0.7}}};
    const EvalReport r = aggregate_report(folds);
    CHECK(r.per_fold == folds);
    CHECK(r.summary.at("acc").mean == 2.0);
    CHECK(r.summary.at("acc").sd == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(r.summary.at("dice").mean == doctest::Approx(0.6).epsilon(1e-12));

    CHECK_THROWS_AS(aggregate_report({}), std::invalid_argument);
    CHECK_THROWS_WITH_AS(aggregate_report({{{"a", 1.0}}, {{"b", 1.0}}}),
                         doctest::Contains("keys differ"), std::invalid_argument);
}

TEST_CASE("report JSON carries per-fold values and mean/sd summaries") {
    const EvalReport r = aggregate_report({{{"acc", 0.25}}, {{"acc", 0.75}}});
    const nlohmann::ordered_json j = report_to_json(r);
    REQUIRE(j.contains("per_fold"));
    REQUIRE(j.contains("summary"));
    CHECK(j["per_fold"].size() == 2);
    CHECK(j["per_fold"][0]["acc"] == 0.25);
    CHECK(j["summary"]["acc"]["mean"] == 0.5);
    CHECK(j["summary"]["acc"].contains("sd"));
}

TEST_CASE("worker count respects the thread cap variable") {
    CHECK(worker_count() >= 1);
    setenv("LUNGKIT_THREADS", "1", 1);
    CHECK(worker_count() == 1);
    unsetenv("LUNGKIT_THREADS");
}

TEST_CASE("parallel_for covers every index exactly once and rethrows") {
    std::vector<int> out(257, -1);
    parallel_for(out.size(), [&](std::size_t i) { out[i] = static_cast<int>(i) * 2; });
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i) * 2);

    parallel_for(0, [&](std::size_t) { REQUIRE(false); });

    CHECK_THROWS_AS(parallel_for(64,
                                 [](std::size_t i) {
                                     if (i == 37) throw std::runtime_error("worker failure");
                                 }),
                    std::runtime_error);
}

TEST_CASE("cross-validation smoke: deterministic artifacts for every task") {
    const auto [x, labels] = phantom::make_separable_set(20, 8, 77);
    nn::Tensor4f targets(20, 1, 1, 1);
    for (int i = 0; i < 20; ++i)
        targets.data[static_cast<std::size_t>(i)] = static_cast<float>(labels[static_cast<std::size_t>(i)]);

    TempDir dir("cv");
    CvConfig cfg;
    cfg.task = CvTask::classification;
    cfg.k = 2;
    cfg.seed = 5;
    cfg.spec = tiny_clf(8);
    cfg.train.max_epochs = 3;
    cfg.train.batch_size = 4;
    cfg.train.val_fraction = 0.0;
    cfg.out_dir = (dir / "clf").string();

    const EvalReport r = run_cv(cfg, x, targets, labels);
    REQUIRE(r.per_fold.size() == 2);
    const std::vector<std::string> keys = {"accuracy", "auc", "f1", "precision", "recall"};
    for (const auto& fold : r.per_fold) {
        REQUIRE(fold.size() == keys.size());
        for (const auto& k : keys) CHECK(fold.contains(k));
    }
    namespace fs = std::filesystem;
    CHECK(fs::exists(dir / "clf" / "summary.json"));
    CHECK(fs::exists(dir / "clf" / "fold0" / "model.lkmb"));
    CHECK(fs::exists(dir / "clf" / "fold1" / "metrics.json"));

    CvConfig again = cfg;
    again.out_dir = (dir / "clf2").string();
    run_cv(again, x, targets, labels);
    CHECK(slurp(dir / "clf" / "summary.json") == slurp(dir / "clf2" / "summary.json"));
    CHECK(slurp(dir / "clf" / "fold0" / "model.lkmb") ==
          slurp(dir / "clf2" / "fold0" / "model.lkmb"));

    // hybrid runs the classical head on flatten features and stores it
    CvConfig hybrid = cfg;
    hybrid.task = CvTask::hybrid;
    hybrid.head = HeadKind::random_forest;
    hybrid.classic.rf_estimators = 5;
    hybrid.out_dir = (dir / "hy").string();
    const EvalReport hr = run_cv(hybrid, x, targets, labels);
    CHECK(hr.per_fold.size() == 2);
    CHECK(fs::exists(dir / "hy" / "fold0" / "head.lkmb"));
}

TEST_CASE("cross-validation wraps fold failures with the fold index") {
    const auto [x, labels] = phantom::make_separable_set(8, 8, 3);
    nn::Tensor4f targets(8, 1, 1, 1);
    CvConfig cfg;
    cfg.task = CvTask::classification;
    cfg.k = 2;
    cfg.spec = tiny_clf(4);  // wrong input size for 8x8 tensors
    cfg.train.max_epochs = 1;
    CHECK_THROWS_WITH_AS(run_cv(cfg, x, targets, labels), doctest::Contains("fold 0:"),
                         std::runtime_error);

    CHECK_THROWS_AS(run_cv(cfg, x, targets, alternating(5)), std::invalid_argument);
}
