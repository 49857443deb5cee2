#include "lungkit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "lungkit/metrics.hpp"
#include "lungkit/rng.hpp"

namespace fs = std::filesystem;

namespace lungkit {

namespace {

// derive() tag spaces, kept apart from the per-fold tags 0..k-1
constexpr std::uint64_t kTagClassBase = 1u << 12;
constexpr std::uint64_t kTagHeadBase = 1u << 13;

}  // namespace

FoldAssignment make_folds(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("make_folds: need at least 2 folds");
    std::size_t counts[2] = {0, 0};
    for (int v : labels) {
        if (v != 0 && v != 1) throw std::invalid_argument("make_folds: labels must be 0 or 1");
        ++counts[static_cast<std::size_t>(v)];
    }
    std::size_t minority = labels.size();
    for (std::size_t c : counts)
        if (c > 0) minority = std::min(minority, c);
    if (labels.empty() || static_cast<std::size_t>(k) > minority)
        throw std::invalid_argument("make_folds: fold count exceeds the minority class size");

    FoldAssignment fa;
    fa.k = k;
    fa.seed = seed;
    fa.assignment.assign(labels.size(), 0);
    std::size_t cursor = 0;
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) idx.push_back(i);
        Rng::derive(seed, kTagClassBase + static_cast<std::uint64_t>(cls)).shuffle(idx);
        for (std::size_t i : idx) fa.assignment[i] = static_cast<int>(cursor++ % static_cast<std::size_t>(k));
    }
    return fa;
}

EvalReport aggregate_report(const std::vector<MetricMap>& per_fold) {
    if (per_fold.empty()) throw std::invalid_argument("aggregate: no folds");
    for (const MetricMap& m : per_fold) {
        if (m.size() != per_fold[0].size())
            throw std::invalid_argument("aggregate: metric keys differ across folds");
        for (const auto& [key, value] : per_fold[0])
            if (!m.contains(key))
                throw std::invalid_argument("aggregate: metric keys differ across folds");
    }
    EvalReport report;
    report.per_fold = per_fold;
    for (const auto& [key, first] : per_fold[0]) {
        std::vector<double> values;
        values.reserve(per_fold.size());
        for (const MetricMap& m : per_fold) values.push_back(m.at(key));
        const auto [mean, sd] = aggregate(values);
        report.summary[key] = {mean, sd};
    }
    return report;
}

nlohmann::ordered_json report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["per_fold"] = report.per_fold;
    nlohmann::ordered_json summary;
    for (const auto& [key, agg] : report.summary) {
        nlohmann::ordered_json entry;
        entry["mean"] = agg.mean;
        entry["sd"] = agg.sd;
        summary[key] = std::move(entry);
    }
    j["summary"] = std::move(summary);
    return j;
}

namespace {

using nn::Tensor4f;

Tensor4f gather(const Tensor4f& src, const std::vector<int>& rows) {
    const std::size_t stride = static_cast<std::size_t>(src.c) * src.h * src.w;
    Tensor4f out(static_cast<int>(rows.size()), src.c, src.h, src.w);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(src.data.begin() + static_cast<std::ptrdiff_t>(
                                           static_cast<std::size_t>(rows[i]) * stride),
                    stride, out.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
    return out;
}

MetricMap metrics_from_predictions(const std::vector<int>& pred, const std::vector<double>& scores,
                                   const std::vector<int>& truth) {
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == 1)
            (pred[i] == 1 ? c.tp : c.fn)++;
        else
            (pred[i] == 1 ? c.fp : c.tn)++;
    }
    const ClassificationReport r = classification_report(c);
    return {{"accuracy", r.accuracy},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"auc", roc_curve(scores, truth).auc}};
}

MetricMap segmentation_metrics(const Tensor4f& prob, const Tensor4f& truth) {
    const std::size_t plane = static_cast<std::size_t>(prob.h) * prob.w;
    std::vector<double> dices, ious;
    ConfusionCounts pooled;
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(prob.size());
    labels.reserve(prob.size());
    for (int in = 0; in < prob.n; ++in) {
        BinaryMask pred(prob.w, prob.h), tm(prob.w, prob.h);
        for (std::size_t i = 0; i < plane; ++i) {
            const float p = prob.data[static_cast<std::size_t>(in) * plane + i];
            const float t = truth.data[static_cast<std::size_t>(in) * plane + i];
            pred.bits[i] = p > 0.5f;
            tm.bits[i] = t > 0.5f;
            scores.push_back(static_cast<double>(p));
            labels.push_back(tm.bits[i]);
        }
        dices.push_back(dice(pred, tm));
        ious.push_back(iou(pred, tm));
        const ConfusionCounts c = confusion_from_masks(pred, tm);
        pooled.tp += c.tp;
        pooled.fp += c.fp;
        pooled.fn += c.fn;
        pooled.tn += c.tn;
    }
    const ClassificationReport r = classification_report(pooled);
    return {{"dice", aggregate(dices).first},
            {"iou", aggregate(ious).first},
            {"pixel_accuracy", r.accuracy},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"auc", roc_curve(scores, labels).auc}};
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

}  // namespace

EvalReport run_cv(const CvConfig& cfg, const Tensor4f& inputs, const Tensor4f& targets,
                  const std::vector<int>& strat_labels) {
    if (static_cast<std::size_t>(inputs.n) != strat_labels.size() || inputs.n != targets.n)
        throw std::invalid_argument("run_cv: input, target and label counts differ");
    const FoldAssignment fa = make_folds(strat_labels, cfg.k, cfg.seed);

    const fs::path out_dir = cfg.out_dir;
    if (!cfg.out_dir.empty()) fs::create_directories(out_dir);

    std::vector<MetricMap> per_fold;
    for (int fold = 0; fold < cfg.k; ++fold) {
        try {
            std::vector<int> train_rows, held_rows;
            for (std::size_t i = 0; i < fa.assignment.size(); ++i)
                (fa.assignment[i] == fold ? held_rows : train_rows).push_back(static_cast<int>(i));
            const Tensor4f train_x = gather(inputs, train_rows);
            const Tensor4f train_y = gather(targets, train_rows);
            const Tensor4f held_x = gather(inputs, held_rows);
            const Tensor4f held_y = gather(targets, held_rows);

            TrainConfig tc = cfg.train;
            tc.seed = Rng::derive(cfg.seed, static_cast<std::uint64_t>(fold)).next();
            const TrainResult tr = train_model(cfg.spec, train_x, train_y, tc);

            MetricMap fold_metrics;
            ClassicModel head;
            if (cfg.task == CvTask::segmentation) {
                fold_metrics = segmentation_metrics(predict(tr.bundle, held_x), held_y);
            } else {
                std::vector<int> truth(held_rows.size());
                for (std::size_t i = 0; i < held_rows.size(); ++i)
                    truth[i] = strat_labels[static_cast<std::size_t>(held_rows[i])];
                if (cfg.task == CvTask::classification) {
                    const Tensor4f p = predict(tr.bundle, held_x);
                    std::vector<int> pred(truth.size());
                    std::vector<double> scores(truth.size());
                    for (std::size_t i = 0; i < truth.size(); ++i) {
                        scores[i] = static_cast<double>(p.data[i]);
                        pred[i] = scores[i] > 0.5 ? 1 : 0;
                    }
                    fold_metrics = metrics_from_predictions(pred, scores, truth);
                } else {
                    std::vector<int> train_labels(train_rows.size());
                    for (std::size_t i = 0; i < train_rows.size(); ++i)
                        train_labels[i] = strat_labels[static_cast<std::size_t>(train_rows[i])];
                    ClassicParams cp = cfg.classic;
                    cp.seed = Rng::derive(cfg.seed, kTagHeadBase + static_cast<std::uint64_t>(fold))
                                  .next();
                    cp.svm.seed = cp.seed;
                    head = fit_classic_head(cfg.head, extract_features(tr.bundle, train_x),
                                            train_labels, cp);
                    auto [pred, scores] = classic_predict(head, extract_features(tr.bundle, held_x));
                    fold_metrics = metrics_from_predictions(pred, scores, truth);
                }
            }

            if (!cfg.out_dir.empty()) {
                const fs::path fold_dir = out_dir / ("fold" + std::to_string(fold));
                fs::create_directories(fold_dir);
                save_bundle(tr.bundle, (fold_dir / "model.lkmb").string());
                if (cfg.task == CvTask::hybrid)
                    save_classic(head, (fold_dir / "head.lkmb").string());
                nlohmann::ordered_json mj;
                mj["fold"] = fold;
                mj["metrics"] = fold_metrics;
                write_json(fold_dir / "metrics.json", mj);
            }
            per_fold.push_back(std::move(fold_metrics));
        } catch (const std::exception& e) {
            throw std::runtime_error("fold " + std::to_string(fold) + ": " + e.what());
        }
    }

    EvalReport report = aggregate_report(per_fold);
    if (!cfg.out_dir.empty()) {
        nlohmann::ordered_json sj;
        sj["task"] = cfg.task == CvTask::segmentation     ? "segmentation"
                     : cfg.task == CvTask::classification ? "classification"
                                                          : "hybrid";
        sj["folds"] = cfg.k;
        sj["seed"] = cfg.seed;
        const nlohmann::ordered_json body = report_to_json(report);
        sj["per_fold"] = body.at("per_fold");
        sj["summary"] = body.at("summary");
        write_json(out_dir / "summary.json", sj);
    }
    return report;
}

int worker_count() {
    int cap = static_cast<int>(std::thread::hardware_concurrency());
    if (cap < 1) cap = 1;
    if (const char* env = std::getenv("LUNGKIT_THREADS")) {
        const int requested = std::atoi(env);
        if (requested >= 1) cap = std::min(cap, requested);
    }
    return cap;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_lock;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> hold(error_lock);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace lungkit
