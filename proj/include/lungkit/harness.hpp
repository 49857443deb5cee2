#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lungkit/classic.hpp"
#include "lungkit/tinynet.hpp"

namespace lungkit {

struct FoldAssignment {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<int> assignment;  // per-sample validation fold in [0, k)
};

/// Stratified fold assignment: within each class, indices are seeded-shuffled
/// and dealt round-robin; the dealing cursor runs on across classes so total
/// fold sizes also stay within one of each other.
FoldAssignment make_folds(const std::vector<int>& labels, int k, std::uint64_t seed);

using MetricMap = std::map<std::string, double>;

struct AggregateEntry {
    double mean = 0.0;
    double sd = 0.0;
};

struct EvalReport {
    std::vector<MetricMap> per_fold;
    std::map<std::string, AggregateEntry> summary;
};

/// Per-key mean and sample standard deviation across folds. All folds must
/// carry the same keys.
EvalReport aggregate_report(const std::vector<MetricMap>& per_fold);

nlohmann::ordered_json report_to_json(const EvalReport& report);

enum class CvTask { segmentation, classification, hybrid };

struct CvConfig {
    CvTask task = CvTask::classification;
    int k = 5;
    std::uint64_t seed = 42;
    nn::NetworkSpec spec;
    TrainConfig train;              // per-fold settings; the seed is re-derived per fold
    HeadKind head = HeadKind::svm;  // hybrid only
    ClassicParams classic;          // hybrid only
    std::string out_dir;            // when set: fold<i>/{model.lkmb, metrics.json}, summary.json
};

/// k-fold cross-validation over preloaded tensors: per fold, train on the
/// other k-1 folds and evaluate every metric on the held-out one.
/// `strat_labels` drive stratification (use a constant vector to disable).
EvalReport run_cv(const CvConfig& cfg, const nn::Tensor4f& inputs, const nn::Tensor4f& targets,
                  const std::vector<int>& strat_labels);

/// Worker cap: LUNGKIT_THREADS when set (minimum 1), else hardware threads.
int worker_count();

/// Runs fn(i) for every i in [0, n) across workers. Callers must write
/// results into per-index slots so the outcome is schedule-independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lungkit
