#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lungkit/raster.hpp"

namespace lungkit {

struct ConfusionCounts {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    long long tn = 0;

    long long total() const { return tp + fp + fn + tn; }
};

struct ClassificationReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr), descending threshold
    double auc = 0.0;
};

/// 2|A∩B| / (|A|+|B|); two empty masks score 1.
double dice(const BinaryMask& a, const BinaryMask& b);

/// |A∩B| / |A∪B|; two empty masks score 1.
double iou(const BinaryMask& a, const BinaryMask& b);

/// Accuracy, precision, recall and F1 from raw counts. Undefined ratios
/// (zero denominators) evaluate to 0.
ClassificationReport classification_report(const ConfusionCounts& c);

ConfusionCounts confusion_from_masks(const BinaryMask& pred, const BinaryMask& truth);

/// ROC over thresholds at the distinct score values, descending. The AUC is
/// the trapezoidal area, identical to pairwise concordance with ties
/// counted half.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);

/// Arithmetic mean and sample standard deviation (divisor n-1; 0 when n=1).
std::pair<double, double> aggregate(const std::vector<double>& values);

/// "mean ± sd" with five decimals.
std::string format_mean_sd(double mean, double sd);

}  // namespace lungkit
