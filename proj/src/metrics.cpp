#include "lungkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace lungkit {

namespace {

struct Overlap {
    long long a = 0, b = 0, both = 0;
};

Overlap overlap_counts(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("mask metrics: dimension mismatch");
    Overlap o;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        o.a += a.bits[i] != 0;
        o.b += b.bits[i] != 0;
        o.both += (a.bits[i] && b.bits[i]);
    }
    return o;
}

}  // namespace

double dice(const BinaryMask& a, const BinaryMask& b) {
    const Overlap o = overlap_counts(a, b);
    if (o.a + o.b == 0) return 1.0;
    return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    const Overlap o = overlap_counts(a, b);
    const long long uni = o.a + o.b - o.both;
    if (uni == 0) return 1.0;
    return static_cast<double>(o.both) / static_cast<double>(uni);
}

ClassificationReport classification_report(const ConfusionCounts& c) {
    if (c.total() <= 0) throw std::invalid_argument("classification_report: all-zero counts");
    ClassificationReport r;
    r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    r.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    r.recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    r.f1 = (r.precision + r.recall) > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

ConfusionCounts confusion_from_masks(const BinaryMask& pred, const BinaryMask& truth) {
    if (pred.width != truth.width || pred.height != truth.height)
        throw std::invalid_argument("confusion_from_masks: dimension mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.bits.size(); ++i) {
        const bool p = pred.bits[i], t = truth.bits[i];
        if (p && t) ++c.tp;
        else if (p && !t) ++c.fp;
        else if (!p && t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("roc_curve: scores/labels length mismatch");
    long long pos = 0, neg = 0;
    for (const int l : labels) (l ? pos : neg)++;
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("roc_curve: single-class label vector");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });

    RocCurve rc;
    rc.points.emplace_back(0.0, 0.0);
    long long tp = 0, fp = 0;
    long long twice_area = 0;  // accumulates 2 * area * pos * neg, exactly
    std::size_t i = 0;
    while (i < order.size()) {
        // sweep one group of tied scores at a time
        const double s = scores[order[i]];
        const long long tp_prev = tp, fp_prev = fp;
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] ? tp : fp)++;
            ++i;
        }
        twice_area += (fp - fp_prev) * (tp_prev + tp);
        rc.points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                               static_cast<double>(tp) / static_cast<double>(pos));
    }
    rc.auc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(pos) *
                                                static_cast<double>(neg));
    return rc;
}

std::pair<double, double> aggregate(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("aggregate: empty list");
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::string format_mean_sd(double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.5f ± %.5f", mean, sd);
    return buf;
}

}  // namespace lungkit
