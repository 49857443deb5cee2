#include "lungkit/classic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lungkit/lkmb.hpp"
#include "lungkit/rng.hpp"

namespace lungkit {

namespace {

int feature_dim(const FeatureMatrix& x, const char* who) {
    if (x.empty() || x[0].empty())
        throw std::invalid_argument(std::string(who) + ": empty feature matrix");
    const std::size_t d = x[0].size();
    for (const auto& row : x)
        if (row.size() != d)
            throw std::invalid_argument(std::string(who) + ": ragged feature matrix");
    return static_cast<int>(d);
}

void check_dim(const FeatureMatrix& x, int expected, const char* who) {
    if (feature_dim(x, who) != expected)
        throw std::invalid_argument(std::string(who) + ": feature dimension mismatch");
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

Standardizer standardize_fit(const FeatureMatrix& x) {
    const int d = feature_dim(x, "standardize");
    const double n = static_cast<double>(x.size());
    Standardizer s;
    s.mean.assign(static_cast<std::size_t>(d), 0.0);
    s.sd.assign(static_cast<std::size_t>(d), 0.0);
    for (const auto& row : x)
        for (int j = 0; j < d; ++j) s.mean[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j)];
    for (auto& m : s.mean) m /= n;
    for (const auto& row : x)
        for (int j = 0; j < d; ++j) {
            const double dev = row[static_cast<std::size_t>(j)] - s.mean[static_cast<std::size_t>(j)];
            s.sd[static_cast<std::size_t>(j)] += dev * dev;
        }
    for (auto& v : s.sd) v = std::sqrt(v / n);
    return s;
}

FeatureMatrix standardize_apply(const Standardizer& s, const FeatureMatrix& x) {
    check_dim(x, static_cast<int>(s.mean.size()), "standardize");
    FeatureMatrix out = x;
    for (auto& row : out)
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] -= s.mean[j];
            if (s.sd[j] > 0.0) row[j] /= s.sd[j];
        }
    return out;
}

double gini_impurity(const std::vector<int>& labels) {
    if (labels.empty()) throw std::invalid_argument("gini: empty label set");
    double c1 = 0;
    for (int v : labels) c1 += v;
    const double p1 = c1 / static_cast<double>(labels.size());
    return 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1);
}

// ------------------------------------------------------------- tree grower

namespace {

struct TreeGrower {
    const FeatureMatrix& x;
    const std::vector<double>& target;   // labels as 0/1 or regression residuals
    const std::vector<double>* hessian;  // Newton leaf denominators, may be null
    int max_depth;                       // < 0 means unlimited
    int min_leaf;
    bool use_gini;
    int max_features;  // per-node random subset size; <= 0 means all
    Rng* rng;
    int n_features;
    Tree nodes;

    double leaf_value(const std::vector<int>& samples) const {
        double num = 0.0, den = 0.0;
        for (int i : samples) {
            num += target[static_cast<std::size_t>(i)];
            den += hessian ? (*hessian)[static_cast<std::size_t>(i)] : 1.0;
        }
        return num / std::max(den, 1e-12);
    }

    std::vector<int> node_features() const {
        std::vector<int> all(static_cast<std::size_t>(n_features));
        std::iota(all.begin(), all.end(), 0);
        if (max_features <= 0 || max_features >= n_features) return all;
        for (int k = 0; k < max_features; ++k) {
            const auto j = k + static_cast<int>(rng->below(
                                   static_cast<std::uint64_t>(n_features - k)));
            std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(j)]);
        }
        all.resize(static_cast<std::size_t>(max_features));
        std::sort(all.begin(), all.end());  // keep the lowest-feature tie rule
        return all;
    }

    /// Best (feature, threshold) by weighted child impurity; candidate
    /// thresholds are midpoints of consecutive distinct sorted values.
    /// Ties resolve to the lowest feature, then the lowest threshold.
    bool find_best_split(const std::vector<int>& samples, int& best_f, double& best_thr) const {
        const std::size_t n = samples.size();
        double best_score = std::numeric_limits<double>::infinity();
        bool found = false;
        std::vector<std::pair<double, double>> col(n);  // (value, target)
        for (int f : node_features()) {
            for (std::size_t k = 0; k < n; ++k) {
                const auto i = static_cast<std::size_t>(samples[k]);
                col[k] = {x[i][static_cast<std::size_t>(f)], target[i]};
            }
            std::sort(col.begin(), col.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            double sum_l = 0.0, sumsq_l = 0.0;
            double sum_total = 0.0, sumsq_total = 0.0;
            for (const auto& [v, t] : col) {
                sum_total += t;
                sumsq_total += t * t;
            }
            for (std::size_t k = 1; k < n; ++k) {
                const auto& [v_prev, t_prev] = col[k - 1];
                sum_l += t_prev;
                sumsq_l += t_prev * t_prev;
                if (!(col[k].first > v_prev)) continue;  // not a value boundary
                const auto nl = static_cast<double>(k), nr = static_cast<double>(n - k);
                if (k < static_cast<std::size_t>(min_leaf) ||
                    n - k < static_cast<std::size_t>(min_leaf))
                    continue;
                double score;
                if (use_gini) {
                    const double pl = sum_l / nl, pr = (sum_total - sum_l) / nr;
                    score = nl * (1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)) +
                            nr * (1.0 - pr * pr - (1.0 - pr) * (1.0 - pr));
                } else {
                    const double sum_r = sum_total - sum_l, sumsq_r = sumsq_total - sumsq_l;
                    score = (sumsq_l - sum_l * sum_l / nl) + (sumsq_r - sum_r * sum_r / nr);
                }
                if (score < best_score) {
                    best_score = score;
                    best_f = f;
                    double thr = (v_prev + col[k].first) / 2.0;
                    if (!(thr < col[k].first)) thr = v_prev;  // guard midpoint rounding up
                    best_thr = thr;
                    found = true;
                }
            }
        }
        return found;
    }

    int grow(const std::vector<int>& samples, int depth) {
        TreeNode node;
        node.value = leaf_value(samples);
        bool splittable = samples.size() >= 2 * static_cast<std::size_t>(std::max(min_leaf, 1)) &&
                          (max_depth < 0 || depth < max_depth);
        if (splittable) {
            const double first = target[static_cast<std::size_t>(samples[0])];
            splittable = std::any_of(samples.begin(), samples.end(), [&](int i) {
                return target[static_cast<std::size_t>(i)] != first;
            });
        }
        int f = -1;
        double thr = 0.0;
        if (splittable && find_best_split(samples, f, thr)) {
            node.feature = f;
            node.threshold = thr;
            std::vector<int> left, right;
            for (int i : samples)
                (x[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)] <= thr ? left : right)
                    .push_back(i);
            const auto idx = static_cast<int>(nodes.size());
            nodes.push_back(node);
            const int l = grow(left, depth + 1);
            const int r = grow(right, depth + 1);
            nodes[static_cast<std::size_t>(idx)].left = l;
            nodes[static_cast<std::size_t>(idx)].right = r;
            return idx;
        }
        nodes.push_back(node);
        return static_cast<int>(nodes.size()) - 1;
    }
};

Tree grow_tree(const FeatureMatrix& x, const std::vector<int>& samples,
               const std::vector<double>& target, const std::vector<double>* hessian,
               int max_depth, int min_leaf, bool use_gini, int max_features, Rng* rng) {
    TreeGrower g{x, target, hessian, max_depth, min_leaf, use_gini, max_features, rng,
                 feature_dim(x, "fit_tree"), {}};
    g.grow(samples, 0);
    return std::move(g.nodes);
}

}  // namespace

Tree fit_tree(const FeatureMatrix& x, const std::vector<int>& y, int max_depth, int min_leaf) {
    if (x.size() != y.size()) throw std::invalid_argument("fit_tree: label count mismatch");
    std::vector<double> target(y.begin(), y.end());
    std::vector<int> samples(x.size());
    std::iota(samples.begin(), samples.end(), 0);
    return grow_tree(x, samples, target, nullptr, max_depth, std::max(min_leaf, 1), true, 0,
                     nullptr);
}

double tree_predict(const Tree& tree, const std::vector<double>& x) {
    int idx = 0;
    while (tree[static_cast<std::size_t>(idx)].feature >= 0) {
        const TreeNode& node = tree[static_cast<std::size_t>(idx)];
        idx = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return tree[static_cast<std::size_t>(idx)].value;
}

// ----------------------------------------------------------- random forest

ForestModel fit_random_forest(const FeatureMatrix& x, const std::vector<int>& y,
                              int n_estimators, std::uint64_t seed) {
    if (x.size() < 2) throw std::invalid_argument("random forest: need at least 2 samples");
    if (x.size() != y.size()) throw std::invalid_argument("random forest: label count mismatch");
    if (n_estimators < 1) throw std::invalid_argument("random forest: need at least 1 estimator");
    ForestModel model;
    model.seed = seed;
    model.n_features = feature_dim(x, "random forest");
    const int max_features = std::max(
        1, static_cast<int>(std::llround(std::sqrt(static_cast<double>(model.n_features)))));
    const std::size_t n = x.size();
    std::vector<double> target(y.begin(), y.end());
    for (int t = 0; t < n_estimators; ++t) {
        // one independent stream per tree: bootstrap first, then node subsets
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(t));
        std::vector<int> bootstrap(n);
        for (auto& i : bootstrap) i = static_cast<int>(rng.below(n));
        model.trees.push_back(
            grow_tree(x, bootstrap, target, nullptr, -1, 1, true, max_features, &rng));
    }
    return model;
}

double forest_score(const ForestModel& m, const std::vector<double>& x) {
    double acc = 0.0;
    for (const Tree& t : m.trees) acc += tree_predict(t, x);
    return acc / static_cast<double>(m.trees.size());
}

// ------------------------------------------------------- gradient boosting

BoostModel fit_gradient_boosting(const FeatureMatrix& x, const std::vector<int>& y,
                                 int n_stages, double lr, int max_depth) {
    if (x.size() != y.size()) throw std::invalid_argument("boosting: label count mismatch");
    const double pos = static_cast<double>(std::accumulate(y.begin(), y.end(), 0));
    const double n = static_cast<double>(y.size());
    if (y.empty() || pos == 0.0 || pos == n)
        throw std::invalid_argument("boosting: single-class labels");
    if (n_stages < 1 || lr <= 0.0) throw std::invalid_argument("boosting: bad stage count or rate");

    BoostModel model;
    model.f0 = std::log(pos / (n - pos));
    model.learning_rate = lr;
    model.n_features = feature_dim(x, "boosting");
    std::vector<double> f(y.size(), model.f0);
    std::vector<int> samples(x.size());
    std::iota(samples.begin(), samples.end(), 0);
    std::vector<double> residual(y.size()), hessian(y.size());
    for (int stage = 0; stage < n_stages; ++stage) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double p = sigmoid(f[i]);
            residual[i] = static_cast<double>(y[i]) - p;
            hessian[i] = p * (1.0 - p);
        }
        Tree tree = grow_tree(x, samples, residual, &hessian, max_depth, 1, false, 0, nullptr);
        for (std::size_t i = 0; i < y.size(); ++i) f[i] += lr * tree_predict(tree, x[i]);
        model.stages.push_back(std::move(tree));
    }
    return model;
}

double boost_score(const BoostModel& m, const std::vector<double>& x) {
    double f = m.f0;
    for (const Tree& t : m.stages) f += m.learning_rate * tree_predict(t, x);
    return sigmoid(f);
}

// ---------------------------------------------------------------- SVM/SMO

SvmModel fit_svm_smo(const FeatureMatrix& x, const std::vector<int>& y, const SvmParams& params) {
    const std::size_t n = x.size();
    if (n != y.size()) throw std::invalid_argument("svm: label count mismatch");
    const int d = feature_dim(x, "svm");
    bool has_pos = false, has_neg = false;
    for (int v : y) {
        if (v == 1)
            has_pos = true;
        else if (v == -1)
            has_neg = true;
        else
            throw std::invalid_argument("svm: labels must be -1 or +1");
    }
    if (!has_pos || !has_neg) throw std::invalid_argument("svm: single-class labels");
    if (params.kernel != "rbf" && params.kernel != "linear")
        throw std::invalid_argument("svm: unknown kernel \"" + params.kernel + "\"");

    SvmModel model;
    model.kernel = params.kernel;
    model.c = params.c;
    model.n_features = d;
    if (params.kernel == "rbf") {
        if (params.gamma > 0.0) {
            model.gamma = params.gamma;
        } else {
            // "scale": 1 / (D * Var(X)) with the variance pooled over all entries
            double mean = 0.0;
            for (const auto& row : x)
                for (double v : row) mean += v;
            mean /= static_cast<double>(n) * d;
            double var = 0.0;
            for (const auto& row : x)
                for (double v : row) var += (v - mean) * (v - mean);
            var /= static_cast<double>(n) * d;
            model.gamma = 1.0 / (d * var);
        }
        if (!std::isfinite(model.gamma)) throw std::runtime_error("svm: non-finite kernel value");
    }

    auto kernel = [&](const std::vector<double>& u, const std::vector<double>& v) {
        if (model.kernel == "linear") return std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
        double dist = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) dist += (u[j] - v[j]) * (u[j] - v[j]);
        return std::exp(-model.gamma * dist);
    };
    std::vector<std::vector<double>> k(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double v = kernel(x[i], x[j]);
            if (!std::isfinite(v)) throw std::runtime_error("svm: non-finite kernel value");
            k[i][j] = k[j][i] = v;
        }

    std::vector<double> alpha(n, 0.0);
    double b = 0.0;
    const double c = params.c, tol = params.tol;
    auto decision = [&](std::size_t i) {
        double acc = b;
        for (std::size_t j = 0; j < n; ++j)
            if (alpha[j] > 0.0) acc += alpha[j] * y[j] * k[j][i];
        return acc;
    };

    Rng rng(params.seed);
    int quiet_passes = 0;
    while (quiet_passes < params.max_passes) {
        int changed = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double ei = decision(i) - y[i];
            if (!((y[i] * ei < -tol && alpha[i] < c) || (y[i] * ei > tol && alpha[i] > 0.0)))
                continue;
            std::size_t j = rng.below(n - 1);
            if (j >= i) ++j;
            const double ej = decision(j) - y[j];
            const double ai_old = alpha[i], aj_old = alpha[j];
            double lo, hi;
            if (y[i] != y[j]) {
                lo = std::max(0.0, aj_old - ai_old);
                hi = std::min(c, c + aj_old - ai_old);
            } else {
                lo = std::max(0.0, ai_old + aj_old - c);
                hi = std::min(c, ai_old + aj_old);
            }
            if (lo >= hi) continue;
            const double eta = 2.0 * k[i][j] - k[i][i] - k[j][j];
            if (eta >= 0.0) continue;
            double aj = aj_old - y[j] * (ei - ej) / eta;
            aj = std::clamp(aj, lo, hi);
            if (std::fabs(aj - aj_old) < 1e-5) continue;
            const double ai = ai_old + y[i] * y[j] * (aj_old - aj);
            const double b1 =
                b - ei - y[i] * (ai - ai_old) * k[i][i] - y[j] * (aj - aj_old) * k[i][j];
            const double b2 =
                b - ej - y[i] * (ai - ai_old) * k[i][j] - y[j] * (aj - aj_old) * k[j][j];
            if (ai > 0.0 && ai < c)
                b = b1;
            else if (aj > 0.0 && aj < c)
                b = b2;
            else
                b = (b1 + b2) / 2.0;
            alpha[i] = ai;
            alpha[j] = aj;
            ++changed;
        }
        quiet_passes = changed == 0 ? quiet_passes + 1 : 0;
    }

    model.bias = b;
    for (std::size_t i = 0; i < n; ++i)
        if (alpha[i] > 0.0) {
            model.support_vectors.push_back(x[i]);
            model.dual_coef.push_back(alpha[i] * y[i]);
        }
    return model;
}

double svm_decision(const SvmModel& m, const std::vector<double>& x) {
    double acc = m.bias;
    for (std::size_t s = 0; s < m.support_vectors.size(); ++s) {
        const auto& sv = m.support_vectors[s];
        double kv;
        if (m.kernel == "linear") {
            kv = std::inner_product(sv.begin(), sv.end(), x.begin(), 0.0);
        } else {
            double dist = 0.0;
            for (std::size_t j = 0; j < sv.size(); ++j) dist += (sv[j] - x[j]) * (sv[j] - x[j]);
            kv = std::exp(-m.gamma * dist);
        }
        acc += m.dual_coef[s] * kv;
    }
    return acc;
}

// ----------------------------------------------------------- unified heads

const char* head_kind_name(HeadKind k) {
    switch (k) {
        case HeadKind::svm: return "svm";
        case HeadKind::random_forest: return "random_forest";
        case HeadKind::gradient_boosting: return "gradient_boosting";
    }
    throw std::logic_error("unreachable head kind");
}

HeadKind head_kind_from_name(const std::string& name) {
    if (name == "svm") return HeadKind::svm;
    if (name == "rf" || name == "random_forest") return HeadKind::random_forest;
    if (name == "gb" || name == "gradient_boosting") return HeadKind::gradient_boosting;
    throw std::invalid_argument("unknown classifier head \"" + name + "\"");
}

ClassicModel fit_classic_head(HeadKind kind, const FeatureMatrix& x, const std::vector<int>& y,
                              const ClassicParams& params) {
    for (int v : y)
        if (v != 0 && v != 1) throw std::invalid_argument("classic head: labels must be 0 or 1");
    ClassicModel model;
    model.kind = kind;
    model.standardized = params.standardize;
    const FeatureMatrix* features = &x;
    FeatureMatrix scaled;
    if (params.standardize) {
        model.scaler = standardize_fit(x);
        scaled = standardize_apply(model.scaler, x);
        features = &scaled;
    }
    switch (kind) {
        case HeadKind::svm: {
            std::vector<int> signed_y(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) signed_y[i] = y[i] == 1 ? 1 : -1;
            model.svm = fit_svm_smo(*features, signed_y, params.svm);
            break;
        }
        case HeadKind::random_forest:
            model.forest = fit_random_forest(*features, y, params.rf_estimators, params.seed);
            break;
        case HeadKind::gradient_boosting:
            model.boost =
                fit_gradient_boosting(*features, y, params.gb_stages, params.gb_lr, params.gb_depth);
            break;
    }
    return model;
}

std::pair<std::vector<int>, std::vector<double>> classic_predict(const ClassicModel& model,
                                                                 const FeatureMatrix& x) {
    int expected = 0;
    switch (model.kind) {
        case HeadKind::svm: expected = model.svm.n_features; break;
        case HeadKind::random_forest: expected = model.forest.n_features; break;
        case HeadKind::gradient_boosting: expected = model.boost.n_features; break;
    }
    check_dim(x, expected, "classic predict");
    const FeatureMatrix* features = &x;
    FeatureMatrix scaled;
    if (model.standardized) {
        scaled = standardize_apply(model.scaler, x);
        features = &scaled;
    }
    std::vector<int> labels(x.size());
    std::vector<double> scores(x.size());
    for (std::size_t i = 0; i < features->size(); ++i) {
        const auto& row = (*features)[i];
        switch (model.kind) {
            case HeadKind::svm:
                scores[i] = svm_decision(model.svm, row);
                labels[i] = scores[i] > 0.0 ? 1 : 0;
                break;
            case HeadKind::random_forest:
                scores[i] = forest_score(model.forest, row);
                labels[i] = scores[i] > 0.5 ? 1 : 0;
                break;
            case HeadKind::gradient_boosting:
                scores[i] = boost_score(model.boost, row);
                labels[i] = scores[i] > 0.5 ? 1 : 0;
                break;
        }
    }
    return {std::move(labels), std::move(scores)};
}

// -------------------------------------------------------------- persistence

namespace {

void add_tree_blobs(LkmbWriter& w, const std::vector<Tree>& trees) {
    std::vector<std::int32_t> feature, left, right;
    std::vector<double> threshold, value;
    for (const Tree& t : trees)
        for (const TreeNode& n : t) {
            feature.push_back(n.feature);
            left.push_back(n.left);
            right.push_back(n.right);
            threshold.push_back(n.threshold);
            value.push_back(n.value);
        }
    const int total = static_cast<int>(feature.size());
    w.add_blob("tree.feature", "i32", {total}, feature.data(), feature.size() * 4);
    w.add_blob("tree.left", "i32", {total}, left.data(), left.size() * 4);
    w.add_blob("tree.right", "i32", {total}, right.data(), right.size() * 4);
    w.add_blob("tree.threshold", "f64", {total}, threshold.data(), threshold.size() * 8);
    w.add_blob("tree.value", "f64", {total}, value.data(), value.size() * 8);
}

std::vector<Tree> read_tree_blobs(const LkmbBundle& file, const std::vector<int>& sizes) {
    const auto feature = file.blob("tree.feature").as_i32();
    const auto left = file.blob("tree.left").as_i32();
    const auto right = file.blob("tree.right").as_i32();
    const auto threshold = file.blob("tree.threshold").as_f64();
    const auto value = file.blob("tree.value").as_f64();
    std::vector<Tree> trees;
    std::size_t at = 0;
    for (int size : sizes) {
        Tree t(static_cast<std::size_t>(size));
        for (std::size_t i = 0; i < t.size(); ++i, ++at) {
            t[i].feature = feature[at];
            t[i].left = left[at];
            t[i].right = right[at];
            t[i].threshold = threshold[at];
            t[i].value = value[at];
        }
        trees.push_back(std::move(t));
    }
    if (at != feature.size()) throw std::runtime_error("bundle: tree sizes do not cover all nodes");
    return trees;
}

std::vector<int> tree_sizes(const std::vector<Tree>& trees) {
    std::vector<int> sizes;
    for (const Tree& t : trees) sizes.push_back(static_cast<int>(t.size()));
    return sizes;
}

}  // namespace

void save_classic(const ClassicModel& model, const std::string& path) {
    LkmbWriter w;
    w.meta["model"] = head_kind_name(model.kind);
    w.meta["standardized"] = model.standardized;
    switch (model.kind) {
        case HeadKind::svm: {
            w.meta["n_features"] = model.svm.n_features;
            w.meta["kernel"] = model.svm.kernel;
            w.meta["gamma"] = model.svm.gamma;
            w.meta["c"] = model.svm.c;
            w.meta["bias"] = model.svm.bias;
            w.meta["n_support"] = static_cast<int>(model.svm.support_vectors.size());
            break;
        }
        case HeadKind::random_forest:
            w.meta["n_features"] = model.forest.n_features;
            w.meta["n_estimators"] = static_cast<int>(model.forest.trees.size());
            w.meta["seed"] = model.forest.seed;
            w.meta["tree_sizes"] = tree_sizes(model.forest.trees);
            break;
        case HeadKind::gradient_boosting:
            w.meta["n_features"] = model.boost.n_features;
            w.meta["n_stages"] = static_cast<int>(model.boost.stages.size());
            w.meta["learning_rate"] = model.boost.learning_rate;
            w.meta["f0"] = model.boost.f0;
            w.meta["tree_sizes"] = tree_sizes(model.boost.stages);
            break;
    }
    if (model.standardized) {
        const int d = static_cast<int>(model.scaler.mean.size());
        w.add_blob("scaler.mean", "f64", {d}, model.scaler.mean.data(), model.scaler.mean.size() * 8);
        w.add_blob("scaler.sd", "f64", {d}, model.scaler.sd.data(), model.scaler.sd.size() * 8);
    }
    switch (model.kind) {
        case HeadKind::svm: {
            const int s = static_cast<int>(model.svm.support_vectors.size());
            const int d = model.svm.n_features;
            std::vector<double> flat;
            flat.reserve(static_cast<std::size_t>(s) * d);
            for (const auto& row : model.svm.support_vectors)
                flat.insert(flat.end(), row.begin(), row.end());
            w.add_blob("support_vectors", "f64", {s, d}, flat.data(), flat.size() * 8);
            w.add_blob("dual_coef", "f64", {s}, model.svm.dual_coef.data(),
                       model.svm.dual_coef.size() * 8);
            break;
        }
        case HeadKind::random_forest:
            add_tree_blobs(w, model.forest.trees);
            break;
        case HeadKind::gradient_boosting:
            add_tree_blobs(w, model.boost.stages);
            break;
    }
    w.write(path);
}

ClassicModel load_classic(const std::string& path) {
    const LkmbBundle file = read_lkmb(path);
    ClassicModel model;
    model.kind = head_kind_from_name(file.header.at("model").get<std::string>());
    model.standardized = file.header.at("standardized").get<bool>();
    if (model.standardized) {
        model.scaler.mean = file.blob("scaler.mean").as_f64();
        model.scaler.sd = file.blob("scaler.sd").as_f64();
    }
    switch (model.kind) {
        case HeadKind::svm: {
            model.svm.n_features = file.header.at("n_features").get<int>();
            model.svm.kernel = file.header.at("kernel").get<std::string>();
            model.svm.gamma = file.header.at("gamma").get<double>();
            model.svm.c = file.header.at("c").get<double>();
            model.svm.bias = file.header.at("bias").get<double>();
            const auto flat = file.blob("support_vectors").as_f64();
            const auto shape = file.blob("support_vectors").shape;
            model.svm.dual_coef = file.blob("dual_coef").as_f64();
            const auto d = static_cast<std::size_t>(model.svm.n_features);
            for (std::size_t s = 0; s < static_cast<std::size_t>(shape[0]); ++s)
                model.svm.support_vectors.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(s * d),
                                                       flat.begin() + static_cast<std::ptrdiff_t>((s + 1) * d));
            break;
        }
        case HeadKind::random_forest:
            model.forest.n_features = file.header.at("n_features").get<int>();
            model.forest.seed = file.header.at("seed").get<std::uint64_t>();
            model.forest.trees =
                read_tree_blobs(file, file.header.at("tree_sizes").get<std::vector<int>>());
            break;
        case HeadKind::gradient_boosting:
            model.boost.n_features = file.header.at("n_features").get<int>();
            model.boost.learning_rate = file.header.at("learning_rate").get<double>();
            model.boost.f0 = file.header.at("f0").get<double>();
            model.boost.stages =
                read_tree_blobs(file, file.header.at("tree_sizes").get<std::vector<int>>());
            break;
    }
    return model;
}

}  // namespace lungkit
