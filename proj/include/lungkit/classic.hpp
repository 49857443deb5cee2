#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace lungkit {

using FeatureMatrix = std::vector<std::vector<double>>;

struct Standardizer {
    std::vector<double> mean, sd;  // sd 0 marks a constant feature: shift only
};

Standardizer standardize_fit(const FeatureMatrix& x);
FeatureMatrix standardize_apply(const Standardizer& s, const FeatureMatrix& x);

double gini_impurity(const std::vector<int>& labels);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;  // x[feature] <= threshold goes left
    double value = 0.0;         // leaf payload: class-1 probability or regression value
};
using Tree = std::vector<TreeNode>;  // node 0 is the root

/// Greedy CART with candidate thresholds at midpoints of consecutive
/// distinct feature values; ties go to the lowest feature index, then the
/// lowest threshold. max_depth < 0 means unlimited.
Tree fit_tree(const FeatureMatrix& x, const std::vector<int>& y, int max_depth,
              int min_leaf = 1);
double tree_predict(const Tree& tree, const std::vector<double>& x);

struct ForestModel {
    std::uint64_t seed = 0;
    int n_features = 0;
    std::vector<Tree> trees;
};

struct BoostModel {
    double f0 = 0.0;  // initial log-odds
    double learning_rate = 0.1;
    int n_features = 0;
    std::vector<Tree> stages;
};

struct SvmModel {
    std::string kernel = "rbf";  // "rbf" or "linear"
    double gamma = 0.0;
    double c = 1.0;
    double bias = 0.0;
    int n_features = 0;
    FeatureMatrix support_vectors;
    std::vector<double> dual_coef;  // alpha_i * y_i per support vector
};

ForestModel fit_random_forest(const FeatureMatrix& x, const std::vector<int>& y,
                              int n_estimators = 100, std::uint64_t seed = 0);
BoostModel fit_gradient_boosting(const FeatureMatrix& x, const std::vector<int>& y,
                                 int n_stages = 100, double lr = 0.1, int max_depth = 3);

struct SvmParams {
    double c = 1.0;
    std::string kernel = "rbf";
    double gamma = -1.0;  // <= 0 resolves to 1 / (D * Var(X))
    double tol = 1e-3;
    int max_passes = 20;
    std::uint64_t seed = 0;
};

/// Simplified SMO on the dual problem; y must be in {-1, +1}.
SvmModel fit_svm_smo(const FeatureMatrix& x, const std::vector<int>& y,
                     const SvmParams& params = {});

double forest_score(const ForestModel& m, const std::vector<double>& x);
double boost_score(const BoostModel& m, const std::vector<double>& x);
double svm_decision(const SvmModel& m, const std::vector<double>& x);

// ------------------------------------------------------------- full heads

enum class HeadKind { svm, random_forest, gradient_boosting };

const char* head_kind_name(HeadKind k);
HeadKind head_kind_from_name(const std::string& name);

struct ClassicParams {
    bool standardize = true;
    std::uint64_t seed = 0;
    int rf_estimators = 100;
    int gb_stages = 100;
    double gb_lr = 0.1;
    int gb_depth = 3;
    SvmParams svm;
};

/// One trained head plus its input standardizer.
struct ClassicModel {
    HeadKind kind = HeadKind::svm;
    bool standardized = false;
    Standardizer scaler;
    ForestModel forest;
    BoostModel boost;
    SvmModel svm;
};

/// Fits the given head on labels in {0,1}, standardizing features first
/// unless disabled.
ClassicModel fit_classic_head(HeadKind kind, const FeatureMatrix& x, const std::vector<int>& y,
                              const ClassicParams& params = {});

/// Labels in {0,1} plus ranking scores: vote fraction (forest), sigmoid of
/// the boosted score (boosting), raw decision value (SVM).
std::pair<std::vector<int>, std::vector<double>> classic_predict(const ClassicModel& model,
                                                                 const FeatureMatrix& x);

void save_classic(const ClassicModel& model, const std::string& path);
ClassicModel load_classic(const std::string& path);

}  // namespace lungkit
