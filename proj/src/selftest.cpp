#include "lungkit/selftest.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "lungkit/classic.hpp"
#include "lungkit/harness.hpp"
#include "lungkit/metrics.hpp"
#include "lungkit/morphoseg.hpp"
#include "lungkit/nn/ops.hpp"
#include "lungkit/preprocess.hpp"
#include "lungkit/tinynet.hpp"

namespace lungkit {

namespace {

struct Runner {
    std::ostream& out;
    int checks = 0;
    int failures = 0;

    void check(const std::string& name, bool ok) {
        ++checks;
        if (!ok) ++failures;
        out << (ok ? "  [ok]   " : "  [FAIL] ") << name << "\n";
    }
};

bool near(double a, double b, double tol = 1e-12) { return std::fabs(a - b) <= tol; }

}  // namespace

int run_selftest(std::ostream& out) {
    Runner r{out};

    r.check("luma of (10,20,30) is 18", luma(10, 20, 30) == 18);

    {
        Raster img(16, 16, 7);
        const Raster eq = clahe(img, {.clip_limit = 2.0, .tiles_x = 2, .tiles_y = 2});
        bool constant = true;
        for (std::uint8_t v : eq.data) constant = constant && v == eq.data[0];
        r.check("clahe maps a constant image to a constant image", constant);
    }

    {
        Raster img(10, 10);
        for (int i = 0; i < 50; ++i) img.data[static_cast<std::size_t>(i)] = 255;
        r.check("otsu splits a two-level image at the lower level", otsu_threshold(img) == 0);
    }

    {
        const StructuringElement se = StructuringElement::disk(1);
        r.check("disk(1) is the 5-offset plus shape", se.offsets.size() == 5);
        BinaryMask m(7, 7);
        m.at(3, 3) = 1;
        const BinaryMask d = dilate(m, se);
        r.check("dilating a point stamps the element", d.count() == 5 && d.at(3, 2) == 1);
        r.check("closing restores the single point", close(m, se) == m);
    }

    {
        BinaryMask a(4, 4), b(4, 4);
        r.check("dice of two empty masks is 1", near(dice(a, b), 1.0));
        a.at(0, 0) = b.at(0, 0) = 1;
        a.at(1, 0) = 1;
        // |A∩B|=1, |A|=2, |B|=1
        r.check("dice of a hand fixture is 2/3", near(dice(a, b), 2.0 / 3.0));
        const double i = iou(a, b);
        r.check("dice equals 2*iou/(1+iou)", near(dice(a, b), 2.0 * i / (1.0 + i)));
    }

    r.check("auc of the four-sample fixture is 0.75",
            near(roc_curve({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}).auc, 0.75));

    {
        const ClassificationReport rep = classification_report({2, 1, 1, 6});
        r.check("confusion fixture gives accuracy 0.8", near(rep.accuracy, 0.8));
        r.check("confusion fixture gives precision 2/3", near(rep.precision, 2.0 / 3.0));
        r.check("confusion fixture gives recall 2/3", near(rep.recall, 2.0 / 3.0));
        r.check("confusion fixture gives f1 2/3", near(rep.f1, 2.0 / 3.0));
    }

    {
        nn::Tensor4d x(1, 1, 3, 3), w(1, 1, 3, 3), b(1, 1, 1, 1);
        x.data.assign(9, 1.0);
        w.data.assign(9, 1.0);
        const auto valid = nn::conv2d_apply(x, w, b, 1, nn::Padding::valid);
        r.check("3x3 ones conv, valid padding, gives 9", valid.size() == 1 && near(valid.data[0], 9.0));
        const auto same = nn::conv2d_apply(x, w, b, 1, nn::Padding::same);
        const std::vector<double> expect{4, 6, 4, 6, 9, 6, 4, 6, 4};
        r.check("3x3 ones conv, same padding, gives the border-count map", same.data == expect);
    }

    {
        nn::Tensor4d x(1, 2, 1, 1), w(1, 1, 2, 1), b(1, 1, 1, 1);
        x.data = {1.0, 2.0};
        w.data = {1.0, 1.0};
        b.data = {0.5};
        r.check("dense [1,2]·[1,1]+0.5 gives 3.5",
                near(nn::dense_apply(x, w, b).data[0], 3.5));
    }

    {
        nn::Tensor4d x(1, 1, 1, 1);
        x.data = {0.0};
        r.check("sigmoid(0) is 0.5", near(nn::sigmoid_apply(x).data[0], 0.5));
        nn::Tensor4d p(1, 1, 1, 1), y(1, 1, 1, 1);
        p.data = {0.5};
        y.data = {1.0};
        r.check("bce at p=0.5, y=1 is ln 2", near(nn::bce_loss(p, y), std::log(2.0), 1e-15));
    }

    {
        nn::Tensor4d param(1, 1, 1, 1), grad(1, 1, 1, 1);
        param.data = {1.0};
        grad.data = {0.37};
        nn::AdamState<double> st;
        nn::adam_update(param, grad, st, 1, 1e-3);
        r.check("first adam step moves by about -lr*sign(g)",
                std::fabs(param.data[0] - (1.0 - 1e-3)) <= 1e-6 * 1e-3);
    }

    r.check("gini of a balanced pair set is 0.5", near(gini_impurity({1, 1, 0, 0}), 0.5));
    r.check("gini of a 3:1 set is 0.375", near(gini_impurity({1, 1, 1, 0}), 0.375));

    {
        const Standardizer s = standardize_fit({{1.0}, {3.0}});
        const FeatureMatrix z = standardize_apply(s, {{1.0}, {3.0}});
        r.check("standardizing [1,3] gives [-1,1]", near(z[0][0], -1.0) && near(z[1][0], 1.0));
    }

    {
        SvmParams p;
        p.kernel = "linear";
        p.c = 10.0;
        const SvmModel m = fit_svm_smo({{-1.0}, {1.0}}, {-1, 1}, p);
        r.check("two-point svm decision is the identity line",
                near(svm_decision(m, {-1.0}), -1.0, 1e-9) &&
                    near(svm_decision(m, {1.0}), 1.0, 1e-9));
        double sum = 0.0;
        for (double c : m.dual_coef) sum += c;
        r.check("svm dual coefficients balance to zero", std::fabs(sum) <= 1e-6);
    }

    {
        const FoldAssignment fa = make_folds({0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, 5, 7);
        std::vector<int> sizes(5, 0), pos(5, 0);
        for (std::size_t i = 0; i < fa.assignment.size(); ++i) {
            sizes[static_cast<std::size_t>(fa.assignment[i])]++;
            if (i >= 5) pos[static_cast<std::size_t>(fa.assignment[i])]++;
        }
        bool ok = true;
        for (int s : sizes) ok = ok && s == 2;
        for (int p : pos) ok = ok && p == 1;
        r.check("5+5 samples over 5 folds give one of each class per fold", ok);
    }

    {
        const nn::NetworkSpec spec = build_mini_unet(3, 4, 32, 32);
        nn::Model<float> model(spec);
        model.init_weights(1);
        nn::Tensor4f x(1, 1, 32, 32);
        for (std::size_t i = 0; i < x.size(); ++i)
            x.data[i] = static_cast<float>((i * 37 % 256) / 255.0);
        const nn::Tensor4f y = model.forward(x);
        bool in_range = y.h == 32 && y.w == 32 && y.c == 1;
        for (float v : y.data) in_range = in_range && v > 0.f && v < 1.f;
        r.check("mini unet keeps spatial dims and stays inside (0,1)", in_range);
    }

    out << "selftest: " << r.checks << " checks, " << r.failures << " failure"
        << (r.failures == 1 ? "" : "s") << "\n";
    return r.failures;
}

}  // namespace lungkit
