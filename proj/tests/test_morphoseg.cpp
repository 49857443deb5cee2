#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "lungkit/morphoseg.hpp"
#include "lungkit/rng.hpp"
#include "support/oracles.hpp"
#include "support/phantoms.hpp"

using namespace lungkit;

namespace {

bool subset(const BinaryMask& a, const BinaryMask& b) {
    for (std::size_t i = 0; i < a.bits.size(); ++i)
        if (a.bits[i] && !b.bits[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("disk structuring elements enumerate dx^2+dy^2 <= r^2") {
    CHECK(StructuringElement::disk(0).offsets.size() == 1);
    CHECK(StructuringElement::disk(1).offsets.size() == 5);
    CHECK(StructuringElement::disk(2).offsets.size() == 13);
    const auto se = StructuringElement::disk(3);
    CHECK(se.offsets.size() == 29);
    for (const auto& [dx, dy] : se.offsets) CHECK(dx * dx + dy * dy <= 9);
}

TEST_CASE("otsu matches exhaustive search on random histograms") {
    Rng rng(21);
    for (int rep = 0; rep < 200; ++rep) {
        Raster img(16, 16);
        // mix of full-range noise and tighter two-mode images
        if (rep % 2 == 0) {
            for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
        } else {
            for (auto& v : img.data)
                v = static_cast<std::uint8_t>(rng.uniform() < 0.5 ? 40 + rng.below(30)
                                                                  : 180 + rng.below(40));
        }
        CHECK(otsu_threshold(img) == oracle::exhaustive_otsu(img));
    }
}

TEST_CASE("otsu edge cases: constant and two-level images") {
    Raster flat(4, 4, 97);
    CHECK(otsu_threshold(flat) == 97);
    Raster two(4, 1);
    two.data = {0, 0, 1, 1};
    CHECK(otsu_threshold(two) == 0);  // t=0 separates the classes perfectly
}

TEST_CASE("binarize respects polarity") {
    Raster img(3, 1);
    img.data = {10, 100, 200};
    const BinaryMask dark = binarize(img, 100, Polarity::dark_foreground);
    CHECK(dark.at(0, 0) == 1);
    CHECK(dark.at(1, 0) == 1);  // <= threshold is foreground
    CHECK(dark.at(2, 0) == 0);
    const BinaryMask bright = binarize(img, 100, Polarity::bright_foreground);
    CHECK(bright.at(0, 0) == 0);
    CHECK(bright.at(1, 0) == 0);
    CHECK(bright.at(2, 0) == 1);
}

TEST_CASE("morphology ops match the naive oracles on random masks") {
    Rng rng(31);
    for (int rep = 0; rep < 40; ++rep) {
        const BinaryMask m = rep % 2 == 0 ? oracle::random_mask(rng, 24, 19, 0.4)
                                          : oracle::random_blob_mask(rng, 24, 19);
        const auto se = StructuringElement::disk(1 + static_cast<int>(rng.below(3)));
        CHECK(dilate(m, se) == oracle::naive_dilate(m, se));
        CHECK(erode(m, se) == oracle::naive_erode(m, se));
        CHECK(close(m, se) == oracle::naive_close(m, se));
        CHECK(clear_border(m) == oracle::naive_clear_border(m));
        CHECK(fill_holes(m) == oracle::naive_fill_holes(m));
    }
}

TEST_CASE("erosion by disk(1) of a 5x5 block leaves the 3x3 interior") {
    BinaryMask m(7, 7);
    for (int y = 1; y <= 5; ++y)
        for (int x = 1; x <= 5; ++x) m.at(x, y) = 1;
    const BinaryMask e = erode(m, StructuringElement::disk(1));
    CHECK(e.count() == 9);
    for (int y = 2; y <= 4; ++y)
        for (int x = 2; x <= 4; ++x) CHECK(e.at(x, y) == 1);
}

TEST_CASE("morphology algebraic properties") {
    Rng rng(41);
    const auto se = StructuringElement::disk(2);
    for (int rep = 0; rep < 10; ++rep) {
        const BinaryMask m = oracle::random_blob_mask(rng, 20, 20);
        CHECK(subset(m, dilate(m, se)));            // extensive
        CHECK(subset(erode(m, se), m));             // anti-extensive
        const BinaryMask c = close(m, se);
        CHECK(close(c, se) == c);                   // closing is idempotent
        // closing is extensive only away from the border: the bounded erosion
        // treats out-of-bounds as background, so pixels within the disk
        // radius of the edge may be dropped
        bool interior_kept = true;
        for (int y = 2; y < m.height - 2; ++y)
            for (int x = 2; x < m.width - 2; ++x)
                if (m.at(x, y) && !c.at(x, y)) interior_kept = false;
        CHECK(interior_kept);

        BinaryMask m2 = m;                          // monotonicity: add pixels
        for (int k = 0; k < 8; ++k)
            m2.bits[rng.below(m2.bits.size())] = 1;
        CHECK(subset(dilate(m, se), dilate(m2, se)));
        CHECK(subset(erode(m, se), erode(m2, se)));
    }
}

TEST_CASE("erosion is dilation of the padded complement (duality)") {
    Rng rng(51);
    const auto se = StructuringElement::disk(2);
    const int r = 2;
    for (int rep = 0; rep < 10; ++rep) {
        const BinaryMask m = oracle::random_blob_mask(rng, 15, 12);
        // pad the complement with foreground so border pixels behave as if
        // the outside were background in the original
        BinaryMask padded(m.width + 2 * r, m.height + 2 * r, 1);
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) padded.at(x + r, y + r) = !m.at(x, y);
        const BinaryMask d = oracle::naive_dilate(padded, se);
        BinaryMask rhs(m.width, m.height);
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) rhs.at(x, y) = !d.at(x + r, y + r);
        CHECK(erode(m, se) == rhs);
    }
}

TEST_CASE("clear_border removes exactly the border-touching components") {
    BinaryMask m(6, 6);
    m.at(0, 2) = m.at(1, 2) = 1;  // touches left border
    m.at(3, 3) = m.at(4, 3) = 1;  // interior
    const BinaryMask out = clear_border(m);
    CHECK(out.count() == 2);
    CHECK(out.at(3, 3) == 1);
    CHECK(out.at(4, 3) == 1);

    // postcondition on random masks: nothing on the border survives
    Rng rng(61);
    for (int rep = 0; rep < 10; ++rep) {
        const BinaryMask cleared = clear_border(oracle::random_mask(rng, 14, 14, 0.5));
        for (int x = 0; x < 14; ++x) {
            CHECK(cleared.at(x, 0) == 0);
            CHECK(cleared.at(x, 13) == 0);
        }
        for (int y = 0; y < 14; ++y) {
            CHECK(cleared.at(0, y) == 0);
            CHECK(cleared.at(13, y) == 0);
        }
    }
}

TEST_CASE("labeling assigns first-encounter order and matches the oracle") {
    BinaryMask m(6, 6);
    m.at(4, 0) = m.at(5, 0) = m.at(4, 1) = m.at(5, 1) = 1;  // encountered first
    m.at(0, 4) = m.at(1, 4) = m.at(0, 5) = m.at(1, 5) = 1;
    const LabelMap lm = label_components(m, 8);
    CHECK(lm.n_components == 2);
    CHECK(lm.at(4, 0) == 1);
    CHECK(lm.at(0, 4) == 2);

    Rng rng(71);
    for (int rep = 0; rep < 30; ++rep) {
        const BinaryMask r = oracle::random_mask(rng, 18, 15, 0.45);
        for (int conn : {4, 8}) {
            const LabelMap got = label_components(r, conn);
            const LabelMap want = oracle::naive_label(r, conn);
            CHECK(got.n_components == want.n_components);
            CHECK(got.labels == want.labels);
        }
    }

    // diagonal pixels: one component under 8-conn, two under 4-conn
    BinaryMask diag(3, 3);
    diag.at(0, 0) = diag.at(1, 1) = 1;
    CHECK(label_components(diag, 8).n_components == 1);
    CHECK(label_components(diag, 4).n_components == 2);

    CHECK(label_components(BinaryMask(5, 5), 8).n_components == 0);
}

TEST_CASE("select_largest keeps the k biggest areas, ties to smaller label") {
    BinaryMask m(12, 5);
    for (int x = 0; x < 4; ++x) m.at(x, 0) = 1;                      // label 1, area 4
    for (int x = 6; x < 8; ++x) m.at(x, 0) = 1;                      // label 2, area 2
    for (int x = 0; x < 2; ++x) m.at(x, 3) = 1;                      // label 3, area 2
    const LabelMap lm = label_components(m, 8);
    REQUIRE(lm.n_components == 3);

    const BinaryMask top2 = select_largest(lm, 2);
    CHECK(top2.count() == 6);
    CHECK(top2.at(0, 0) == 1);
    CHECK(top2.at(6, 0) == 1);  // label 2 wins the area tie against label 3
    CHECK(top2.at(0, 3) == 0);

    std::vector<std::string> warnings;
    const BinaryMask all = select_largest(lm, 5, &warnings);
    CHECK(all == m);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("only 3") != std::string::npos);
}

TEST_CASE("fill_holes definition cases and idempotency") {
    BinaryMask ring(5, 5);
    for (int y = 1; y <= 3; ++y)
        for (int x = 1; x <= 3; ++x) ring.at(x, y) = 1;
    ring.at(2, 2) = 0;
    const BinaryMask filled = fill_holes(ring);
    CHECK(filled.at(2, 2) == 1);
    CHECK(filled.count() == 9);

    Rng rng(81);
    for (int rep = 0; rep < 10; ++rep) {
        const BinaryMask m = oracle::random_blob_mask(rng, 16, 16);
        const BinaryMask f = fill_holes(m);
        CHECK(subset(m, f));
        CHECK(fill_holes(f) == f);
    }
}

TEST_CASE("apply_mask zeroes background and keeps foreground") {
    Raster img(3, 1, 10);
    BinaryMask m(3, 1);
    m.at(1, 0) = 1;
    const Raster out = apply_mask(img, m);
    CHECK(out.at(0, 0) == 0);
    CHECK(out.at(1, 0) == 10);
    CHECK(out.at(2, 0) == 0);

    BinaryMask full(3, 1, 1);
    CHECK(apply_mask(img, full) == img);
    CHECK_THROWS_AS(apply_mask(img, BinaryMask(2, 2)), std::invalid_argument);
}

TEST_CASE("lung mask pipeline recovers phantom ellipses") {
    Rng rng(91);
    // radii scaled to the 64x64 phantom (the defaults suit 512x512 scans)
    MaskPipelineConfig cfg;
    cfg.r_dilate = 2;
    cfg.r_erode = 2;
    cfg.r_close = 2;
    for (int rep = 0; rep < 3; ++rep) {
        const phantom::LungPhantom ph = phantom::make_lung_phantom(64, rng);
        const MaskPipelineResult r = generate_lung_mask(ph.image, cfg);
        CHECK(r.n_components == 2);
        CHECK(r.warnings.empty());

        // each recovered region's area within 15% of the drawn ellipse area
        const LabelMap lm = label_components(r.mask, 8);
        REQUIRE(lm.n_components == 2);
        std::vector<double> areas(2, 0);
        for (const auto lbl : lm.labels)
            if (lbl > 0) areas[static_cast<std::size_t>(lbl - 1)] += 1;
        std::sort(areas.begin(), areas.end());
        std::vector<double> want{ph.ellipse_area[0], ph.ellipse_area[1]};
        std::sort(want.begin(), want.end());
        for (int i = 0; i < 2; ++i)
            CHECK(std::abs(areas[i] - want[i]) / want[i] <= 0.15);

        // determinism
        CHECK(generate_lung_mask(ph.image, cfg).mask == r.mask);

        // masked image equals apply_mask of the input
        CHECK(r.masked == apply_mask(ph.image, r.mask));
    }
}

TEST_CASE("lung mask pipeline flags degenerate inputs") {
    const Raster black(32, 32, 0);
    const MaskPipelineResult r = generate_lung_mask(black, {});
    CHECK(r.mask.count() == 0);
    REQUIRE(!r.warnings.empty());
}
