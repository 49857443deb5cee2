#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <set>

#include "lungkit/preprocess.hpp"
#include "lungkit/rng.hpp"

using namespace lungkit;

namespace {

Raster random_raster(Rng& rng, int w, int h) {
    Raster img(w, h);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

// Scalar clipped-equalization reference for a single tile covering the whole
// image, recomputed from the definition.
std::array<int, 256> single_tile_mapping(const Raster& img, double clip_limit) {
    std::array<long long, 256> hist{};
    for (auto v : img.data) ++hist[v];
    const long long n = static_cast<long long>(img.data.size());
    const long long clip = static_cast<long long>(std::ceil(clip_limit * n / 256.0));
    long long excess = 0;
    for (auto& h : hist)
        if (h > clip) {
            excess += h - clip;
            h = clip;
        }
    for (int b = 0; b < 256; ++b) hist[b] += excess / 256 + (b < excess % 256 ? 1 : 0);
    std::array<int, 256> map{};
    long long cdf = 0;
    for (int v = 0; v < 256; ++v) {
        cdf += hist[v];
        map[v] = static_cast<int>(std::floor(255.0 * cdf / n + 0.5));
    }
    return map;
}

}  // namespace

TEST_CASE("clahe with one tile equals plain clipped equalization") {
    Rng rng(11);
    ClaheParams p;
    p.tiles_x = p.tiles_y = 1;
    for (int rep = 0; rep < 20; ++rep) {
        const Raster img = random_raster(rng, 17, 13);
        const auto ref = single_tile_mapping(img, p.clip_limit);
        const Raster out = clahe(img, p);
        for (std::size_t i = 0; i < img.size(); ++i) CHECK(out.data[i] == ref[img.data[i]]);
    }
}

TEST_CASE("clahe two-level fixture maps 0 to 128 and 255 to 255") {
    // Four pixels [0,0,255,255], one tile, no clipping: CDF(0)=2 of 4, so
    // m(0)=round(255*2/4)=128 (half rounds up) and m(255)=255.
    Raster img(2, 2);
    img.data = {0, 0, 255, 255};
    ClaheParams p;
    p.clip_limit = 1000.0;  // no clipping
    p.tiles_x = p.tiles_y = 1;
    const Raster out = clahe(img, p);
    CHECK(out.data[0] == 128);
    CHECK(out.data[1] == 128);
    CHECK(out.data[2] == 255);
    CHECK(out.data[3] == 255);
}

TEST_CASE("clahe keeps constant rasters constant") {
    for (int grid : {1, 2, 4}) {
        Raster img(16, 16, 64);
        ClaheParams p;
        p.tiles_x = p.tiles_y = grid;
        const Raster out = clahe(img, p);
        const std::set<std::uint8_t> values(out.data.begin(), out.data.end());
        CHECK(values.size() == 1);
    }
}

TEST_CASE("clahe preserves shape, stays in range, and is deterministic") {
    Rng rng(7);
    for (int rep = 0; rep < 5; ++rep) {
        const Raster img = random_raster(rng, 41, 29);
        ClaheParams p;
        p.tiles_x = 3;
        p.tiles_y = 4;  // 41 and 29 leave remainders for the last tiles
        const Raster a = clahe(img, p);
        const Raster b = clahe(img, p);
        CHECK(a.width == img.width);
        CHECK(a.height == img.height);
        CHECK(a == b);
    }
}

TEST_CASE("clahe validates parameters") {
    const Raster img(8, 8, 1);
    ClaheParams p;
    p.clip_limit = 0.5;
    CHECK_THROWS_AS(clahe(img, p), std::invalid_argument);
    p = ClaheParams{};
    p.tiles_x = 0;
    CHECK_THROWS_AS(clahe(img, p), std::invalid_argument);
    p = ClaheParams{};
    p.tiles_x = 9;  // grid wider than the image
    CHECK_THROWS_WITH_AS(clahe(img, p), doctest::Contains("smaller than the grid"),
                         std::invalid_argument);
}

TEST_CASE("bilinear resize: constant stays constant, identity at same size") {
    Raster img(5, 4, 77);
    ResizeSpec spec;
    spec.target_w = 9;
    spec.target_h = 3;
    for (auto v : resize(img, spec).data) CHECK(v == 77);

    Rng rng(3);
    const Raster r = random_raster(rng, 6, 6);
    spec.target_w = spec.target_h = 6;
    CHECK(resize(r, spec) == r);
}

TEST_CASE("bilinear downsample of a 2x2 block averages the four pixels") {
    Raster img(2, 2);
    img.data = {0, 100, 200, 40};  // source sample lands at (0.5, 0.5)
    ResizeSpec spec;
    spec.target_w = spec.target_h = 1;
    CHECK(resize(img, spec).at(0, 0) == 85);  // (0+100+200+40)/4
}

TEST_CASE("nearest resize uses the floor mapping") {
    Raster img(2, 2);
    img.data = {0, 255, 255, 0};
    ResizeSpec spec;
    spec.target_w = spec.target_h = 4;
    spec.kind = ResizeKind::nearest;
    const Raster up = resize(img, spec);
    // floor(x*2/4): 0,0,1,1 per axis -> 2x2 blocks of source values
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(up.at(x, y) == img.at(x / 2, y / 2));
}

TEST_CASE("mask resize is nearest and stays binary") {
    BinaryMask m(3, 3);
    m.at(1, 1) = 1;
    const BinaryMask up = resize(m, 9, 9);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) {
            CHECK((up.at(x, y) == 0 || up.at(x, y) == 1));
            CHECK(up.at(x, y) == m.at(x * 3 / 9, y * 3 / 9));
        }
    CHECK_THROWS_AS(resize(m, 0, 4), std::invalid_argument);
}

TEST_CASE("normalize divides by 255 exactly and preserves order") {
    Raster img(1, 3);
    img.data = {0, 128, 255};
    const FloatRaster f = normalize(img);
    CHECK(f.data[0] == 0.0f);
    CHECK(f.data[1] == 128.0f / 255.0f);
    CHECK(f.data[2] == 1.0f);
    CHECK(f.data[0] < f.data[1]);
    CHECK(f.data[1] < f.data[2]);
}
