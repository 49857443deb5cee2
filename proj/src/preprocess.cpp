#include "lungkit/preprocess.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace lungkit {

namespace {

struct TileGrid {
    std::vector<int> x0, x1, y0, y1;  // [tile) bounds per axis
    std::vector<double> cx, cy;       // tile centers in pixel coordinates
};

TileGrid make_grid(int width, int height, int tiles_x, int tiles_y) {
    TileGrid g;
    const int base_w = width / tiles_x;
    const int base_h = height / tiles_y;
    for (int tx = 0; tx < tiles_x; ++tx) {
        const int a = tx * base_w;
        const int b = (tx == tiles_x - 1) ? width : (tx + 1) * base_w;
        g.x0.push_back(a);
        g.x1.push_back(b);
        g.cx.push_back((a + b - 1) / 2.0);
    }
    for (int ty = 0; ty < tiles_y; ++ty) {
        const int a = ty * base_h;
        const int b = (ty == tiles_y - 1) ? height : (ty + 1) * base_h;
        g.y0.push_back(a);
        g.y1.push_back(b);
        g.cy.push_back((a + b - 1) / 2.0);
    }
    return g;
}

// Clipped-histogram equalization mapping for one tile.
std::array<std::uint8_t, 256> tile_mapping(const Raster& img, int x0, int x1, int y0, int y1,
                                           double clip_limit) {
    std::array<long long, 256> hist{};
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) ++hist[img.at(x, y)];
    const long long n = static_cast<long long>(x1 - x0) * (y1 - y0);

    const long long clip =
        static_cast<long long>(std::ceil(clip_limit * static_cast<double>(n) / 256.0));
    long long excess = 0;
    for (auto& h : hist) {
        if (h > clip) {
            excess += h - clip;
            h = clip;
        }
    }
    const long long per_bin = excess / 256;
    const long long rem = excess % 256;
    for (int b = 0; b < 256; ++b) hist[b] += per_bin + (b < rem ? 1 : 0);

    std::array<std::uint8_t, 256> map{};
    long long cdf = 0;
    for (int v = 0; v < 256; ++v) {
        cdf += hist[v];
        const double m = 255.0 * static_cast<double>(cdf) / static_cast<double>(n);
        map[v] = static_cast<std::uint8_t>(std::min(255.0, std::floor(m + 0.5)));
    }
    return map;
}

// Index of the tile whose center is at or left of coordinate c, clamped.
int lower_tile(const std::vector<double>& centers, double c) {
    int i = static_cast<int>(centers.size()) - 1;
    while (i > 0 && centers[i] > c) --i;
    return i;
}

}  // namespace

Raster clahe(const Raster& img, const ClaheParams& p) {
    if (p.clip_limit < 1.0) throw std::invalid_argument("clahe: clip_limit must be >= 1.0");
    if (p.tiles_x < 1 || p.tiles_y < 1) throw std::invalid_argument("clahe: grid must be >= 1");
    if (img.width < p.tiles_x || img.height < p.tiles_y)
        throw std::invalid_argument("clahe: image smaller than the grid");

    const TileGrid g = make_grid(img.width, img.height, p.tiles_x, p.tiles_y);
    std::vector<std::array<std::uint8_t, 256>> maps;
    maps.reserve(static_cast<std::size_t>(p.tiles_x) * p.tiles_y);
    for (int ty = 0; ty < p.tiles_y; ++ty)
        for (int tx = 0; tx < p.tiles_x; ++tx)
            maps.push_back(tile_mapping(img, g.x0[tx], g.x1[tx], g.y0[ty], g.y1[ty], p.clip_limit));

    auto map_at = [&](int tx, int ty) -> const std::array<std::uint8_t, 256>& {
        return maps[static_cast<std::size_t>(ty) * p.tiles_x + tx];
    };

    Raster out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        const int ty0 = lower_tile(g.cy, y);
        const int ty1 = std::min(ty0 + 1, p.tiles_y - 1);
        double wy = 0.0;  // clamped replication outside the center span
        if (ty1 > ty0 && y >= g.cy[ty0])
            wy = (y - g.cy[ty0]) / (g.cy[ty1] - g.cy[ty0]);
        for (int x = 0; x < img.width; ++x) {
            const int tx0 = lower_tile(g.cx, x);
            const int tx1 = std::min(tx0 + 1, p.tiles_x - 1);
            double wx = 0.0;
            if (tx1 > tx0 && x >= g.cx[tx0])
                wx = (x - g.cx[tx0]) / (g.cx[tx1] - g.cx[tx0]);

            const std::uint8_t v = img.at(x, y);
            const double m00 = map_at(tx0, ty0)[v], m10 = map_at(tx1, ty0)[v];
            const double m01 = map_at(tx0, ty1)[v], m11 = map_at(tx1, ty1)[v];
            const double top = m00 * (1.0 - wx) + m10 * wx;
            const double bot = m01 * (1.0 - wx) + m11 * wx;
            const double blended = top * (1.0 - wy) + bot * wy;
            out.at(x, y) = static_cast<std::uint8_t>(
                std::min(255.0, std::max(0.0, std::floor(blended + 0.5))));
        }
    }
    return out;
}

Raster resize(const Raster& img, const ResizeSpec& spec) {
    if (spec.target_w <= 0 || spec.target_h <= 0)
        throw std::invalid_argument("resize: zero target dimension");
    Raster out(spec.target_w, spec.target_h);

    if (spec.kind == ResizeKind::nearest) {
        for (int y = 0; y < spec.target_h; ++y) {
            const int sy = static_cast<int>(static_cast<long long>(y) * img.height / spec.target_h);
            for (int x = 0; x < spec.target_w; ++x) {
                const int sx =
                    static_cast<int>(static_cast<long long>(x) * img.width / spec.target_w);
                out.at(x, y) = img.at(std::min(sx, img.width - 1), std::min(sy, img.height - 1));
            }
        }
        return out;
    }

    const double sx_scale = static_cast<double>(img.width) / spec.target_w;
    const double sy_scale = static_cast<double>(img.height) / spec.target_h;
    for (int y = 0; y < spec.target_h; ++y) {
        const double sy = (y + 0.5) * sy_scale - 0.5;
        const int y0 = static_cast<int>(std::floor(sy));
        const double fy = sy - y0;
        const int ya = std::clamp(y0, 0, img.height - 1);
        const int yb = std::clamp(y0 + 1, 0, img.height - 1);
        for (int x = 0; x < spec.target_w; ++x) {
            const double sx = (x + 0.5) * sx_scale - 0.5;
            const int x0 = static_cast<int>(std::floor(sx));
            const double fx = sx - x0;
            const int xa = std::clamp(x0, 0, img.width - 1);
            const int xb = std::clamp(x0 + 1, 0, img.width - 1);
            const double v = (1 - fy) * ((1 - fx) * img.at(xa, ya) + fx * img.at(xb, ya)) +
                             fy * ((1 - fx) * img.at(xa, yb) + fx * img.at(xb, yb));
            out.at(x, y) = static_cast<std::uint8_t>(
                std::min(255.0, std::max(0.0, std::floor(v + 0.5))));
        }
    }
    return out;
}

BinaryMask resize(const BinaryMask& mask, int target_w, int target_h) {
    if (target_w <= 0 || target_h <= 0)
        throw std::invalid_argument("resize: zero target dimension");
    BinaryMask out(target_w, target_h);
    for (int y = 0; y < target_h; ++y) {
        const int sy = static_cast<int>(static_cast<long long>(y) * mask.height / target_h);
        for (int x = 0; x < target_w; ++x) {
            const int sx = static_cast<int>(static_cast<long long>(x) * mask.width / target_w);
            out.at(x, y) = mask.at(std::min(sx, mask.width - 1), std::min(sy, mask.height - 1));
        }
    }
    return out;
}

FloatRaster normalize(const Raster& img) {
    FloatRaster out(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = static_cast<float>(img.data[i]) / 255.0f;
    return out;
}

}  // namespace lungkit
