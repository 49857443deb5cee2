#include "lungkit/morphoseg.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <stdexcept>

namespace lungkit {

StructuringElement StructuringElement::disk(int radius) {
    if (radius < 0) throw std::invalid_argument("disk: negative radius");
    StructuringElement se;
    se.radius = radius;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius) se.offsets.emplace_back(dx, dy);
    return se;
}

int otsu_threshold(const Raster& img) {
    if (img.data.empty()) throw std::invalid_argument("otsu: empty image");

    std::array<long long, 256> hist{};
    for (const auto v : img.data) ++hist[v];

    const auto [mn, mx] = std::minmax_element(img.data.begin(), img.data.end());
    if (*mn == *mx) return *mn;

    const double total = static_cast<double>(img.data.size());
    double total_sum = 0.0;
    for (int v = 0; v < 256; ++v) total_sum += static_cast<double>(v) * hist[v];

    int best_t = 0;
    double best_var = -1.0;
    double n0 = 0.0, s0 = 0.0;
    for (int t = 0; t < 256; ++t) {
        n0 += static_cast<double>(hist[t]);
        s0 += static_cast<double>(t) * hist[t];
        const double n1 = total - n0;
        if (n0 == 0.0 || n1 == 0.0) continue;
        const double mu0 = s0 / n0;
        const double mu1 = (total_sum - s0) / n1;
        const double var = (n0 / total) * (n1 / total) * (mu0 - mu1) * (mu0 - mu1);
        if (var > best_var) {
            best_var = var;
            best_t = t;
        }
    }
    return best_t;
}

BinaryMask binarize(const Raster& img, int threshold, Polarity polarity) {
    if (threshold < 0 || threshold > 255) throw std::invalid_argument("binarize: threshold range");
    BinaryMask m(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const bool dark = img.data[i] <= threshold;
        m.bits[i] = (polarity == Polarity::dark_foreground) ? dark : !dark;
    }
    return m;
}

namespace {

constexpr int kDx8[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
constexpr int kDy8[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDx4[4] = {0, -1, 1, 0};
constexpr int kDy4[4] = {-1, 0, 0, 1};

// Iterative flood fill over `grid` values equal to `from`, writing `to`.
template <typename T>
void flood(std::vector<T>& grid, int w, int h, int sx, int sy, T from, T to, int connectivity) {
    std::vector<std::pair<int, int>> stack{{sx, sy}};
    grid[static_cast<std::size_t>(sy) * w + sx] = to;
    const int n = connectivity == 8 ? 8 : 4;
    const int* dxs = connectivity == 8 ? kDx8 : kDx4;
    const int* dys = connectivity == 8 ? kDy8 : kDy4;
    while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        for (int i = 0; i < n; ++i) {
            const int nx = x + dxs[i], ny = y + dys[i];
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            T& cell = grid[static_cast<std::size_t>(ny) * w + nx];
            if (cell == from) {
                cell = to;
                stack.emplace_back(nx, ny);
            }
        }
    }
}

}  // namespace

BinaryMask clear_border(const BinaryMask& m) {
    BinaryMask out = m;
    auto seed = [&](int x, int y) {
        if (out.at(x, y)) flood<std::uint8_t>(out.bits, out.width, out.height, x, y, 1, 0, 8);
    };
    for (int x = 0; x < m.width; ++x) {
        seed(x, 0);
        seed(x, m.height - 1);
    }
    for (int y = 0; y < m.height; ++y) {
        seed(0, y);
        seed(m.width - 1, y);
    }
    return out;
}

BinaryMask dilate(const BinaryMask& m, const StructuringElement& se) {
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            // scatter: out(x+dx, y+dy) |= m(x, y); equals the gather form for
            // offset sets symmetric under negation
            for (const auto& [dx, dy] : se.offsets) {
                const int nx = x + dx, ny = y + dy;
                if (nx >= 0 && ny >= 0 && nx < m.width && ny < m.height) out.at(nx, ny) = 1;
            }
        }
    }
    return out;
}

BinaryMask erode(const BinaryMask& m, const StructuringElement& se) {
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            bool all = true;
            for (const auto& [dx, dy] : se.offsets) {
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height || !m.at(nx, ny)) {
                    all = false;
                    break;
                }
            }
            out.at(x, y) = all ? 1 : 0;
        }
    }
    return out;
}

BinaryMask close(const BinaryMask& m, const StructuringElement& se) {
    return erode(dilate(m, se), se);
}

LabelMap label_components(const BinaryMask& m, int connectivity) {
    if (connectivity != 4 && connectivity != 8)
        throw std::invalid_argument("label_components: connectivity must be 4 or 8");
    LabelMap lm(m.width, m.height);
    // mark foreground as -1, then flood each new component in scan order
    for (std::size_t i = 0; i < m.bits.size(); ++i) lm.labels[i] = m.bits[i] ? -1 : 0;
    int next = 0;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (lm.at(x, y) == -1)
                flood<std::int32_t>(lm.labels, m.width, m.height, x, y, -1, ++next, connectivity);
    lm.n_components = next;
    return lm;
}

BinaryMask select_largest(const LabelMap& lm, int k, std::vector<std::string>* warnings) {
    if (k < 1) throw std::invalid_argument("select_largest: k must be >= 1");
    std::vector<long long> area(static_cast<std::size_t>(lm.n_components) + 1, 0);
    for (const auto l : lm.labels)
        if (l > 0) ++area[l];

    std::vector<int> ids(static_cast<std::size_t>(lm.n_components));
    std::iota(ids.begin(), ids.end(), 1);
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
        if (area[a] != area[b]) return area[a] > area[b];
        return a < b;
    });

    if (lm.n_components < k && warnings)
        warnings->push_back("select_largest: only " + std::to_string(lm.n_components) +
                            " component(s) available, requested " + std::to_string(k));

    std::vector<std::uint8_t> keep(static_cast<std::size_t>(lm.n_components) + 1, 0);
    for (int i = 0; i < std::min<int>(k, lm.n_components); ++i) keep[ids[i]] = 1;

    BinaryMask out(lm.width, lm.height);
    for (std::size_t i = 0; i < lm.labels.size(); ++i)
        out.bits[i] = (lm.labels[i] > 0 && keep[lm.labels[i]]) ? 1 : 0;
    return out;
}

BinaryMask fill_holes(const BinaryMask& m) {
    // 2 = background reachable from the border under 4-connectivity
    std::vector<std::uint8_t> grid = m.bits;
    auto seed = [&](int x, int y) {
        if (!grid[static_cast<std::size_t>(y) * m.width + x])
            flood<std::uint8_t>(grid, m.width, m.height, x, y, 0, 2, 4);
    };
    for (int x = 0; x < m.width; ++x) {
        seed(x, 0);
        seed(x, m.height - 1);
    }
    for (int y = 0; y < m.height; ++y) {
        seed(0, y);
        seed(m.width - 1, y);
    }
    BinaryMask out(m.width, m.height);
    for (std::size_t i = 0; i < grid.size(); ++i) out.bits[i] = grid[i] == 2 ? 0 : 1;
    return out;
}

Raster apply_mask(const Raster& img, const BinaryMask& m) {
    if (img.width != m.width || img.height != m.height)
        throw std::invalid_argument("apply_mask: dimension mismatch");
    Raster out(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = m.bits[i] ? img.data[i] : 0;
    return out;
}

MaskPipelineResult generate_lung_mask(const Raster& img, const MaskPipelineConfig& cfg) {
    MaskPipelineResult r;
    const int t = otsu_threshold(img);
    BinaryMask b = binarize(img, t, cfg.polarity);
    b = clear_border(b);
    b = dilate(b, StructuringElement::disk(cfg.r_dilate));
    const LabelMap lm = label_components(b, 8);
    if (lm.n_components == 0) {
        r.warnings.push_back("no components survive border clearing");
        r.mask = BinaryMask(img.width, img.height);
        r.masked = apply_mask(img, r.mask);
        return r;
    }
    b = select_largest(lm, cfg.keep, &r.warnings);
    b = erode(b, StructuringElement::disk(cfg.r_erode));
    b = close(b, StructuringElement::disk(cfg.r_close));
    b = fill_holes(b);
    r.mask = std::move(b);
    r.n_components = label_components(r.mask, 8).n_components;
    r.masked = apply_mask(img, r.mask);
    r.area_fraction =
        static_cast<double>(r.mask.count()) / static_cast<double>(r.mask.bits.size());
    if (r.mask.count() == 0) r.warnings.push_back("empty mask after morphology");
    return r;
}

}  // namespace lungkit
