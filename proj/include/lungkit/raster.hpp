#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lungkit {

/// 2-D 8-bit grayscale image, row-major, top-left origin.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Raster() = default;
    Raster(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }

    bool operator==(const Raster&) const = default;
};

/// Floating-point image on the same grid, values in [0,1] after normalization.
struct FloatRaster {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    FloatRaster() = default;
    FloatRaster(int w, int h, float fill = 0.f)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Row-major boolean foreground map (stored as 0/1 bytes).
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::size_t count() const;  // number of foreground pixels

    bool operator==(const BinaryMask&) const = default;
};

struct ManifestEntry {
    std::string path;
    int label = 0;  // cancerous=1, normal=0
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    int count_positive = 0;
    int count_negative = 0;

    std::size_t size() const { return entries.size(); }
};

/// Integer BT.601 luma, round half up.
std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Loads a binary PGM ("P5") or an 8-bit PNG. Multi-channel PNG pixels are
/// collapsed with the integer luma rule.
Raster load_image(const std::filesystem::path& path);

/// Writes a binary PGM: "P5\n<w> <h>\n255\n" + raw payload.
void save_image(const Raster& img, const std::filesystem::path& path);

/// Mask variant: foreground pixels are written as 255, background as 0.
void save_image(const BinaryMask& mask, const std::filesystem::path& path);

/// Reads a dataset manifest from either a directory (subfolders `cancerous/`
/// and `normal/`) or a CSV with header `path,label`. Entries come back sorted
/// lexicographically by path so seeded fold splits are reproducible.
DatasetManifest load_manifest(const std::filesystem::path& root);

}  // namespace lungkit
