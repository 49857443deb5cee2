#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lungkit/raster.hpp"

namespace lungkit {

/// Component labeling over the mask grid; 0 is background, positive labels
/// are assigned in first-encounter raster-scan order.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> labels;
    int n_components = 0;

    LabelMap() = default;
    LabelMap(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

    std::int32_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::int32_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Discretized disk: offsets with dx^2 + dy^2 <= radius^2.
struct StructuringElement {
    int radius = 0;
    std::vector<std::pair<int, int>> offsets;

    static StructuringElement disk(int radius);
};

enum class Polarity { dark_foreground, bright_foreground };

/// Threshold maximizing between-class variance; ties break to the smallest t.
/// A constant image returns its constant value.
int otsu_threshold(const Raster& img);

BinaryMask binarize(const Raster& img, int threshold, Polarity polarity);

/// Deletes every foreground component that touches the image border.
BinaryMask clear_border(const BinaryMask& m);

BinaryMask dilate(const BinaryMask& m, const StructuringElement& se);
BinaryMask erode(const BinaryMask& m, const StructuringElement& se);

/// Dilation followed by erosion with the same element.
BinaryMask close(const BinaryMask& m, const StructuringElement& se);

LabelMap label_components(const BinaryMask& m, int connectivity);

/// Union of the k largest components by pixel area; ties break to the smaller
/// label id. When fewer than k components exist they are all kept and a
/// warning is appended to *warnings (if given).
BinaryMask select_largest(const LabelMap& lm, int k, std::vector<std::string>* warnings = nullptr);

/// Background regions not 4-connected to the border become foreground.
BinaryMask fill_holes(const BinaryMask& m);

Raster apply_mask(const Raster& img, const BinaryMask& m);

struct MaskPipelineConfig {
    Polarity polarity = Polarity::dark_foreground;
    int r_dilate = 5;
    int r_erode = 4;
    int r_close = 10;
    int keep = 2;
};

struct MaskPipelineResult {
    BinaryMask mask;
    Raster masked;
    int n_components = 0;        // connected components in the final mask (8-conn)
    double area_fraction = 0.0;  // final foreground fraction
    std::vector<std::string> warnings;
};

/// The full lung-mask pipeline: Otsu threshold, binarize, clear border,
/// dilate, label (8-conn), keep the two largest, erode, close, fill holes,
/// apply mask.
MaskPipelineResult generate_lung_mask(const Raster& img, const MaskPipelineConfig& cfg = {});

}  // namespace lungkit
