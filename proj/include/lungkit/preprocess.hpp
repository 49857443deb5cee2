#pragma once

#include "lungkit/raster.hpp"

namespace lungkit {

struct ClaheParams {
    double clip_limit = 2.0;
    int tiles_x = 8;
    int tiles_y = 8;
    static constexpr int kBins = 256;
};

enum class ResizeKind { bilinear, nearest };

struct ResizeSpec {
    int target_w = 128;
    int target_h = 128;
    ResizeKind kind = ResizeKind::bilinear;
};

/// Contrast-limited adaptive histogram equalization. Tiles partition the
/// image (last tiles absorb remainder pixels); each tile's histogram is
/// clipped at ceil(clip_limit * tile_pixels / 256), the excess redistributed
/// uniformly in one round, and each pixel is mapped by bilinear interpolation
/// between the four nearest tile mappings (clamped at borders).
Raster clahe(const Raster& img, const ClaheParams& p);

Raster resize(const Raster& img, const ResizeSpec& spec);
BinaryMask resize(const BinaryMask& mask, int target_w, int target_h);  // always nearest

/// Scales intensities to [0,1] by dividing by 255.
FloatRaster normalize(const Raster& img);

}  // namespace lungkit
