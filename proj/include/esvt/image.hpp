#pragma once

#include <string>
#include <vector>

#include "esvt/error.hpp"
#include "esvt/stft.hpp"

namespace esvt {

enum class Colormap { replicate, viridis_lut };

struct RenderConfig {
    int out_h = 224;
    int out_w = 224;
    bool log_compress = true;  // log10(1 + p) before normalization
    Colormap colormap = Colormap::replicate;

    void validate() const;
    std::string hash() const;
};

// Normalized image tensor, row-major H x W x C, channel-last. After the
// final standardization ((x - 0.5) / 0.5) pixels lie in [-1, 1].
struct SpectrogramImage {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<float> pixels;
    std::string segment_id;
    std::string config_hash;

    float at(int y, int x, int ch) const {
        return pixels[(static_cast<size_t>(y) * w + x) * c + ch];
    }
};

// log compression -> per-image min-max to [0,1] (a constant image maps to
// zeros) -> bilinear resize -> channel expansion -> (x - 0.5) / 0.5.
SpectrogramImage render(const PowerSpectrogram& power, const RenderConfig& cfg);

SpectrogramImage segment_to_image(const Segment& segment, const StftConfig& stft_cfg, const RenderConfig& cfg);

// Corner-aligned bilinear interpolation of a single-channel row-major grid.
std::vector<double> resize_bilinear(const std::vector<double>& src, int src_h, int src_w, int dst_h, int dst_w);

// 256-entry viridis-like lookup table, rgb triples in [0, 1].
const std::vector<float>& viridis_table();

// P5 PGM with maxval 255; values clamped from [0, 1].
void write_pgm(const std::string& path, const std::vector<float>& gray, int h, int w);

// Raw little-endian f32 tensor plus a "<path>.json" sidecar {h, w, c}.
void write_raw_image(const std::string& path, const SpectrogramImage& image);
SpectrogramImage read_raw_image(const std::string& path);

}  // namespace esvt
