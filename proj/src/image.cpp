#include "esvt/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "esvt/rng.hpp"

namespace esvt {

void RenderConfig::validate() const {
    if (out_h < 1 || out_w < 1) throw ValueError("render output size must be positive");
}

std::string RenderConfig::hash() const {
    std::ostringstream os;
    os << "h" << out_h << "w" << out_w << "l" << (log_compress ? 1 : 0) << "c"
       << (colormap == Colormap::replicate ? "rep" : "vir");
    std::ostringstream hex;
    hex << std::hex << fnv1a64(os.str());
    return hex.str();
}

std::vector<double> resize_bilinear(const std::vector<double>& src, int src_h, int src_w, int dst_h, int dst_w) {
    if (src_h < 1 || src_w < 1 || dst_h < 1 || dst_w < 1) throw ValueError("resize_bilinear: empty grid");
    std::vector<double> dst(static_cast<size_t>(dst_h) * dst_w);
    const double sy = dst_h > 1 ? static_cast<double>(src_h - 1) / (dst_h - 1) : 0.0;
    const double sx = dst_w > 1 ? static_cast<double>(src_w - 1) / (dst_w - 1) : 0.0;
    for (int y = 0; y < dst_h; ++y) {
        const double fy = y * sy;
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src_h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < dst_w; ++x) {
            const double fx = x * sx;
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src_w - 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * src[static_cast<size_t>(y0) * src_w + x0] +
                               wx * src[static_cast<size_t>(y0) * src_w + x1];
            const double bot = (1.0 - wx) * src[static_cast<size_t>(y1) * src_w + x0] +
                               wx * src[static_cast<size_t>(y1) * src_w + x1];
            dst[static_cast<size_t>(y) * dst_w + x] = (1.0 - wy) * top + wy * bot;
        }
    }
    return dst;
}

const std::vector<float>& viridis_table() {
    static const std::vector<float> table = [] {
        // anchor colors of the familiar viridis ramp, interpolated to 256
        static const float anchors[][3] = {
            {0.267004f, 0.004874f, 0.329415f}, {0.282623f, 0.140926f, 0.457517f},
            {0.253935f, 0.265254f, 0.529983f}, {0.206756f, 0.371758f, 0.553117f},
            {0.163625f, 0.471133f, 0.558148f}, {0.127568f, 0.566949f, 0.550556f},
            {0.134692f, 0.658636f, 0.517649f}, {0.266941f, 0.748751f, 0.440573f},
            {0.477504f, 0.821444f, 0.318195f}, {0.741388f, 0.873449f, 0.149561f},
            {0.993248f, 0.906157f, 0.143936f}};
        const int n_anchors = 11;
        std::vector<float> t(256 * 3);
        for (int i = 0; i < 256; ++i) {
            const double pos = static_cast<double>(i) / 255.0 * (n_anchors - 1);
            const int a = std::min(static_cast<int>(pos), n_anchors - 2);
            const double f = pos - a;
            for (int ch = 0; ch < 3; ++ch)
                t[static_cast<size_t>(i) * 3 + ch] =
                    static_cast<float>((1.0 - f) * anchors[a][ch] + f * anchors[a + 1][ch]);
        }
        return t;
    }();
    return table;
}

SpectrogramImage render(const PowerSpectrogram& power, const RenderConfig& cfg) {
    cfg.validate();
    if (power.p.empty()) throw ValueError("render: empty power spectrogram");

    std::vector<double> plane(power.p.size());
    for (size_t i = 0; i < power.p.size(); ++i)
        plane[i] = cfg.log_compress ? std::log10(1.0 + power.p[i]) : power.p[i];

    const auto [mn_it, mx_it] = std::minmax_element(plane.begin(), plane.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx > mn) {
        for (auto& v : plane) v = (v - mn) / (mx - mn);
    } else {
        std::fill(plane.begin(), plane.end(), 0.0);
    }

    const std::vector<double> resized = resize_bilinear(plane, power.bins, power.frames, cfg.out_h, cfg.out_w);

    SpectrogramImage img;
    img.h = cfg.out_h;
    img.w = cfg.out_w;
    img.c = 3;
    img.pixels.resize(static_cast<size_t>(img.h) * img.w * img.c);
    for (size_t i = 0; i < resized.size(); ++i) {
        const double v = std::clamp(resized[i], 0.0, 1.0);
        float rgb[3];
        if (cfg.colormap == Colormap::replicate) {
            rgb[0] = rgb[1] = rgb[2] = static_cast<float>(v);
        } else {
            const auto& lut = viridis_table();
            const int idx = std::min(static_cast<int>(v * 255.0 + 0.5), 255);
            rgb[0] = lut[static_cast<size_t>(idx) * 3];
            rgb[1] = lut[static_cast<size_t>(idx) * 3 + 1];
            rgb[2] = lut[static_cast<size_t>(idx) * 3 + 2];
        }
        for (int ch = 0; ch < 3; ++ch) img.pixels[i * 3 + ch] = (rgb[ch] - 0.5f) / 0.5f;
    }
    return img;
}

SpectrogramImage segment_to_image(const Segment& segment, const StftConfig& stft_cfg, const RenderConfig& cfg) {
    SpectrogramImage img = render(power(stft(segment, stft_cfg)), cfg);
    img.segment_id = segment.id;
    img.config_hash = stft_cfg.hash() + "-" + cfg.hash();
    return img;
}

void write_pgm(const std::string& path, const std::vector<float>& gray, int h, int w) {
    if (static_cast<size_t>(h) * w != gray.size()) throw ValueError("write_pgm: size mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    os << "P5\n" << w << " " << h << "\n255\n";
    for (float v : gray) {
        const int q = std::clamp(static_cast<int>(v * 255.0f + 0.5f), 0, 255);
        os.put(static_cast<char>(q));
    }
    if (!os) throw Error("write failed for '" + path + "'");
}

void write_raw_image(const std::string& path, const SpectrogramImage& image) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    os.write(reinterpret_cast<const char*>(image.pixels.data()),
             static_cast<std::streamsize>(image.pixels.size() * sizeof(float)));
    if (!os) throw Error("write failed for '" + path + "'");
    nlohmann::json j;
    j["h"] = image.h;
    j["w"] = image.w;
    j["c"] = image.c;
    std::ofstream js(path + ".json");
    js << j.dump() << "\n";
    if (!js) throw Error("write failed for '" + path + ".json'");
}

SpectrogramImage read_raw_image(const std::string& path) {
    std::ifstream js(path + ".json");
    if (!js) throw IngestionError("missing sidecar '" + path + ".json'");
    nlohmann::json j;
    try {
        js >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("'" + path + ".json': " + e.what());
    }
    SpectrogramImage img;
    try {
        img.h = j.at("h").get<int>();
        img.w = j.at("w").get<int>();
        img.c = j.at("c").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("'" + path + ".json': " + e.what());
    }
    if (img.h < 1 || img.w < 1 || img.c < 1)
        throw IngestionError("'" + path + ".json': non-positive image extents");
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IngestionError("cannot open '" + path + "'");
    img.pixels.resize(static_cast<size_t>(img.h) * img.w * img.c);
    if (!is.read(reinterpret_cast<char*>(img.pixels.data()),
                 static_cast<std::streamsize>(img.pixels.size() * sizeof(float))))
        throw IngestionError("'" + path + "' shorter than h*w*c floats");
    return img;
}

}  // namespace esvt
