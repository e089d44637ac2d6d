#include "esvt/stft.hpp"

#include <cmath>
#include <sstream>

#include "esvt/rng.hpp"

namespace esvt {

void StftConfig::validate() const {
    if (win_len < 1 || hop < 1 || hop > win_len || win_len > fft_len)
        throw ValueError("stft config requires 0 < hop <= win_len <= fft_len");
    if ((fft_len & (fft_len - 1)) != 0) throw ValueError("fft_len must be a power of two");
}

std::string StftConfig::hash() const {
    std::ostringstream os;
    os << "M" << win_len << "h" << hop << "w" << (window == WindowFn::hann ? "hann" : "rect") << "n" << fft_len;
    std::ostringstream hex;
    hex << std::hex << fnv1a64(os.str());
    return hex.str();
}

std::vector<double> make_window(WindowFn fn, int len) {
    std::vector<double> w(static_cast<size_t>(len), 1.0);
    if (fn == WindowFn::hann) {
        for (int m = 0; m < len; ++m)
            w[static_cast<size_t>(m)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * m / len);
    }
    return w;
}

namespace {

// Iterative radix-2 Cooley-Tukey, in place, n a power of two.
void fft_inplace(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

}  // namespace

StftResult stft(const std::vector<float>& samples, const StftConfig& cfg, double sampling_rate_hz) {
    cfg.validate();
    const int n = static_cast<int>(samples.size());
    if (n < cfg.win_len)
        throw ValueError("segment of " + std::to_string(n) + " samples is shorter than the " +
                         std::to_string(cfg.win_len) + "-sample window");
    const auto w = make_window(cfg.window, cfg.win_len);
    StftResult out;
    out.bins = cfg.fft_len / 2 + 1;
    out.frames = (n - cfg.win_len) / cfg.hop + 1;
    out.sampling_rate_hz = sampling_rate_hz;
    out.hop = cfg.hop;
    out.v.assign(static_cast<size_t>(out.bins) * out.frames, {0.0, 0.0});

    std::vector<std::complex<double>> frame(static_cast<size_t>(cfg.fft_len));
    for (int l = 0; l < out.frames; ++l) {
        for (int m = 0; m < cfg.win_len; ++m)
            frame[static_cast<size_t>(m)] = {samples[static_cast<size_t>(l * cfg.hop + m)] * w[static_cast<size_t>(m)], 0.0};
        for (int m = cfg.win_len; m < cfg.fft_len; ++m) frame[static_cast<size_t>(m)] = {0.0, 0.0};
        fft_inplace(frame);
        for (int k = 0; k < out.bins; ++k) out.at(k, l) = frame[static_cast<size_t>(k)];
    }
    return out;
}

StftResult stft(const Segment& segment, const StftConfig& cfg) {
    return stft(segment.samples, cfg, segment.sampling_rate_hz);
}

PowerSpectrogram power(const StftResult& s) {
    PowerSpectrogram out;
    out.bins = s.bins;
    out.frames = s.frames;
    out.freq_resolution_hz = s.sampling_rate_hz > 0.0 && s.bins > 1
                                 ? s.sampling_rate_hz / (2.0 * static_cast<double>(s.bins - 1))
                                 : 0.0;
    out.frame_hop_s = s.sampling_rate_hz > 0.0 ? static_cast<double>(s.hop) / s.sampling_rate_hz : 0.0;
    out.p.resize(s.v.size());
    for (size_t i = 0; i < s.v.size(); ++i) out.p[i] = std::norm(s.v[i]);
    return out;
}

}  // namespace esvt
