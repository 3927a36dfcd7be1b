#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "coversynth/errors.hpp"
#include "coversynth/fft.hpp"
#include "coversynth/spectral.hpp"

namespace coversynth {

void StftConfig::validate() const {
    if (window_size <= 0) throw ConfigError("StftConfig: window_size must be positive");
    if (hop_size <= 0 || hop_size > window_size)
        throw ConfigError("StftConfig: need 0 < hop_size <= window_size");
    // COLA check for the squared analysis window (weighted OLA inversion):
    // the hop-shifted sum of win^2 must be bounded away from zero.
    std::vector<double> acc(static_cast<std::size_t>(window_size), 0.0);
    for (int shift = -window_size; shift <= window_size; shift += hop_size) {
        for (int i = 0; i < window_size; ++i) {
            int j = i + shift;
            if (j < 0 || j >= window_size) continue;
            double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * j / window_size);
            acc[static_cast<std::size_t>(i)] += w * w;
        }
    }
    double lo = *std::min_element(acc.begin() + window_size / 4, acc.end() - window_size / 4);
    if (lo < 1e-6) throw ConfigError("StftConfig: window does not satisfy COLA at this hop");
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) {
    MagnitudeSpectrogram m;
    m.values = spec.values.cwiseAbs();
    m.kind = spec.kind;
    m.stft = spec.stft;
    m.cqt = spec.cqt;
    m.sample_rate = spec.sample_rate;
    m.source_samples = spec.source_samples;
    return m;
}

namespace spectral {

namespace {

std::vector<double> hann_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
    return w;
}

// Reflection padding by half a window on each side, so frame k is centered
// at sample k*hop of the original signal.
std::vector<double> center_pad(const std::vector<double>& x, int half) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
    std::vector<double> out(x.size() + 2 * static_cast<std::size_t>(half), 0.0);
    auto reflect = [&](std::ptrdiff_t idx) {
        while (idx < 0 || idx >= n) {
            if (idx < 0) idx = -idx;
            if (idx >= n) idx = 2 * (n - 1) - idx;
        }
        return x[static_cast<std::size_t>(idx)];
    };
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(out.size()); ++i)
        out[static_cast<std::size_t>(i)] = reflect(i - half);
    return out;
}

}  // namespace

ComplexSpectrogram stft(const AudioClip& clip, const StftConfig& cfg) {
    cfg.validate();
    if (clip.empty()) throw ConfigError("stft: empty clip");
    if (static_cast<int>(clip.size()) < cfg.window_size)
        throw ConfigError("stft: clip shorter than one window (" + std::to_string(clip.size()) +
                          " < " + std::to_string(cfg.window_size) + " samples)");

    const int W = cfg.window_size;
    const int H = cfg.hop_size;
    const int n_frames = static_cast<int>(clip.size()) / H + 1;
    const auto win = hann_window(W);
    const auto padded = center_pad(clip.samples, W / 2);

    ComplexSpectrogram out;
    out.kind = TransformKind::Stft;
    out.stft = cfg;
    out.sample_rate = clip.sample_rate;
    out.source_samples = static_cast<int>(clip.size());
    out.values.resize(cfg.bins(), n_frames);

    std::vector<double> frame(static_cast<std::size_t>(W));
    for (int f = 0; f < n_frames; ++f) {
        const std::size_t start = static_cast<std::size_t>(f) * static_cast<std::size_t>(H);
        for (int i = 0; i < W; ++i)
            frame[static_cast<std::size_t>(i)] = padded[start + static_cast<std::size_t>(i)] * win[static_cast<std::size_t>(i)];
        auto bins = fft::real_forward(frame);
        for (int b = 0; b < cfg.bins(); ++b) out.values(b, f) = bins[static_cast<std::size_t>(b)];
    }
    return out;
}

AudioClip istft(const ComplexSpectrogram& spec, const StftConfig& cfg) {
    cfg.validate();
    if (spec.bins() != cfg.bins())
        throw ConfigError("istft: spectrogram has " + std::to_string(spec.bins()) +
                          " bins, config expects " + std::to_string(cfg.bins()));
    const int W = cfg.window_size;
    const int H = cfg.hop_size;
    const int n_frames = spec.frames();
    const int out_len = spec.source_samples > 0 ? spec.source_samples : (n_frames - 1) * H;
    const auto win = hann_window(W);

    std::vector<double> acc(static_cast<std::size_t>(out_len + W), 0.0);
    std::vector<double> norm(acc.size(), 0.0);
    std::vector<std::complex<double>> bins(static_cast<std::size_t>(cfg.bins()));
    for (int f = 0; f < n_frames; ++f) {
        for (int b = 0; b < cfg.bins(); ++b) bins[static_cast<std::size_t>(b)] = spec.values(b, f);
        auto frame = fft::real_backward(bins, W);
        const std::size_t start = static_cast<std::size_t>(f) * static_cast<std::size_t>(H);
        for (int i = 0; i < W && start + static_cast<std::size_t>(i) < acc.size(); ++i) {
            const double w = win[static_cast<std::size_t>(i)];
            acc[start + static_cast<std::size_t>(i)] += w * frame[static_cast<std::size_t>(i)] / W;
            norm[start + static_cast<std::size_t>(i)] += w * w;
        }
    }

    AudioClip out;
    out.sample_rate = spec.sample_rate;
    out.samples.resize(static_cast<std::size_t>(out_len));
    const int half = W / 2;
    for (int t = 0; t < out_len; ++t) {
        const std::size_t p = static_cast<std::size_t>(t + half);
        out.samples[static_cast<std::size_t>(t)] = norm[p] > 1e-12 ? acc[p] / norm[p] : 0.0;
    }
    return out;
}

}  // namespace spectral
}  // namespace coversynth
