#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "coversynth/errors.hpp"
#include "coversynth/spectral.hpp"

namespace coversynth::spectral {

namespace {

// Peaks = bins exceeding their two neighbors on each side; every bin is
// assigned to the nearest peak (identity phase locking regions).
std::vector<int> peak_assignment(const Eigen::VectorXd& mag) {
    const int n = static_cast<int>(mag.size());
    std::vector<int> peaks;
    for (int b = 0; b < n; ++b) {
        bool is_peak = true;
        for (int d = 1; d <= 2 && is_peak; ++d) {
            if (b - d >= 0 && mag(b - d) > mag(b)) is_peak = false;
            if (b + d < n && mag(b + d) >= mag(b)) is_peak = false;
        }
        if (is_peak) peaks.push_back(b);
    }
    std::vector<int> owner(static_cast<std::size_t>(n), 0);
    if (peaks.empty()) {
        for (int b = 0; b < n; ++b) owner[static_cast<std::size_t>(b)] = b;
        return owner;
    }
    std::size_t pi = 0;
    for (int b = 0; b < n; ++b) {
        while (pi + 1 < peaks.size() &&
               std::abs(peaks[pi + 1] - b) < std::abs(peaks[pi] - b))
            ++pi;
        owner[static_cast<std::size_t>(b)] = peaks[pi];
    }
    return owner;
}

double wrap_pi(double x) { return std::remainder(x, 2.0 * M_PI); }

}  // namespace

AudioClip time_stretch(const AudioClip& clip, double factor) {
    if (factor < 0.25 || factor > 4.0)
        throw ConfigError("time_stretch: factor " + std::to_string(factor) + " outside [0.25, 4]");
    clip.validate();
    if (clip.empty()) return clip;
    if (std::abs(factor - 1.0) < 1e-12) return clip;

    StftConfig cfg;
    while (cfg.window_size > static_cast<int>(clip.size()) && cfg.window_size > 64) {
        cfg.window_size /= 2;
    }
    cfg.hop_size = cfg.window_size / 8;
    if (static_cast<int>(clip.size()) < cfg.window_size)
        throw ConfigError("time_stretch: clip too short (" + std::to_string(clip.size()) + " samples)");

    const auto analysis = stft(clip, cfg);
    const int bins = analysis.bins();
    const int in_frames = analysis.frames();
    const int H = cfg.hop_size;
    const int W = cfg.window_size;
    const auto out_len = static_cast<std::size_t>(std::llround(clip.size() * factor));
    const int out_frames = static_cast<int>(out_len) / H + 1;

    ComplexSpectrogram synth;
    synth.kind = TransformKind::Stft;
    synth.stft = cfg;
    synth.sample_rate = clip.sample_rate;
    synth.source_samples = static_cast<int>(out_len);
    synth.values.resize(bins, out_frames);

    Eigen::VectorXd phase_acc(bins);
    for (int m = 0; m < out_frames; ++m) {
        const double t = m / factor;
        const int i = std::clamp(static_cast<int>(t), 0, std::max(0, in_frames - 2));
        const double frac = std::clamp(t - i, 0.0, 1.0);
        const int j = std::min(i + 1, in_frames - 1);

        Eigen::VectorXd mag(bins);
        for (int b = 0; b < bins; ++b)
            mag(b) = (1.0 - frac) * std::abs(analysis.values(b, i)) + frac * std::abs(analysis.values(b, j));

        if (m == 0) {
            for (int b = 0; b < bins; ++b) phase_acc(b) = std::arg(analysis.values(b, i));
        } else {
            const auto owner = peak_assignment(mag);
            Eigen::VectorXd next(bins);
            for (int b = 0; b < bins; ++b) {
                if (owner[static_cast<std::size_t>(b)] != b) continue;
                const double omega = 2.0 * M_PI * b / W;
                const double dphi = std::arg(analysis.values(b, j)) - std::arg(analysis.values(b, i));
                const double inst = omega * H + wrap_pi(dphi - omega * H);
                next(b) = phase_acc(b) + inst;
            }
            for (int b = 0; b < bins; ++b) {
                const int p = owner[static_cast<std::size_t>(b)];
                if (p == b) continue;
                next(b) = next(p) + std::arg(analysis.values(b, i)) - std::arg(analysis.values(p, i));
            }
            phase_acc = next;
        }
        for (int b = 0; b < bins; ++b) synth.values(b, m) = std::polar(mag(b), phase_acc(b));
    }

    AudioClip out = istft(synth, cfg);
    out.samples.resize(out_len, 0.0);
    return out;
}

AudioClip pitch_shift(const AudioClip& clip, int halfsteps) {
    if (halfsteps < -12 || halfsteps > 12)
        throw ConfigError("pitch_shift: shift " + std::to_string(halfsteps) + " outside [-12, 12] halfsteps");
    clip.validate();
    if (halfsteps == 0 || clip.empty()) return clip;

    const double rate_ratio = std::pow(2.0, -halfsteps / 12.0);
    const auto mid_len = static_cast<std::size_t>(std::llround(clip.size() * rate_ratio));
    AudioClip mid;
    mid.sample_rate = clip.sample_rate;
    mid.samples = resample_to_length(clip.samples, mid_len);

    AudioClip out = time_stretch(mid, static_cast<double>(clip.size()) / static_cast<double>(mid_len));
    out.samples.resize(clip.size(), 0.0);  // duration preserved exactly
    return out;
}

}  // namespace coversynth::spectral
