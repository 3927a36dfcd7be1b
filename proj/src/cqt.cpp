#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "coversynth/errors.hpp"
#include "coversynth/fft.hpp"
#include "coversynth/spectral.hpp"

namespace coversynth {

void CqtConfig::validate() const {
    if (bins_per_octave < 1) throw ConfigError("CqtConfig: bins_per_octave must be >= 1");
    if (f_min <= 0.0 || f_max <= f_min) throw ConfigError("CqtConfig: need 0 < f_min < f_max");
    if (sample_rate <= 0.0) throw ConfigError("CqtConfig: sample_rate must be positive");
    if (frame_hop < 1) throw ConfigError("CqtConfig: frame_hop must be >= 1");
    // The nominal grid may overhang Nyquist by at most two bins (the paper's
    // 11.7 kHz top edge at 22050 Hz does exactly that); those rows are
    // structurally zero. Anything further up is a configuration error.
    const double nyquist = sample_rate / 2.0;
    const int first_at_or_above =
        static_cast<int>(std::ceil(bins_per_octave * std::log2(nyquist / f_min)));
    const int overhang = total_bins() - first_at_or_above;
    if (overhang > 2)
        throw ConfigError("CqtConfig: f_max " + std::to_string(f_max) + " Hz lies above Nyquist (" +
                          std::to_string(nyquist) + " Hz) by " + std::to_string(overhang) + " bins");
}

namespace spectral {
namespace {

struct CqtBand {
    int start = 0;                // first FFT bin with nonzero weight
    std::vector<double> weights;  // analysis weights per FFT bin
    int gain_row = 0;             // public row whose per-cell gain applies on inversion
};

struct CqtFilterBank {
    std::vector<CqtBand> bands;  // [lowpass, bin 0 .. bin B-1, highpass]
    std::vector<double> synth_weight;
    int padded_len = 0;
    int internal_hop = 0;
    int decimation = 0;
    int internal_frames() const { return padded_len / internal_hop; }
    int output_frames() const { return internal_frames() / decimation; }
};

// cos^2 bump rising on [lo, peak], falling on [peak, hi]; zero outside.
double bump(double f, double lo, double peak, double hi) {
    if (f <= lo || f >= hi) return 0.0;
    if (f <= peak) {
        double u = (peak - f) / (peak - lo);
        double c = std::cos(0.5 * M_PI * u);
        return c * c;
    }
    double u = (f - peak) / (hi - peak);
    double c = std::cos(0.5 * M_PI * u);
    return c * c;
}

CqtFilterBank build_cqt_filterbank(const CqtConfig& cfg, int padded_len) {
    CqtFilterBank fb;
    fb.padded_len = padded_len;
    const double fs = cfg.sample_rate;
    const double nyquist = fs / 2.0;
    const double df = fs / padded_len;
    const int half_bins = padded_len / 2;
    const int B = cfg.total_bins();

    auto freq_of = [&](int k) { return cfg.bin_frequency(k); };

    auto make_band = [&](double lo, double peak, double hi, bool low_plateau, bool high_plateau,
                         int gain_row) {
        CqtBand band;
        band.gain_row = gain_row;
        lo = std::max(lo, 0.0);
        hi = std::min(hi, nyquist);
        if (hi <= lo) return band;  // fully above Nyquist: structurally zero row
        const int i0 = std::max(0, static_cast<int>(std::floor(lo / df)));
        const int i1 = std::min(half_bins, static_cast<int>(std::ceil(hi / df)));
        std::vector<double> w(static_cast<std::size_t>(i1 - i0 + 1), 0.0);
        for (int i = i0; i <= i1; ++i) {
            const double f = i * df;
            double v;
            if (low_plateau)
                v = (f <= peak) ? 1.0 : bump(f, 2.0 * peak - hi, peak, hi);
            else if (high_plateau)
                v = (f >= peak) ? ((f <= hi + 0.5 * df) ? 1.0 : 0.0)
                                : bump(f, lo, peak, 2.0 * peak - lo);
            else
                v = bump(f, lo, peak, hi);
            w[static_cast<std::size_t>(i - i0)] = v;
        }
        int a = 0, b = static_cast<int>(w.size()) - 1;
        while (a <= b && w[static_cast<std::size_t>(a)] == 0.0) ++a;
        while (b >= a && w[static_cast<std::size_t>(b)] == 0.0) --b;
        if (a > b) return band;
        band.start = i0 + a;
        band.weights.assign(w.begin() + a, w.begin() + b + 1);
        return band;
    };

    // Lowpass residual: plateau from DC to bin 0's center, then fall to bin 1.
    fb.bands.push_back(make_band(0.0, freq_of(0), freq_of(1), true, false, 0));
    for (int k = 0; k < B; ++k)
        fb.bands.push_back(make_band(freq_of(k - 1), freq_of(k), freq_of(k + 1), false, false, k));
    // Highpass residual: rises from the last sub-Nyquist center, plateau to Nyquist.
    int kstar = B - 1;
    while (kstar > 0 && freq_of(kstar) >= nyquist) --kstar;
    const double rise_to = std::min(freq_of(kstar + 1), nyquist);
    fb.bands.push_back(make_band(freq_of(kstar), rise_to, nyquist, false, true, kstar));

    fb.synth_weight.assign(static_cast<std::size_t>(half_bins) + 1, 0.0);
    std::size_t max_support = 0;
    for (const auto& band : fb.bands) {
        max_support = std::max(max_support, band.weights.size());
        for (std::size_t j = 0; j < band.weights.size(); ++j)
            fb.synth_weight[static_cast<std::size_t>(band.start) + j] += band.weights[j] * band.weights[j];
    }

    // Painless condition: every band's support must fit in one subband frame
    // period. Pick the largest divisor of the output hop that satisfies it.
    const int hop = cfg.frame_hop;
    fb.internal_hop = 0;
    for (int d = hop; d >= 1; --d) {
        if (hop % d != 0) continue;
        if (static_cast<std::size_t>(padded_len / d) >= max_support) {
            fb.internal_hop = d;
            break;
        }
    }
    if (fb.internal_hop == 0) throw ConfigError("cqt: no feasible subband rate for this configuration");
    fb.decimation = hop / fb.internal_hop;
    return fb;
}

int padded_length(const CqtConfig& cfg, int samples) {
    return fft::next_fast_len(std::max(samples, cfg.frame_hop), cfg.frame_hop);
}

}  // namespace

ComplexSpectrogram cqt(const AudioClip& clip, const CqtConfig& cfg, bool keep_payload) {
    cfg.validate();
    if (clip.empty()) throw ConfigError("cqt: empty clip");
    if (clip.sample_rate != cfg.sample_rate)
        throw ConfigError("cqt: clip sampled at " + std::to_string(clip.sample_rate) +
                          " Hz, config expects " + std::to_string(cfg.sample_rate));

    const int Lpad = padded_length(cfg, static_cast<int>(clip.size()));
    const auto fb = build_cqt_filterbank(cfg, Lpad);
    const int M0 = fb.internal_frames();
    const int N = fb.output_frames();
    const int B = cfg.total_bins();
    const double scale = 2.0 / Lpad;

    std::vector<std::complex<double>> X(static_cast<std::size_t>(Lpad));
    for (std::size_t i = 0; i < clip.size(); ++i) X[i] = clip.samples[i];
    fft::transform(X, -1);

    ComplexSpectrogram out;
    out.kind = TransformKind::Cqt;
    out.cqt = cfg;
    out.sample_rate = clip.sample_rate;
    out.source_samples = static_cast<int>(clip.size());
    out.values.setZero(B, N);

    std::shared_ptr<CqtPayload> payload;
    if (keep_payload) {
        payload = std::make_shared<CqtPayload>();
        payload->fine.setZero(B + 2, M0);
        payload->internal_hop = fb.internal_hop;
        payload->decimation = fb.decimation;
        payload->padded_len = Lpad;
    }

    std::vector<std::complex<double>> folded;
    for (std::size_t row = 0; row < fb.bands.size(); ++row) {
        const auto& band = fb.bands[row];
        folded.assign(static_cast<std::size_t>(M0), {0.0, 0.0});
        for (std::size_t j = 0; j < band.weights.size(); ++j) {
            const int f = band.start + static_cast<int>(j);
            folded[static_cast<std::size_t>(f % M0)] += X[static_cast<std::size_t>(f)] * band.weights[j];
        }
        fft::transform(folded, +1);  // unnormalized inverse DFT over the subband frame grid
        if (payload)
            for (int m = 0; m < M0; ++m)
                payload->fine(static_cast<Eigen::Index>(row), m) = folded[static_cast<std::size_t>(m)] * scale;
        if (row >= 1 && row <= static_cast<std::size_t>(B)) {
            const int k = static_cast<int>(row) - 1;
            for (int n = 0; n < N; ++n)
                out.values(k, n) = folded[static_cast<std::size_t>(n * fb.decimation)] * scale;
        }
    }
    if (payload) {
        payload->coarse_ref = out.values;
        out.payload = payload;
    }
    return out;
}

AudioClip icqt(const ComplexSpectrogram& spec, const CqtConfig& cfg) {
    cfg.validate();
    if (spec.kind != TransformKind::Cqt) throw ConfigError("icqt: spectrogram is not a CQT");
    const int B = cfg.total_bins();
    if (spec.bins() != B)
        throw ConfigError("icqt: spectrogram has " + std::to_string(spec.bins()) +
                          " bins, config expects " + std::to_string(B));

    const int source = spec.source_samples > 0 ? spec.source_samples : spec.frames() * cfg.frame_hop;
    const int Lpad = spec.payload ? spec.payload->padded_len : padded_length(cfg, source);
    const auto fb = build_cqt_filterbank(cfg, Lpad);
    const int M0 = fb.internal_frames();
    const int N = std::min(spec.frames(), fb.output_frames());
    const int q = fb.decimation;
    const double scale = 2.0 / Lpad;

    // Per-band subband frames: payload frames modulated by the per-cell gain
    // values/coarse_ref, or synthesized from the coarse grid when absent.
    CMat fine(B + 2, M0);
    if (spec.payload) {
        const auto& pl = *spec.payload;
        if (pl.fine.rows() != B + 2 || pl.fine.cols() != M0 || pl.decimation != q)
            throw ConfigError("icqt: payload does not match configuration");
        Eigen::MatrixXcd gains(B, N);
        const double floor_mag = 1e-12 * std::max(1e-300, pl.coarse_ref.cwiseAbs().maxCoeff());
        for (int k = 0; k < B; ++k)
            for (int n = 0; n < N; ++n) {
                const std::complex<double> ref = pl.coarse_ref(k, n);
                const std::complex<double> v = spec.values(k, n);
                if (v == ref)
                    gains(k, n) = 1.0;  // untouched cell: keep subband frames bit-exact
                else
                    gains(k, n) = std::abs(ref) > floor_mag ? v / ref : 0.0;
            }
        for (std::size_t row = 0; row < fb.bands.size(); ++row) {
            const int gk = std::clamp(fb.bands[row].gain_row, 0, B - 1);
            for (int m = 0; m < M0; ++m) {
                const int n = std::min(m / q, N - 1);
                fine(static_cast<Eigen::Index>(row), m) = pl.fine(static_cast<Eigen::Index>(row), m) * gains(gk, n);
            }
        }
    } else {
        fine.setZero();
        const double fs = cfg.sample_rate;
        for (int k = 0; k < B; ++k) {
            const double omega_c = 2.0 * M_PI * cfg.bin_frequency(k) * fb.internal_hop / fs;
            for (int n = 0; n < N; ++n) {
                const std::complex<double> v = spec.values(k, n);
                double mag = std::abs(v);
                double omega = omega_c;
                if (n + 1 < N && mag > 0.0) {
                    double delta = std::arg(spec.values(k, n + 1)) - std::arg(v) - q * omega_c;
                    delta = std::remainder(delta, 2.0 * M_PI);
                    omega = omega_c + delta / q;
                }
                const double phase0 = std::arg(v);
                for (int j = 0; j < q && n * q + j < M0; ++j)
                    fine(k + 1, n * q + j) = std::polar(mag, phase0 + j * omega);
            }
        }
    }

    std::vector<std::complex<double>> Xhat(static_cast<std::size_t>(Lpad), {0.0, 0.0});
    std::vector<std::complex<double>> sub(static_cast<std::size_t>(M0));
    for (std::size_t row = 0; row < fb.bands.size(); ++row) {
        const auto& band = fb.bands[row];
        if (band.weights.empty()) continue;
        for (int m = 0; m < M0; ++m) sub[static_cast<std::size_t>(m)] = fine(static_cast<Eigen::Index>(row), m);
        fft::transform(sub, -1);
        for (std::size_t j = 0; j < band.weights.size(); ++j) {
            const int f = band.start + static_cast<int>(j);
            Xhat[static_cast<std::size_t>(f)] +=
                sub[static_cast<std::size_t>(f % M0)] / (scale * M0) * band.weights[j];
        }
    }
    const int half = Lpad / 2;
    for (int f = 0; f <= half; ++f) {
        const double s = fb.synth_weight[static_cast<std::size_t>(f)];
        Xhat[static_cast<std::size_t>(f)] = s > 1e-10 ? Xhat[static_cast<std::size_t>(f)] / s : 0.0;
    }
    Xhat[0] = Xhat[0].real();
    Xhat[static_cast<std::size_t>(half)] = Xhat[static_cast<std::size_t>(half)].real();
    for (int f = 1; f < half; ++f) Xhat[static_cast<std::size_t>(Lpad - f)] = std::conj(Xhat[static_cast<std::size_t>(f)]);

    fft::transform(Xhat, +1);
    AudioClip out;
    out.sample_rate = cfg.sample_rate;
    out.samples.resize(static_cast<std::size_t>(source));
    for (int t = 0; t < source; ++t) out.samples[static_cast<std::size_t>(t)] = Xhat[static_cast<std::size_t>(t)].real() / Lpad;
    return out;
}

}  // namespace spectral
}  // namespace coversynth
