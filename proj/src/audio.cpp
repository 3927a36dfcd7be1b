#include "coversynth/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "coversynth/errors.hpp"

namespace coversynth {

void AudioClip::validate() const {
    if (sample_rate <= 0.0) throw ConfigError("AudioClip: sample_rate must be positive");
    for (double s : samples) {
        if (!std::isfinite(s)) throw ConfigError("AudioClip: non-finite sample");
    }
}

namespace {

double bessel_i0(double x) {
    // Series expansion; converges quickly for the beta values we use.
    double sum = 1.0, term = 1.0;
    double half = 0.5 * x;
    for (int k = 1; k < 64; ++k) {
        term *= (half / k) * (half / k);
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

constexpr int kSincHalfTaps = 32;
constexpr double kKaiserBeta = 10.0;

double windowed_sinc(double t, double cutoff) {
    // t in input-sample units relative to the output position, cutoff <= 1.
    double u = t * cutoff;
    double s = (u == 0.0) ? 1.0 : std::sin(M_PI * u) / (M_PI * u);
    double frac = t * cutoff / kSincHalfTaps;
    if (frac <= -1.0 || frac >= 1.0) return 0.0;
    static const double i0b = bessel_i0(kKaiserBeta);
    double w = bessel_i0(kKaiserBeta * std::sqrt(1.0 - frac * frac)) / i0b;
    return s * w * cutoff;
}

}  // namespace

std::vector<double> resample_to_length(const std::vector<double>& x, std::size_t out_len) {
    if (out_len == 0 || x.empty()) return std::vector<double>(out_len, 0.0);
    if (out_len == x.size()) return x;
    const double ratio = static_cast<double>(out_len) / static_cast<double>(x.size());
    const double cutoff = std::min(1.0, ratio);
    const double span = kSincHalfTaps / cutoff;
    const std::int64_t n = static_cast<std::int64_t>(x.size());
    std::vector<double> y(out_len, 0.0);
    for (std::size_t j = 0; j < out_len; ++j) {
        const double pos = static_cast<double>(j) / ratio;
        const std::int64_t k0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(pos - span)));
        const std::int64_t k1 = std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::floor(pos + span)));
        double acc = 0.0;
        for (std::int64_t k = k0; k <= k1; ++k) {
            acc += x[static_cast<std::size_t>(k)] * windowed_sinc(pos - static_cast<double>(k), cutoff);
        }
        y[j] = acc;
    }
    return y;
}

AudioClip resample(const AudioClip& clip, double new_rate) {
    if (new_rate <= 0.0) throw ConfigError("resample: target rate must be positive");
    if (clip.sample_rate == new_rate) return clip;
    const auto out_len = static_cast<std::size_t>(
        std::llround(static_cast<double>(clip.samples.size()) * new_rate / clip.sample_rate));
    AudioClip out;
    out.sample_rate = new_rate;
    out.samples = resample_to_length(clip.samples, out_len);
    return out;
}

}  // namespace coversynth
