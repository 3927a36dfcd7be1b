#include <cmath>
#include <complex>

#include "coversynth/errors.hpp"
#include "coversynth/spectral.hpp"

namespace coversynth::spectral {

namespace {

ComplexSpectrogram with_phase_of(const MagnitudeSpectrogram& mag, const CMat* phase_src) {
    ComplexSpectrogram spec;
    spec.kind = mag.kind;
    spec.stft = mag.stft;
    spec.cqt = mag.cqt;
    spec.sample_rate = mag.sample_rate;
    spec.source_samples = mag.source_samples;
    spec.values.resize(mag.values.rows(), mag.values.cols());
    for (Eigen::Index c = 0; c < mag.values.cols(); ++c)
        for (Eigen::Index r = 0; r < mag.values.rows(); ++r) {
            const double phi = phase_src ? std::arg((*phase_src)(r, c)) : 0.0;
            spec.values(r, c) = std::polar(mag.values(r, c), phi);
        }
    return spec;
}

}  // namespace

AudioClip griffin_lim(const MagnitudeSpectrogram& mag, int iterations) {
    return griffin_lim(mag, iterations, nullptr);
}

AudioClip griffin_lim(const MagnitudeSpectrogram& mag, int iterations, std::vector<double>* errors) {
    if (iterations < 1) throw ConfigError("griffin_lim: iterations must be >= 1");
    if ((mag.values.array() < 0.0).any()) throw ConfigError("griffin_lim: negative magnitude entries");

    ComplexSpectrogram estimate = with_phase_of(mag, nullptr);
    AudioClip x;
    for (int it = 0; it < iterations; ++it) {
        if (mag.kind == TransformKind::Stft) {
            x = istft(estimate, mag.stft);
            const auto consistent = stft(x, mag.stft);
            if (errors) errors->push_back((mag.values - consistent.values.cwiseAbs()).norm());
            estimate = with_phase_of(mag, &consistent.values);
        } else {
            x = icqt(estimate, mag.cqt);
            const auto consistent = cqt(x, mag.cqt, false);
            if (errors) errors->push_back((mag.values - consistent.values.cwiseAbs()).norm());
            estimate = with_phase_of(mag, &consistent.values);
        }
    }
    return mag.kind == TransformKind::Stft ? istft(estimate, mag.stft) : icqt(estimate, mag.cqt);
}

}  // namespace coversynth::spectral
