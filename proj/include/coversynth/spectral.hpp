#pragma once

#include "coversynth/audio.hpp"
#include "coversynth/spectra.hpp"

namespace coversynth::spectral {

/// Center-padded STFT (reflection, window/2 each side): frame k is centered
/// at k*hop, giving floor(len/hop)+1 frames. Errors on clips shorter than
/// one window.
ComplexSpectrogram stft(const AudioClip& clip, const StftConfig& cfg);

/// Weighted overlap-add inverse; exact for COLA windows up to edge frames.
AudioClip istft(const ComplexSpectrogram& spec, const StftConfig& cfg);

/// Invertible log-frequency transform (painless filterbank over the full
/// signal FFT). Public matrix has total_bins() rows at cfg.frame_hop;
/// keep_payload attaches the high-rate subbands icqt needs for faithful
/// inversion.
ComplexSpectrogram cqt(const AudioClip& clip, const CqtConfig& cfg, bool keep_payload = true);

AudioClip icqt(const ComplexSpectrogram& spec, const CqtConfig& cfg);

/// Phase retrieval by alternating magnitude projection and transform
/// consistency. Works on STFT or CQT magnitude frames.
AudioClip griffin_lim(const MagnitudeSpectrogram& mag, int iterations);

/// As above but records the consistency error ||mag - |T(x_i)||_F after
/// each iteration (used by the monotonicity property tests).
AudioClip griffin_lim(const MagnitudeSpectrogram& mag, int iterations, std::vector<double>* errors);

/// Phase-vocoder stretch: output duration = round(input * factor) samples,
/// pitch preserved. factor must lie in [0.25, 4].
AudioClip time_stretch(const AudioClip& clip, double factor);

/// Resample-then-stretch pitch shift by halfsteps in [-12, 12]; duration
/// preserved exactly.
AudioClip pitch_shift(const AudioClip& clip, int halfsteps);

}  // namespace coversynth::spectral
