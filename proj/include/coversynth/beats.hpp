#pragma once

#include <vector>

#include "coversynth/audio.hpp"
#include "coversynth/spectra.hpp"

namespace coversynth::alignment {

struct BeatGrid {
    std::vector<double> onsets;  // seconds, strictly increasing
    double tempo_bpm = 0.0;      // 60 / median inter-beat interval
};

/// Spectral-flux onset strength at one value per STFT hop (86 Hz at the
/// pipeline defaults), locally mean-subtracted, rectified, unit variance.
Vec onset_envelope(const AudioClip& clip);

/// Dynamic-programming beat tracker over the onset envelope with a
/// log-squared penalty on deviation from the estimated global period.
/// Requires >= 5 s of audio; throws when the envelope is silent.
BeatGrid track_beats(const AudioClip& clip);

}  // namespace coversynth::alignment
