#pragma once

#include <string>
#include <vector>

#include "coversynth/beats.hpp"

namespace coversynth::alignment {

struct FeatureMatrix {
    std::string kind;  // "chroma" or "mfcc"
    Mat values;        // rows = sliding blocks of block_beats stacked beats
};

/// Beat-synchronous blocked features: CQT-folded chroma (per-beat L2
/// normalized, blocks restacked and L2 normalized) and MFCCs (z-normalized
/// per song before stacking). Needs at least block_beats+1 beat onsets.
std::vector<FeatureMatrix> beat_sync_features(const AudioClip& clip, const BeatGrid& beats,
                                              int block_beats = 20);

}  // namespace coversynth::alignment
