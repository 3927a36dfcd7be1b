#pragma once

#include <utility>
#include <vector>

#include "coversynth/beats.hpp"
#include "coversynth/similarity.hpp"

namespace coversynth::alignment {

/// Keep exactly min(round(3*sqrt(M*N)), M*N) ones at the largest
/// similarities; ties resolved in row-major order.
Mat threshold_top(const Mat& similarity);

struct SwResult {
    Mat score;
    std::vector<std::pair<int, int>> path;  // strictly increasing in both coordinates
    double best_score = 0.0;
};

/// Local alignment on a binary matrix: match +2, mismatch -3, one-step skip
/// -2, scores clamped at zero; the path is the backtrace from the global
/// maximum.
SwResult smith_waterman(const Mat& binary);

struct StretchResult {
    AudioClip snippet_a;
    AudioClip snippet_a_prime;            // beat-by-beat stretched onto A's grid
    std::vector<double> stretch_factors;  // one per beat interval in the window
    std::size_t window_begin = 0;         // indices into the path
    std::size_t window_end = 0;           // exclusive
    double a_start_seconds = 0.0;
    double a_end_seconds = 0.0;
};

/// Select the contiguous path window whose A-side duration is closest to
/// target_seconds (densest path score among near-ties, earliest on equal),
/// cut that span from A, and stretch each A' beat interval onto A's grid.
StretchResult extract_and_stretch(const AudioClip& a, const AudioClip& a_prime,
                                  const std::vector<std::pair<int, int>>& path, const BeatGrid& beats_a,
                                  const BeatGrid& beats_a_prime, double target_seconds = 20.0);

struct SyncOptions {
    double target_seconds = 20.0;
    int block_beats = 20;
    FusionOptions fusion;
};

struct SyncResult {
    BeatGrid beats_a, beats_a_prime;
    Mat similarity;
    Mat thresholded;
    SwResult alignment;
    StretchResult stretch;
};

/// Full synchronization stage: beats, blocked features, fused similarity,
/// thresholding, Smith-Waterman, and beat-wise stretching.
SyncResult synchronize(const AudioClip& a, const AudioClip& a_prime, const SyncOptions& opts = {});

}  // namespace coversynth::alignment
