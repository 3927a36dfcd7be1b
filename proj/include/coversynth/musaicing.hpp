#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "coversynth/audio.hpp"
#include "coversynth/errors.hpp"
#include "coversynth/spectra.hpp"

namespace coversynth::musaicing {

template <typename S>
using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

struct MusaicConfig {
    int repeat_radius = 3;  // r
    int polyphony = 10;     // p
    int continuity = 3;     // c
    int iterations = 100;   // L
    double epsilon = 1e-10;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (repeat_radius < 0 || continuity < 0) throw ConfigError("MusaicConfig: r and c must be >= 0");
        if (polyphony < 1) throw ConfigError("MusaicConfig: polyphony must be >= 1");
        if (iterations < 1) throw ConfigError("MusaicConfig: iterations must be >= 1");
        if (epsilon <= 0.0) throw ConfigError("MusaicConfig: epsilon must be positive");
    }
};

/// STFT of a track concatenated with its +-6 halfstep pitch shifts (block
/// order -6..+6, so block 6 is the unshifted STFT).
struct GrainDictionary {
    ComplexSpectrogram source;
    int block_frames = 0;  // N1
    int min_shift = -6;
    int max_shift = 6;

    int blocks() const { return max_shift - min_shift + 1; }
};

GrainDictionary build_dictionary(const AudioClip& track, const StftConfig& cfg);

/// Keep entries equal to their row-wise max over columns [m-r, m+r]; scale
/// the rest by (1 - (iteration+1)/total), which hits exactly zero on the
/// final iteration.
template <typename S>
MatT<S> restrict_repeats(const MatT<S>& h, int r, int iteration, int total) {
    if (iteration < 0 || iteration >= total) throw ConfigError("restrict_repeats: iteration outside [0, total)");
    const S factor = static_cast<S>(1.0 - static_cast<double>(iteration + 1) / total);
    if (r == 0) return h;
    MatT<S> row_max = h;
    const Eigen::Index n = h.cols();
    for (int d = 1; d <= r; ++d) {
        if (d >= n) break;
        row_max.rightCols(n - d) = row_max.rightCols(n - d).cwiseMax(h.leftCols(n - d));
        row_max.leftCols(n - d) = row_max.leftCols(n - d).cwiseMax(h.rightCols(n - d));
    }
    return (h.array() == row_max.array()).select(h, h * factor);
}

/// Keep entries at or above their column's p-th largest value; scale the
/// rest as above.
template <typename S>
MatT<S> restrict_polyphony(const MatT<S>& h, int p, int iteration, int total) {
    if (iteration < 0 || iteration >= total) throw ConfigError("restrict_polyphony: iteration outside [0, total)");
    const S factor = static_cast<S>(1.0 - static_cast<double>(iteration + 1) / total);
    if (p >= h.rows()) return h;
    MatT<S> out(h.rows(), h.cols());
    std::vector<S> buf(static_cast<std::size_t>(h.rows()));
    for (Eigen::Index m = 0; m < h.cols(); ++m) {
        for (Eigen::Index k = 0; k < h.rows(); ++k) buf[static_cast<std::size_t>(k)] = h(k, m);
        std::nth_element(buf.begin(), buf.begin() + (p - 1), buf.end(), std::greater<S>());
        const S threshold = buf[static_cast<std::size_t>(p - 1)];
        for (Eigen::Index k = 0; k < h.rows(); ++k) {
            const S v = h(k, m);
            out(k, m) = v >= threshold ? v : v * factor;
        }
    }
    return out;
}

/// Diagonal smearing: C(k,m) = sum_{i=-c..c} P(k+i, m+i), out-of-range
/// terms zero.
template <typename S>
MatT<S> promote_continuity(const MatT<S>& h, int c) {
    if (c == 0) return h;
    MatT<S> out = MatT<S>::Zero(h.rows(), h.cols());
    for (int i = -c; i <= c; ++i) {
        const Eigen::Index r0 = std::max(0, -i);
        const Eigen::Index c0 = std::max(0, -i);
        const Eigen::Index nr = h.rows() - std::abs(i);
        const Eigen::Index nc = h.cols() - std::abs(i);
        if (nr <= 0 || nc <= 0) continue;
        out.block(r0, c0, nr, nc) += h.block(r0 + i, c0 + i, nr, nc);
    }
    return out;
}

/// One KL-NMF multiplicative step against the constrained activations:
/// h ⊙ [dictᵀ (target ⊘ (dict·c)) ⊘ column-sums(dict)], epsilon-guarded.
template <typename S>
MatT<S> kl_update(const MatT<S>& h, const MatT<S>& c, const MatT<S>& dict_mag, const MatT<S>& target_mag,
                  S epsilon) {
    if (h.rows() != dict_mag.cols() || c.rows() != h.rows() || c.cols() != h.cols() ||
        target_mag.rows() != dict_mag.rows() || target_mag.cols() != h.cols())
        throw ConfigError("kl_update: inconsistent shapes");
    MatT<S> wc(dict_mag.rows(), c.cols());
    wc.noalias() = dict_mag * c;
    MatT<S> ratio = (target_mag.array() / (wc.array() + epsilon)).matrix();
    MatT<S> numer(h.rows(), h.cols());
    numer.noalias() = dict_mag.transpose() * ratio;
    Eigen::Array<S, Eigen::Dynamic, 1> denom = dict_mag.colwise().sum().transpose().array() + epsilon;
    MatT<S> out = h.cwiseProduct(numer);
    out.array().colwise() /= denom;
    return out;
}

/// Full Driedger loop (repeats -> polyphony -> continuity -> KL step, the KL
/// step multiplying into the constrained matrix) followed by the
/// cross-dictionary synthesis S_A' * H.
ComplexSpectrogram musaic_track(const GrainDictionary& dict_a, const GrainDictionary& dict_a_prime,
                                const ComplexSpectrogram& s_b, const MusaicConfig& cfg,
                                std::vector<double>* kl_log = nullptr, Mat* final_h = nullptr);

/// Sum the track STFTs and invert.
AudioClip mix_tracks(const std::vector<ComplexSpectrogram>& tracks, const StftConfig& cfg);

}  // namespace coversynth::musaicing
