#include "coversynth/features.hpp"

#include <algorithm>
#include <cmath>

#include "coversynth/errors.hpp"
#include "coversynth/spectral.hpp"

namespace coversynth::alignment {

namespace {

constexpr int kMelBands = 40;
constexpr int kMfccCoeffs = 20;

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Per-beat aggregation: mean of feature frames whose centers fall in
// [onset_i, onset_{i+1}).
Mat beat_aggregate(const Mat& frames_by_dim, double frame_period, const std::vector<double>& onsets) {
    const int dims = static_cast<int>(frames_by_dim.rows());
    const int n_frames = static_cast<int>(frames_by_dim.cols());
    const int n_beats = static_cast<int>(onsets.size()) - 1;
    Mat out = Mat::Zero(dims, n_beats);
    for (int i = 0; i < n_beats; ++i) {
        int lo = std::clamp(static_cast<int>(std::ceil(onsets[static_cast<std::size_t>(i)] / frame_period)), 0, n_frames - 1);
        int hi = std::clamp(static_cast<int>(std::floor(onsets[static_cast<std::size_t>(i) + 1] / frame_period)), 0, n_frames - 1);
        if (hi < lo) hi = lo;
        out.col(i) = frames_by_dim.middleCols(lo, hi - lo + 1).rowwise().mean();
    }
    return out;
}

Mat stack_blocks(const Mat& per_beat, int block) {
    const int dims = static_cast<int>(per_beat.rows());
    const int n_beats = static_cast<int>(per_beat.cols());
    const int n_blocks = n_beats - block + 1;
    Mat out(n_blocks, static_cast<Eigen::Index>(dims) * block);
    for (int b = 0; b < n_blocks; ++b)
        for (int j = 0; j < block; ++j)
            out.block(b, static_cast<Eigen::Index>(j) * dims, 1, dims) = per_beat.col(b + j).transpose();
    return out;
}

Mat chroma_frames(const AudioClip& clip) {
    CqtConfig cfg;
    cfg.sample_rate = clip.sample_rate;
    const auto spec = spectral::cqt(clip, cfg, /*keep_payload=*/false);
    const int bins = spec.bins();
    Mat chroma = Mat::Zero(12, spec.frames());
    for (int k = 0; k < bins; ++k) {
        const double midi = 69.0 + 12.0 * std::log2(cfg.bin_frequency(k) / 440.0);
        const int pc = ((static_cast<int>(std::llround(midi)) % 12) + 12) % 12;
        chroma.row(pc) += spec.values.row(k).cwiseAbs();
    }
    return chroma;
}

Mat mfcc_frames(const AudioClip& clip) {
    StftConfig cfg;
    const auto spec = spectral::stft(clip, cfg);
    const int bins = spec.bins();
    const int frames = spec.frames();
    const double nyquist = clip.sample_rate / 2.0;

    // Triangular mel filterbank over the power spectrum.
    std::vector<double> edges(kMelBands + 2);
    for (int i = 0; i < kMelBands + 2; ++i)
        edges[static_cast<std::size_t>(i)] = mel_to_hz(hz_to_mel(nyquist) * i / (kMelBands + 1));
    Mat fbank = Mat::Zero(kMelBands, bins);
    for (int m = 0; m < kMelBands; ++m) {
        const double lo = edges[static_cast<std::size_t>(m)], mid = edges[static_cast<std::size_t>(m) + 1],
                     hi = edges[static_cast<std::size_t>(m) + 2];
        for (int b = 0; b < bins; ++b) {
            const double f = b * clip.sample_rate / cfg.window_size;
            if (f > lo && f < mid) fbank(m, b) = (f - lo) / (mid - lo);
            else if (f >= mid && f < hi) fbank(m, b) = (hi - f) / (hi - mid);
        }
    }

    Mat power(bins, frames);
    for (int t = 0; t < frames; ++t)
        for (int b = 0; b < bins; ++b) power(b, t) = std::norm(spec.values(b, t));
    Mat mel = (fbank * power).array().max(1e-10).log().matrix();

    Mat dct(kMfccCoeffs, kMelBands);
    for (int c = 0; c < kMfccCoeffs; ++c)
        for (int m = 0; m < kMelBands; ++m)
            dct(c, m) = std::cos(M_PI * c * (m + 0.5) / kMelBands);
    return dct * mel;
}

}  // namespace

std::vector<FeatureMatrix> beat_sync_features(const AudioClip& clip, const BeatGrid& beats, int block_beats) {
    clip.validate();
    if (block_beats < 1) throw ConfigError("beat_sync_features: block_beats must be >= 1");
    const int n_beats = static_cast<int>(beats.onsets.size()) - 1;
    if (n_beats < block_beats)
        throw ConfigError("beat_sync_features: " + std::to_string(n_beats) + " beat intervals, need >= " +
                          std::to_string(block_beats));

    Mat chroma = beat_aggregate(chroma_frames(clip), CqtConfig{}.frame_period(), beats.onsets);
    for (Eigen::Index i = 0; i < chroma.cols(); ++i) {
        const double norm = chroma.col(i).norm();
        if (norm > 0.0) chroma.col(i) /= norm;
    }
    Mat chroma_blocks = stack_blocks(chroma, block_beats);
    for (Eigen::Index r = 0; r < chroma_blocks.rows(); ++r) {
        const double norm = chroma_blocks.row(r).norm();
        if (norm > 0.0) chroma_blocks.row(r) /= norm;
    }

    Mat mfcc = beat_aggregate(mfcc_frames(clip), StftConfig{}.hop_size / clip.sample_rate, beats.onsets);
    for (Eigen::Index d = 0; d < mfcc.rows(); ++d) {
        const double mean = mfcc.row(d).mean();
        const double sd = std::sqrt((mfcc.row(d).array() - mean).square().mean());
        mfcc.row(d) = (mfcc.row(d).array() - mean) / (sd > 1e-12 ? sd : 1.0);
    }
    Mat mfcc_blocks = stack_blocks(mfcc, block_beats);

    std::vector<FeatureMatrix> out;
    out.push_back({"chroma", std::move(chroma_blocks)});
    out.push_back({"mfcc", std::move(mfcc_blocks)});
    return out;
}

}  // namespace coversynth::alignment
