#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>

namespace coversynth {

using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXd;

struct StftConfig {
    int window_size = 2048;
    int hop_size = 256;
    enum class Window { Hann } window = Window::Hann;

    int bins() const { return window_size / 2 + 1; }
    /// 0 < hop <= window and constant-overlap-add at this hop.
    void validate() const;
};

struct CqtConfig {
    int bins_per_octave = 24;
    double f_min = 50.0;
    double f_max = 11700.0;
    double sample_rate = 22050.0;
    // Output frame hop in samples; 144 @ 22050 Hz = 6.53 ms, so 20 lags span
    // ~131 ms of audio.
    int frame_hop = 144;

    int total_bins() const {
        return static_cast<int>(std::ceil(bins_per_octave * std::log2(f_max / f_min)));
    }
    double bin_frequency(int k) const { return f_min * std::pow(2.0, static_cast<double>(k) / bins_per_octave); }
    double frame_period() const { return frame_hop / sample_rate; }
    void validate() const;
};

enum class TransformKind { Stft, Cqt };

// High-rate subband coefficients kept alongside the public (downsampled)
// CQT matrix so the transform stays numerically invertible. Row 0 is a
// lowpass residual band, rows 1..B the CQT bins, row B+1 a highpass
// residual. Not part of any exchange format.
struct CqtPayload {
    CMat fine;        // (total_bins + 2) x internal_frames
    CMat coarse_ref;  // the public matrix as originally derived from `fine`
    int internal_hop = 0;
    int decimation = 0;
    int padded_len = 0;
};

struct ComplexSpectrogram {
    CMat values;  // rows = frequency bins, cols = time frames
    TransformKind kind = TransformKind::Stft;
    StftConfig stft;
    CqtConfig cqt;
    double sample_rate = 22050.0;
    int source_samples = 0;
    std::shared_ptr<const CqtPayload> payload;

    int bins() const { return static_cast<int>(values.rows()); }
    int frames() const { return static_cast<int>(values.cols()); }
};

struct MagnitudeSpectrogram {
    Mat values;
    TransformKind kind = TransformKind::Stft;
    StftConfig stft;
    CqtConfig cqt;
    double sample_rate = 22050.0;
    int source_samples = 0;
};

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec);

}  // namespace coversynth
