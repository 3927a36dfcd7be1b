#include "coversynth/beats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coversynth/errors.hpp"
#include "coversynth/spectral.hpp"

namespace coversynth::alignment {

namespace {

constexpr int kEnvelopeHop = 256;
constexpr int kEnvelopeWindow = 1024;
constexpr double kTempoPriorBpm = 120.0;
constexpr double kTempoPriorWidth = 1.0;  // octaves
constexpr double kTightness = 680.0;

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    double hi = v[v.size() / 2];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2 - 1), v.end());
    return 0.5 * (hi + v[v.size() / 2 - 1]);
}

}  // namespace

Vec onset_envelope(const AudioClip& clip) {
    StftConfig cfg;
    cfg.window_size = kEnvelopeWindow;
    cfg.hop_size = kEnvelopeHop;
    const auto spec = spectral::stft(clip, cfg);
    const int frames = spec.frames();
    const int bins = spec.bins();

    Vec flux = Vec::Zero(frames);
    for (int t = 1; t < frames; ++t) {
        double acc = 0.0;
        for (int b = 0; b < bins; ++b) {
            const double cur = std::log1p(1000.0 * std::abs(spec.values(b, t)));
            const double prev = std::log1p(1000.0 * std::abs(spec.values(b, t - 1)));
            if (cur > prev) acc += cur - prev;
        }
        flux(t) = acc;
    }

    // Subtract a ~1 s moving average so sustained energy does not read as
    // onsets, then rectify.
    const int half_avg = static_cast<int>(0.5 * clip.sample_rate / kEnvelopeHop);
    Vec env(frames);
    for (int t = 0; t < frames; ++t) {
        const int lo = std::max(0, t - half_avg);
        const int hi = std::min(frames - 1, t + half_avg);
        const double mean = flux.segment(lo, hi - lo + 1).mean();
        env(t) = std::max(0.0, flux(t) - mean);
    }
    const double sd = std::sqrt(env.array().square().mean());
    if (sd > 0.0) env /= sd;
    return env;
}

BeatGrid track_beats(const AudioClip& clip) {
    clip.validate();
    if (clip.duration() < 5.0)
        throw ConfigError("track_beats: need at least 5 s of audio, got " +
                          std::to_string(clip.duration()) + " s");
    const double frame_rate = clip.sample_rate / kEnvelopeHop;
    const Vec env = onset_envelope(clip);
    const int frames = static_cast<int>(env.size());
    if (env.maxCoeff() <= 0.0) throw StageError("track_beats", "no beats: onset envelope is silent");

    // Global period from the prior-weighted autocorrelation, 40..240 bpm.
    const int lag_min = std::max(1, static_cast<int>(std::floor(60.0 / 240.0 * frame_rate)));
    const int lag_max = std::min(frames - 1, static_cast<int>(std::ceil(60.0 / 40.0 * frame_rate)));
    if (lag_max <= lag_min) throw StageError("track_beats", "clip too short for tempo search");
    int period = lag_min;
    double best = -1.0;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
        double acf = 0.0;
        for (int t = 0; t + lag < frames; ++t) acf += env(t) * env(t + lag);
        const double octaves = std::log2(lag / (frame_rate * 60.0 / kTempoPriorBpm));
        const double w = std::exp(-0.5 * octaves * octaves / (kTempoPriorWidth * kTempoPriorWidth));
        if (acf * w > best) {
            best = acf * w;
            period = lag;
        }
    }

    // DP over beat positions: env reward plus log-squared interval penalty.
    Vec score(frames);
    std::vector<int> pred(static_cast<std::size_t>(frames), -1);
    const int tau_lo = std::max(1, period / 2);
    const int tau_hi = std::min(frames - 1, 2 * period);
    for (int t = 0; t < frames; ++t) {
        double best_prev = 0.0;
        int best_tau = -1;
        for (int tau = tau_lo; tau <= tau_hi && tau <= t; ++tau) {
            const double dev = std::log(static_cast<double>(tau) / period);
            const double cand = score(t - tau) - kTightness * dev * dev;
            if (cand > best_prev) {
                best_prev = cand;
                best_tau = tau;
            }
        }
        score(t) = env(t) + best_prev;
        if (best_tau > 0) pred[static_cast<std::size_t>(t)] = t - best_tau;
    }

    int end = frames - 1;
    for (int t = std::max(0, frames - 2 * period); t < frames; ++t)
        if (score(t) > score(end)) end = t;

    std::vector<int> beat_frames;
    for (int t = end; t >= 0; t = pred[static_cast<std::size_t>(t)]) {
        beat_frames.push_back(t);
        if (pred[static_cast<std::size_t>(t)] < 0) break;
    }
    std::reverse(beat_frames.begin(), beat_frames.end());
    if (beat_frames.size() < 2) throw StageError("track_beats", "no beats: tracker produced fewer than 2 beats");

    BeatGrid grid;
    grid.onsets.reserve(beat_frames.size());
    for (int t : beat_frames) grid.onsets.push_back(t / frame_rate);

    std::vector<double> intervals(grid.onsets.size() - 1);
    for (std::size_t i = 0; i + 1 < grid.onsets.size(); ++i) intervals[i] = grid.onsets[i + 1] - grid.onsets[i];
    grid.tempo_bpm = 60.0 / median_of(intervals);
    if (grid.tempo_bpm < 40.0 || grid.tempo_bpm > 240.0)
        throw StageError("track_beats", "estimated tempo " + std::to_string(grid.tempo_bpm) +
                                            " bpm outside [40, 240]");
    return grid;
}

}  // namespace coversynth::alignment
