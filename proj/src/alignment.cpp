#include "coversynth/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coversynth/errors.hpp"
#include "coversynth/spectral.hpp"

namespace coversynth::alignment {

namespace {

constexpr double kMatch = 2.0;
constexpr double kMismatch = -3.0;
constexpr double kGap = -2.0;

}  // namespace

Mat threshold_top(const Mat& similarity) {
    if ((similarity.array() < 0.0).any()) throw ConfigError("threshold_top: similarities must be nonnegative");
    const int m = static_cast<int>(similarity.rows());
    const int n = static_cast<int>(similarity.cols());
    const long long cells = static_cast<long long>(m) * n;
    const long long keep = std::min<long long>(std::llround(3.0 * std::sqrt(static_cast<double>(cells))), cells);

    std::vector<long long> order(static_cast<std::size_t>(cells));
    std::iota(order.begin(), order.end(), 0LL);
    auto value_of = [&](long long idx) { return similarity(static_cast<int>(idx / n), static_cast<int>(idx % n)); };
    std::stable_sort(order.begin(), order.end(), [&](long long a, long long b) {
        const double va = value_of(a), vb = value_of(b);
        if (va != vb) return va > vb;
        return a < b;  // ties in row-major order
    });

    Mat out = Mat::Zero(m, n);
    for (long long i = 0; i < keep; ++i) {
        const long long idx = order[static_cast<std::size_t>(i)];
        out(static_cast<int>(idx / n), static_cast<int>(idx % n)) = 1.0;
    }
    return out;
}

SwResult smith_waterman(const Mat& binary) {
    const int m = static_cast<int>(binary.rows());
    const int n = static_cast<int>(binary.cols());
    for (Eigen::Index c = 0; c < binary.cols(); ++c)
        for (Eigen::Index r = 0; r < binary.rows(); ++r)
            if (binary(r, c) != 0.0 && binary(r, c) != 1.0)
                throw ConfigError("smith_waterman: matrix must be binary");

    SwResult res;
    res.score = Mat::Zero(m, n);
    // Move encodings: 0 = fresh start, 1 = (1,1), 2 = (2,1), 3 = (1,2).
    Eigen::MatrixXi move = Eigen::MatrixXi::Zero(m, n);
    int best_i = 0, best_j = 0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            const double gain = binary(i, j) == 1.0 ? kMatch : kMismatch;
            double prev = 0.0;
            int mv = 0;
            if (i >= 1 && j >= 1 && res.score(i - 1, j - 1) > prev) {
                prev = res.score(i - 1, j - 1);
                mv = 1;
            }
            if (i >= 2 && j >= 1 && res.score(i - 2, j - 1) + kGap > prev) {
                prev = res.score(i - 2, j - 1) + kGap;
                mv = 2;
            }
            if (i >= 1 && j >= 2 && res.score(i - 1, j - 2) + kGap > prev) {
                prev = res.score(i - 1, j - 2) + kGap;
                mv = 3;
            }
            const double total = gain + prev;
            if (total > 0.0) {
                res.score(i, j) = total;
                move(i, j) = mv;
            }
            if (res.score(i, j) > res.score(best_i, best_j)) {
                best_i = i;
                best_j = j;
            }
        }
    }
    res.best_score = res.score(best_i, best_j);
    if (res.best_score <= 0.0) return res;  // all-zero input: empty path

    int i = best_i, j = best_j;
    while (true) {
        res.path.emplace_back(i, j);
        const int mv = move(i, j);
        if (mv == 0) break;
        if (mv == 1) { i -= 1; j -= 1; }
        else if (mv == 2) { i -= 2; j -= 1; }
        else { i -= 1; j -= 2; }
    }
    std::reverse(res.path.begin(), res.path.end());
    return res;
}

namespace {

// Path-derived alignment score over pairs [a, b): +2 per pair, -2 per
// skipped index step.
double window_score(const std::vector<std::pair<int, int>>& path, std::size_t a, std::size_t b) {
    double s = kMatch;
    for (std::size_t i = a + 1; i < b; ++i) {
        const int di = path[i].first - path[i - 1].first;
        const int dj = path[i].second - path[i - 1].second;
        s += kMatch + kGap * ((di - 1) + (dj - 1));
    }
    return s;
}

}  // namespace

StretchResult extract_and_stretch(const AudioClip& a, const AudioClip& a_prime,
                                  const std::vector<std::pair<int, int>>& path, const BeatGrid& beats_a,
                                  const BeatGrid& beats_a_prime, double target_seconds) {
    if (path.size() < 2) throw ConfigError("extract_and_stretch: path must contain at least 2 pairs");
    for (const auto& [i, j] : path) {
        if (i < 0 || static_cast<std::size_t>(i) >= beats_a.onsets.size() || j < 0 ||
            static_cast<std::size_t>(j) >= beats_a_prime.onsets.size())
            throw ConfigError("extract_and_stretch: path index outside the beat grids");
    }
    const auto& ta = beats_a.onsets;
    const auto& sa = beats_a_prime.onsets;

    // Candidate windows: per start, the bracketing pair around the target
    // duration. Prefer |duration - target| (1 s slack), then score density,
    // then the earliest start.
    struct Candidate {
        std::size_t a, b;
        double dev, density;
    };
    std::vector<Candidate> cands;
    for (std::size_t s = 0; s + 1 < path.size(); ++s) {
        std::size_t e = s + 1;
        while (e + 1 < path.size() &&
               ta[static_cast<std::size_t>(path[e].first)] - ta[static_cast<std::size_t>(path[s].first)] < target_seconds)
            ++e;
        for (std::size_t cand_e : {e, e > s + 1 ? e - 1 : e}) {
            const double dur = ta[static_cast<std::size_t>(path[cand_e].first)] - ta[static_cast<std::size_t>(path[s].first)];
            if (dur <= 0.0) continue;
            cands.push_back({s, cand_e, std::abs(dur - target_seconds),
                             window_score(path, s, cand_e + 1) / dur});
        }
    }
    if (cands.empty()) throw ConfigError("extract_and_stretch: no usable window on the path");
    double best_dev = cands[0].dev;
    for (const auto& c : cands) best_dev = std::min(best_dev, c.dev);
    const Candidate* pick = nullptr;
    for (const auto& c : cands) {
        if (c.dev > best_dev + 1.0) continue;
        if (!pick || c.density > pick->density + 1e-12) pick = &c;
    }

    StretchResult out;
    out.window_begin = pick->a;
    out.window_end = pick->b + 1;
    const double fs = a.sample_rate;

    const auto sample_at = [&](const AudioClip& clip, double seconds) {
        return std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(seconds * fs)), 0, clip.size());
    };

    out.a_start_seconds = ta[static_cast<std::size_t>(path[pick->a].first)];
    out.a_end_seconds = ta[static_cast<std::size_t>(path[pick->b].first)];
    const std::size_t a0 = sample_at(a, out.a_start_seconds);
    const std::size_t a1 = sample_at(a, out.a_end_seconds);
    out.snippet_a.sample_rate = fs;
    out.snippet_a.samples.assign(a.samples.begin() + static_cast<std::ptrdiff_t>(a0),
                                 a.samples.begin() + static_cast<std::ptrdiff_t>(a1));

    out.snippet_a_prime.sample_rate = fs;
    for (std::size_t w = pick->a; w < pick->b; ++w) {
        const auto [i0, j0] = path[w];
        const auto [i1, j1] = path[w + 1];
        const std::size_t dst_len = sample_at(a, ta[static_cast<std::size_t>(i1)]) - sample_at(a, ta[static_cast<std::size_t>(i0)]);
        const std::size_t src0 = sample_at(a_prime, sa[static_cast<std::size_t>(j0)]);
        const std::size_t src1 = sample_at(a_prime, sa[static_cast<std::size_t>(j1)]);
        if (src1 <= src0 || dst_len == 0) {
            out.stretch_factors.push_back(1.0);
            out.snippet_a_prime.samples.resize(out.snippet_a_prime.samples.size() + dst_len, 0.0);
            continue;
        }
        AudioClip seg;
        seg.sample_rate = fs;
        seg.samples.assign(a_prime.samples.begin() + static_cast<std::ptrdiff_t>(src0),
                           a_prime.samples.begin() + static_cast<std::ptrdiff_t>(src1));
        const double factor = static_cast<double>(dst_len) / static_cast<double>(seg.size());
        out.stretch_factors.push_back(factor);
        AudioClip stretched = spectral::time_stretch(seg, std::clamp(factor, 0.25, 4.0));
        stretched.samples.resize(dst_len, 0.0);
        out.snippet_a_prime.samples.insert(out.snippet_a_prime.samples.end(), stretched.samples.begin(),
                                           stretched.samples.end());
    }
    return out;
}

SyncResult synchronize(const AudioClip& a, const AudioClip& a_prime, const SyncOptions& opts) {
    SyncResult res;
    res.beats_a = track_beats(a);
    res.beats_a_prime = track_beats(a_prime);
    const auto feats_a = beat_sync_features(a, res.beats_a, opts.block_beats);
    const auto feats_ap = beat_sync_features(a_prime, res.beats_a_prime, opts.block_beats);
    res.similarity = fuse_similarity(feats_a, feats_ap, opts.fusion);
    res.thresholded = threshold_top(res.similarity);
    res.alignment = smith_waterman(res.thresholded);
    if (res.alignment.path.size() < 2)
        throw StageError("synchronize", "alignment produced fewer than 2 matched beats");
    // Block index == index of the block's first beat, so path indices map
    // straight onto the beat grids.
    res.stretch = extract_and_stretch(a, a_prime, res.alignment.path, res.beats_a, res.beats_a_prime,
                                      opts.target_seconds);
    return res;
}

}  // namespace coversynth::alignment
