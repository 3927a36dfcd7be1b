#include "coversynth/musaicing.hpp"

#include <cmath>
#include <random>

#include "coversynth/nmf2d.hpp"
#include "coversynth/spectral.hpp"

namespace coversynth::musaicing {

GrainDictionary build_dictionary(const AudioClip& track, const StftConfig& cfg) {
    track.validate();
    if (track.empty()) throw ConfigError("build_dictionary: empty track");
    GrainDictionary dict;
    const auto base = spectral::stft(track, cfg);
    dict.block_frames = base.frames();

    dict.source.kind = TransformKind::Stft;
    dict.source.stft = cfg;
    dict.source.sample_rate = track.sample_rate;
    dict.source.source_samples = static_cast<int>(track.size());
    dict.source.values.resize(base.bins(), static_cast<Eigen::Index>(dict.blocks()) * base.frames());

    for (int shift = dict.min_shift; shift <= dict.max_shift; ++shift) {
        const Eigen::Index col0 = static_cast<Eigen::Index>(shift - dict.min_shift) * base.frames();
        if (shift == 0) {
            dict.source.values.middleCols(col0, base.frames()) = base.values;
            continue;
        }
        AudioClip shifted = spectral::pitch_shift(track, shift);
        shifted.samples.resize(track.size(), 0.0);  // identical frame grid across blocks
        const auto spec = spectral::stft(shifted, cfg);
        dict.source.values.middleCols(col0, base.frames()) = spec.values;
    }
    return dict;
}

namespace {

using MatF = MatT<float>;

MatF uniform_init(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    MatF h(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) h(r, c) = static_cast<float>(1.0 - 0.9 * dist(rng));
    return h;
}

}  // namespace

ComplexSpectrogram musaic_track(const GrainDictionary& dict_a, const GrainDictionary& dict_a_prime,
                                const ComplexSpectrogram& s_b, const MusaicConfig& cfg,
                                std::vector<double>* kl_log, Mat* final_h) {
    cfg.validate();
    if (dict_a.source.values.cols() != dict_a_prime.source.values.cols() ||
        dict_a.source.values.rows() != dict_a_prime.source.values.rows() ||
        dict_a.block_frames != dict_a_prime.block_frames || dict_a.min_shift != dict_a_prime.min_shift ||
        dict_a.max_shift != dict_a_prime.max_shift)
        throw ConfigError("musaic_track: dictionary pair is inconsistent");
    if (s_b.values.rows() != dict_a.source.values.rows())
        throw ConfigError("musaic_track: target bin count does not match the dictionaries");

    const Eigen::Index grains = dict_a.source.values.cols();
    const Eigen::Index n2 = s_b.values.cols();
    const MatF dict_mag = dict_a.source.values.cwiseAbs().cast<float>();
    const MatF target_mag = s_b.values.cwiseAbs().cast<float>();
    const float eps = static_cast<float>(cfg.epsilon);

    MatF h = uniform_init(grains, n2, cfg.rng_seed);
    for (int it = 0; it < cfg.iterations; ++it) {
        MatF r = restrict_repeats(h, cfg.repeat_radius, it, cfg.iterations);
        MatF p = restrict_polyphony(r, cfg.polyphony, it, cfg.iterations);
        MatF c = promote_continuity(p, cfg.continuity);
        // Driedger's schedule multiplies the KL ratio into the constrained
        // matrix, so the final iteration's hard selection survives.
        MatF wc(dict_mag.rows(), n2);
        wc.noalias() = dict_mag * c;
        if (kl_log) {
            double kl = 0.0;
            for (Eigen::Index col = 0; col < n2; ++col)
                for (Eigen::Index row = 0; row < target_mag.rows(); ++row) {
                    const double x = target_mag(row, col);
                    const double y = wc(row, col) + eps;
                    kl += (x > 0.0 ? x * std::log(x / y) - x : 0.0) + y;
                }
            kl_log->push_back(kl);
        }
        MatF ratio = (target_mag.array() / (wc.array() + eps)).matrix();
        MatF numer(grains, n2);
        numer.noalias() = dict_mag.transpose() * ratio;
        Eigen::ArrayXf denom = dict_mag.colwise().sum().transpose().array() + eps;
        h = c.cwiseProduct(numer);
        h.array().colwise() /= denom;
        if (!h.allFinite())
            throw StageError("musaic_track", "non-finite activation detected at iteration " + std::to_string(it));
    }

    if (final_h) *final_h = h.cast<double>();

    ComplexSpectrogram out;
    out.kind = TransformKind::Stft;
    out.stft = s_b.stft;
    out.sample_rate = s_b.sample_rate;
    out.source_samples = s_b.source_samples;
    const Mat hd = h.cast<double>();
    const Mat re = dict_a_prime.source.values.real() * hd;
    const Mat im = dict_a_prime.source.values.imag() * hd;
    out.values.resize(re.rows(), re.cols());
    out.values.real() = re;
    out.values.imag() = im;
    return out;
}

AudioClip mix_tracks(const std::vector<ComplexSpectrogram>& tracks, const StftConfig& cfg) {
    if (tracks.empty()) throw ConfigError("mix_tracks: no tracks");
    ComplexSpectrogram sum = tracks.front();
    for (std::size_t i = 1; i < tracks.size(); ++i) {
        if (tracks[i].values.rows() != sum.values.rows() || tracks[i].values.cols() != sum.values.cols())
            throw ConfigError("mix_tracks: track shapes differ");
        sum.values += tracks[i].values;
    }
    return spectral::istft(sum, cfg);
}

}  // namespace coversynth::musaicing
