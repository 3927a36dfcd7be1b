#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "coversynth/pipeline.hpp"
#include "coversynth/spectral.hpp"
#include "coversynth/tensor_io.hpp"
#include "coversynth/wav.hpp"

namespace {

using namespace coversynth;

int cmd_run(const pipeline::PipelineConfig& cfg) {
    auto result = pipeline::run_pipeline(cfg);
    std::fprintf(stderr, "wrote %s (%zu samples, tempo factor %.4f)\n", cfg.output.c_str(),
                 result.b_prime.size(), result.manifest.tempo_factor);
    return 0;
}

struct AlignArgs {
    std::string song_a, song_a_prime, out_path, out_similarity;
    double snippet_seconds = 20.0;
    int block_beats = 20;
};

int cmd_align(const AlignArgs& args) {
    const AudioClip a = load_audio_22k(args.song_a);
    const AudioClip ap = load_audio_22k(args.song_a_prime);
    alignment::SyncOptions opts;
    opts.target_seconds = args.snippet_seconds;
    opts.block_beats = args.block_beats;
    const auto sync = alignment::synchronize(a, ap, opts);

    std::ofstream f(args.out_path);
    if (!f) throw ConfigError("align: cannot open " + args.out_path);
    for (const auto& [i, j] : sync.alignment.path)
        f << i << " " << j << " " << sync.beats_a.onsets[static_cast<std::size_t>(i)] << " "
          << sync.beats_a_prime.onsets[static_cast<std::size_t>(j)] << "\n";
    if (!args.out_similarity.empty()) dump_tensor(tensor_from_matrix(sync.similarity), args.out_similarity);
    std::fprintf(stderr, "alignment score %.1f over %zu pairs\n", sync.alignment.best_score,
                 sync.alignment.path.size());
    return 0;
}

struct FactorizeArgs {
    std::string song_a, song_a_prime, out_dir;
    nmf2d::Nmf2dConfig nmf;
    double snippet_seconds = 20.0;
    bool skip_align = false;
};

int cmd_factorize(const FactorizeArgs& args) {
    namespace fs = std::filesystem;
    AudioClip a = load_audio_22k(args.song_a);
    AudioClip ap = load_audio_22k(args.song_a_prime);
    if (!args.skip_align) {
        alignment::SyncOptions opts;
        opts.target_seconds = args.snippet_seconds;
        auto sync = alignment::synchronize(a, ap, opts);
        a = std::move(sync.stretch.snippet_a);
        ap = std::move(sync.stretch.snippet_a_prime);
    } else if (ap.size() != a.size()) {
        ap.samples.resize(a.size(), 0.0);
    }
    CqtConfig cqt_cfg;
    const auto ca = spectral::cqt(a, cqt_cfg, false);
    const auto cap = spectral::cqt(ap, cqt_cfg, false);
    const auto joint = nmf2d::joint_factorize(ca.values.cwiseAbs(), cap.values.cwiseAbs(), args.nmf);

    fs::create_directories(args.out_dir);
    dump_tensor(tensor_from_templates(joint.W1), (fs::path(args.out_dir) / "W1.cstn").string());
    dump_tensor(tensor_from_templates(joint.W2), (fs::path(args.out_dir) / "W2.cstn").string());
    dump_tensor(tensor_from_activations(joint.H1), (fs::path(args.out_dir) / "H1.cstn").string());
    std::ofstream conv(fs::path(args.out_dir) / "nmf_convergence.txt");
    for (std::size_t i = 0; i < joint.objective.size(); ++i) conv << i << " " << joint.objective[i] << "\n";
    std::fprintf(stderr, "final joint objective %.6g\n", joint.objective.back());
    return 0;
}

struct MusaicArgs {
    std::string track_a, track_a_prime, track_b, output, dump_h;
    musaicing::MusaicConfig cfg;
};

int cmd_musaic(const MusaicArgs& args) {
    const AudioClip a = load_audio_22k(args.track_a);
    const AudioClip ap = load_audio_22k(args.track_a_prime);
    const AudioClip b = load_audio_22k(args.track_b);
    StftConfig stft_cfg;
    const auto dict_a = musaicing::build_dictionary(a, stft_cfg);
    const auto dict_ap = musaicing::build_dictionary(ap, stft_cfg);
    const auto s_b = spectral::stft(b, stft_cfg);
    Mat h;
    const auto synth = musaicing::musaic_track(dict_a, dict_ap, s_b, args.cfg, nullptr,
                                               args.dump_h.empty() ? nullptr : &h);
    wav_write(args.output, spectral::istft(synth, stft_cfg));
    if (!args.dump_h.empty()) dump_tensor(tensor_from_matrix(h), args.dump_h);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cover-song style transfer: synthesize B' from a cover pair (A, A') and a song B"};
    app.require_subcommand(1);

    pipeline::PipelineConfig run_cfg;
    auto* run = app.add_subcommand("run", "Run the full synthesis pipeline");
    run->add_option("--song-a", run_cfg.song_a, "Song A (artist 1)")->required();
    run->add_option("--song-a-prime", run_cfg.song_a_prime, "Cover A' of A (artist 2)")->required();
    run->add_option("--song-b", run_cfg.song_b, "Song B (artist 1)")->required();
    run->add_option("--out", run_cfg.output, "Output WAV for B'")->required();
    run->add_option("--components", run_cfg.nmf.components, "Number of sources K");
    run->add_option("--freq-shifts", run_cfg.nmf.freq_shifts, "Frequency shifts F");
    run->add_option("--time-lags", run_cfg.nmf.time_lags, "Time lags T");
    run->add_option("--iters", run_cfg.nmf.iterations, "Factorization sweeps");
    run->add_option("--musaic-iters", run_cfg.musaic.iterations, "Musaicing iterations L");
    run->add_option("--snippet-seconds", run_cfg.snippet_seconds, "Synchronized snippet length");
    run->add_option("--b-offset", run_cfg.b_offset_seconds, "Offset into B (seconds; default: densest onsets)");
    run->add_flag("--pretrain-w1", run_cfg.nmf.pretrain_W1, "Factorize A alone first, then hold W1 fixed");
    run->add_flag("--blurry-baseline", run_cfg.blurry_baseline,
                  "Invert the low-rank model with Griffin-Lim instead of musaicing");
    std::string inter_dir;
    run->add_option("--save-intermediates", inter_dir, "Directory for intermediate artifacts");
    run->add_option("--seed", run_cfg.rng_seed, "RNG seed");
    run->add_option("--threads", run_cfg.threads, "Internal parallelism cap (1 = bitwise deterministic)");

    AlignArgs align_args;
    auto* align = app.add_subcommand("align", "Emit the alignment path and similarity matrix only");
    align->add_option("--song-a", align_args.song_a)->required();
    align->add_option("--song-a-prime", align_args.song_a_prime)->required();
    align->add_option("--out-path", align_args.out_path, "Path file (rows: i j t_i s_j)")->required();
    align->add_option("--out-similarity", align_args.out_similarity, "Similarity matrix (CSTN)");
    align->add_option("--snippet-seconds", align_args.snippet_seconds);
    align->add_option("--block-beats", align_args.block_beats);

    FactorizeArgs fact_args;
    auto* fact = app.add_subcommand("factorize", "Emit W1/W2/H1 tensors only");
    fact->add_option("--song-a", fact_args.song_a)->required();
    fact->add_option("--song-a-prime", fact_args.song_a_prime)->required();
    fact->add_option("--out-dir", fact_args.out_dir)->required();
    fact->add_option("--components", fact_args.nmf.components);
    fact->add_option("--freq-shifts", fact_args.nmf.freq_shifts);
    fact->add_option("--time-lags", fact_args.nmf.time_lags);
    fact->add_option("--iters", fact_args.nmf.iterations);
    fact->add_option("--seed", fact_args.nmf.rng_seed);
    fact->add_option("--snippet-seconds", fact_args.snippet_seconds);
    fact->add_flag("--pretrain-w1", fact_args.nmf.pretrain_W1);
    fact->add_flag("--skip-align", fact_args.skip_align, "Inputs are already synchronized");

    MusaicArgs mus_args;
    auto* mus = app.add_subcommand("musaic", "Musaic one track: grains from A, dictionary swap to A'");
    mus->add_option("--track-a", mus_args.track_a)->required();
    mus->add_option("--track-a-prime", mus_args.track_a_prime)->required();
    mus->add_option("--track-b", mus_args.track_b)->required();
    mus->add_option("--out", mus_args.output)->required();
    mus->add_option("--musaic-iters", mus_args.cfg.iterations);
    mus->add_option("--seed", mus_args.cfg.rng_seed);
    mus->add_option("--dump-h", mus_args.dump_h, "Write final activations (CSTN)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // bad flags are a config problem
    }

    try {
        if (*run) {
            if (!inter_dir.empty()) {
                run_cfg.save_intermediates = true;
                run_cfg.intermediates_dir = inter_dir;
            }
            return cmd_run(run_cfg);
        }
        if (*align) return cmd_align(align_args);
        if (*fact) return cmd_factorize(fact_args);
        if (*mus) return cmd_musaic(mus_args);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
