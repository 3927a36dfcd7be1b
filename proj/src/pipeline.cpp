#include "coversynth/pipeline.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "coversynth/spectral.hpp"
#include "coversynth/tensor_io.hpp"
#include "coversynth/wav.hpp"

namespace coversynth::pipeline {

namespace fs = std::filesystem;

void PipelineConfig::validate() const {
    if (snippet_seconds <= 0.0) throw ConfigError("PipelineConfig: snippet_seconds must be positive");
    if (threads < 1) throw ConfigError("PipelineConfig: threads must be >= 1");
    stft.validate();
    cqt.validate();
    musaic.validate();
    if (nmf.components < 1 || nmf.iterations < 1 || nmf.time_lags < 1 || nmf.freq_shifts < 1)
        throw ConfigError("PipelineConfig: invalid factorization parameters");
    if (save_intermediates && intermediates_dir.empty())
        throw ConfigError("PipelineConfig: save_intermediates needs a directory");
}

namespace {

void check_tempo(double bpm, const char* which) {
    if (bpm < 40.0 || bpm > 240.0)
        throw ConfigError(std::string("tempo for ") + which + " is " + std::to_string(bpm) +
                          " bpm, outside [40, 240]");
}

double checked_stretch_factor(double factor) {
    if (factor < 0.25 || factor > 4.0)
        throw ConfigError("degenerate tempo ratio " + std::to_string(factor) + " outside [0.25, 4]");
    return factor;
}

class StageTimer {
  public:
    explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}
    template <typename F>
    auto run(const std::string& stage, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                sink_[stage] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                return;
            } else {
                auto result = f();
                sink_[stage] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                return result;
            }
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(stage, e.what());
        }
    }

  private:
    std::map<std::string, double>& sink_;
};

std::size_t pick_b_offset(const AudioClip& b, std::size_t snippet_len, double requested_seconds) {
    if (snippet_len >= b.size()) return 0;
    if (requested_seconds >= 0.0) {
        const auto off = static_cast<std::size_t>(std::llround(requested_seconds * b.sample_rate));
        return std::min(off, b.size() - snippet_len);
    }
    const Vec env = alignment::onset_envelope(b);
    const int hop = 256;
    const int win = static_cast<int>(snippet_len) / hop;
    if (win >= env.size()) return 0;
    double best = -1.0;
    int best_t = 0;
    double acc = env.head(win).sum();
    for (int t = 0; t + win <= env.size(); ++t) {
        if (acc > best) {
            best = acc;
            best_t = t;
        }
        if (t + win < env.size()) acc += env(t + win) - env(t);
    }
    return std::min(static_cast<std::size_t>(best_t) * hop, b.size() - snippet_len);
}

void write_text(const fs::path& path, const std::string& contents) {
    std::ofstream f(path);
    if (!f) throw StageError("save", "cannot open " + path.string());
    f << contents;
}

}  // namespace

AudioClip pre_scale_B(const AudioClip& b, double tempo_a, double tempo_b) {
    check_tempo(tempo_a, "A");
    check_tempo(tempo_b, "B");
    const double duration_factor = checked_stretch_factor(tempo_b / tempo_a);
    return spectral::time_stretch(b, duration_factor);
}

AudioClip post_scale_Bprime(const AudioClip& b_prime, double tempo_a, double tempo_a_prime, double tempo_b) {
    check_tempo(tempo_a, "A");
    check_tempo(tempo_a_prime, "A'");
    check_tempo(tempo_b, "B");
    const double tempo_multiplier = (tempo_b / tempo_a) * (tempo_a_prime / tempo_a);
    const double duration_factor = checked_stretch_factor(1.0 / tempo_multiplier);
    return spectral::time_stretch(b_prime, duration_factor);
}

std::string RunManifest::to_json(const PipelineConfig& cfg) const {
    nlohmann::json j;
    j["alignment"] = {{"a_end_seconds", a_end_seconds},
                      {"a_start_seconds", a_start_seconds},
                      {"path_length", alignment_path_length},
                      {"score", alignment_score}};
    j["b_offset_seconds"] = b_offset_seconds;
    j["config"] = {{"components", cfg.nmf.components},
                   {"time_lags", cfg.nmf.time_lags},
                   {"freq_shifts", cfg.nmf.freq_shifts},
                   {"nmf_iterations", cfg.nmf.iterations},
                   {"mask_exponent", cfg.nmf.mask_exponent},
                   {"pretrain_w1", cfg.nmf.pretrain_W1},
                   {"musaic_iterations", cfg.musaic.iterations},
                   {"repeat_radius", cfg.musaic.repeat_radius},
                   {"polyphony", cfg.musaic.polyphony},
                   {"continuity", cfg.musaic.continuity},
                   {"snippet_seconds", cfg.snippet_seconds},
                   {"blurry_baseline", cfg.blurry_baseline},
                   {"threads", cfg.threads}};
    j["objectives"] = {{"fit", fit_objective}, {"joint", joint_objective}, {"musaic_kl", musaic_final_kl}};
    j["output"] = {{"sample_rate", output_sample_rate}, {"samples", output_samples}};
    j["seed"] = rng_seed;
    j["snippet_seconds"] = snippet_seconds;
    j["tempo"] = {{"a", tempo_a}, {"a_prime", tempo_a_prime}, {"b", tempo_b}, {"factor", tempo_factor}};
    return j.dump(2) + "\n";
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    Eigen::setNbThreads(cfg.threads);

    PipelineResult result;
    RunManifest& man = result.manifest;
    man.rng_seed = cfg.rng_seed;
    man.snippet_seconds = cfg.snippet_seconds;
    StageTimer timer(man.stage_seconds);

    fs::path inter_dir;
    bool created_dir = false;
    if (cfg.save_intermediates) {
        inter_dir = cfg.intermediates_dir;
        created_dir = fs::create_directories(inter_dir);
    }
    auto cleanup = [&]() {
        std::error_code ec;
        if (!cfg.output.empty()) fs::remove(cfg.output, ec);
        if (cfg.save_intermediates && created_dir) fs::remove_all(inter_dir, ec);
    };

    try {
        const AudioClip a = timer.run("load", [&] { return load_audio_22k(cfg.song_a); });
        const AudioClip ap = timer.run("load", [&] { return load_audio_22k(cfg.song_a_prime); });
        const AudioClip b_full = timer.run("load", [&] { return load_audio_22k(cfg.song_b); });

        const auto beats_a = timer.run("beats", [&] { return alignment::track_beats(a); });
        const auto beats_ap = timer.run("beats", [&] { return alignment::track_beats(ap); });
        const auto beats_b = timer.run("beats", [&] { return alignment::track_beats(b_full); });
        man.tempo_a = beats_a.tempo_bpm;
        man.tempo_a_prime = beats_ap.tempo_bpm;
        man.tempo_b = beats_b.tempo_bpm;
        man.tempo_factor = (man.tempo_b / man.tempo_a) * (man.tempo_a_prime / man.tempo_a);

        // Synchronize A and A' on the fused, thresholded beat similarity.
        alignment::SyncOptions sync = cfg.sync;
        sync.target_seconds = cfg.snippet_seconds;
        const auto feats_a =
            timer.run("features", [&] { return alignment::beat_sync_features(a, beats_a, sync.block_beats); });
        const auto feats_ap =
            timer.run("features", [&] { return alignment::beat_sync_features(ap, beats_ap, sync.block_beats); });
        const Mat similarity =
            timer.run("fuse", [&] { return alignment::fuse_similarity(feats_a, feats_ap, sync.fusion); });
        const Mat thresholded = timer.run("threshold", [&] { return alignment::threshold_top(similarity); });
        const auto sw = timer.run("smith_waterman", [&] { return alignment::smith_waterman(thresholded); });
        if (sw.path.size() < 2) throw StageError("smith_waterman", "alignment path shorter than 2 pairs");
        man.alignment_score = sw.best_score;
        man.alignment_path_length = static_cast<int>(sw.path.size());
        const auto stretch = timer.run("stretch", [&] {
            return alignment::extract_and_stretch(a, ap, sw.path, beats_a, beats_ap, sync.target_seconds);
        });
        man.a_start_seconds = stretch.a_start_seconds;
        man.a_end_seconds = stretch.a_end_seconds;

        // Tempo-align B to A, then cut a snippet matched to the A snippet.
        const AudioClip b_scaled =
            timer.run("pre_scale", [&] { return pre_scale_B(b_full, man.tempo_a, man.tempo_b); });
        const std::size_t snip_len = stretch.snippet_a.size();
        AudioClip b_snip;
        b_snip.sample_rate = b_scaled.sample_rate;
        const std::size_t b_off = timer.run("b_snippet", [&] {
            return pick_b_offset(b_scaled, snip_len, cfg.b_offset_seconds);
        });
        man.b_offset_seconds = static_cast<double>(b_off) / b_scaled.sample_rate;
        {
            const std::size_t end = std::min(b_off + snip_len, b_scaled.size());
            b_snip.samples.assign(b_scaled.samples.begin() + static_cast<std::ptrdiff_t>(b_off),
                                  b_scaled.samples.begin() + static_cast<std::ptrdiff_t>(end));
            b_snip.samples.resize(snip_len, 0.0);
        }

        const auto cqt_a = timer.run("cqt", [&] { return spectral::cqt(stretch.snippet_a, cfg.cqt); });
        const auto cqt_ap = timer.run("cqt", [&] { return spectral::cqt(stretch.snippet_a_prime, cfg.cqt); });
        const auto cqt_b = timer.run("cqt", [&] { return spectral::cqt(b_snip, cfg.cqt); });

        nmf2d::Nmf2dConfig nmf_cfg = cfg.nmf;
        nmf_cfg.rng_seed = cfg.rng_seed;
        const auto joint = timer.run("factorize", [&] {
            return nmf2d::joint_factorize(cqt_a.values.cwiseAbs(), cqt_ap.values.cwiseAbs(), nmf_cfg);
        });
        man.joint_objective = joint.objective.empty() ? 0.0 : joint.objective.back();

        nmf2d::Nmf2dConfig fit_cfg = nmf_cfg;
        fit_cfg.rng_seed = cfg.rng_seed + 1;
        const auto fit = timer.run("fit", [&] {
            return nmf2d::fit_activations(cqt_b.values.cwiseAbs(), joint.W1, fit_cfg);
        });
        man.fit_objective = fit.objective.empty() ? 0.0 : fit.objective.back();

        const double p = cfg.nmf.mask_exponent;
        const auto tracks_a = timer.run("filter", [&] {
            return nmf2d::soft_mask_filter(cqt_a, joint.W1, joint.H1, p, nmf_cfg.epsilon);
        });
        const auto tracks_ap = timer.run("filter", [&] {
            return nmf2d::soft_mask_filter(cqt_ap, joint.W2, joint.H1, p, nmf_cfg.epsilon);
        });
        const auto tracks_b = timer.run("filter", [&] {
            return nmf2d::soft_mask_filter(cqt_b, joint.W1, fit.H, p, nmf_cfg.epsilon);
        });

        const int K = cfg.nmf.components;
        std::vector<AudioClip> audio_a(static_cast<std::size_t>(K)), audio_ap(static_cast<std::size_t>(K)),
            audio_b(static_cast<std::size_t>(K));
        timer.run("invert", [&] {
            for (int k = 0; k < K; ++k) {
                audio_a[static_cast<std::size_t>(k)] = spectral::icqt(tracks_a[static_cast<std::size_t>(k)], cfg.cqt);
                audio_ap[static_cast<std::size_t>(k)] = spectral::icqt(tracks_ap[static_cast<std::size_t>(k)], cfg.cqt);
                audio_b[static_cast<std::size_t>(k)] = spectral::icqt(tracks_b[static_cast<std::size_t>(k)], cfg.cqt);
            }
        });

        AudioClip b_prime_at_ta;
        std::vector<Mat> musaic_h(static_cast<std::size_t>(K));
        std::vector<std::vector<double>> musaic_logs(static_cast<std::size_t>(K));
        if (cfg.blurry_baseline) {
            // The rejected low-rank baseline: invert the model magnitudes
            // with Griffin-Lim phases instead of re-using grains.
            b_prime_at_ta = timer.run("blurry_baseline", [&] {
                MagnitudeSpectrogram mag;
                mag.kind = TransformKind::Cqt;
                mag.cqt = cfg.cqt;
                mag.sample_rate = b_snip.sample_rate;
                mag.source_samples = static_cast<int>(b_snip.size());
                mag.values = nmf2d::reconstruct(joint.W2, fit.H);
                return spectral::griffin_lim(mag, 100);
            });
        } else {
            std::vector<ComplexSpectrogram> synth(static_cast<std::size_t>(K));
            for (int k = 0; k < K; ++k) {
                const auto kk = static_cast<std::size_t>(k);
                timer.run("musaic", [&] {
                    const auto dict_a = musaicing::build_dictionary(audio_a[kk], cfg.stft);
                    const auto dict_ap = musaicing::build_dictionary(audio_ap[kk], cfg.stft);
                    const auto s_b = spectral::stft(audio_b[kk], cfg.stft);
                    musaicing::MusaicConfig mcfg = cfg.musaic;
                    mcfg.rng_seed = cfg.rng_seed + 100 + static_cast<std::uint64_t>(k);
                    synth[kk] = musaicing::musaic_track(dict_a, dict_ap, s_b, mcfg,
                                                        cfg.save_intermediates ? &musaic_logs[kk] : nullptr,
                                                        cfg.save_intermediates ? &musaic_h[kk] : nullptr);
                    if (!musaic_logs[kk].empty()) man.musaic_final_kl.push_back(musaic_logs[kk].back());
                });
            }
            b_prime_at_ta = timer.run("mix", [&] { return musaicing::mix_tracks(synth, cfg.stft); });
        }

        result.b_prime = timer.run("post_scale", [&] {
            return post_scale_Bprime(b_prime_at_ta, man.tempo_a, man.tempo_a_prime, man.tempo_b);
        });
        man.output_samples = static_cast<int>(result.b_prime.size());
        man.output_sample_rate = result.b_prime.sample_rate;

        timer.run("save", [&] {
            if (!cfg.output.empty()) {
                wav_write(cfg.output, result.b_prime, WavFormat::Float32);
                write_text(fs::path(cfg.output).replace_extension(".manifest.json"), man.to_json(cfg));
            }
            if (!cfg.save_intermediates) return;
            dump_tensor(tensor_from_templates(joint.W1), (inter_dir / "W1.cstn").string());
            dump_tensor(tensor_from_templates(joint.W2), (inter_dir / "W2.cstn").string());
            dump_tensor(tensor_from_activations(joint.H1), (inter_dir / "H1.cstn").string());
            dump_tensor(tensor_from_activations(fit.H), (inter_dir / "H2.cstn").string());
            dump_tensor(tensor_from_matrix(similarity), (inter_dir / "similarity.cstn").string());
            for (int k = 0; k < K; ++k) {
                const auto kk = static_cast<std::size_t>(k);
                const std::string suffix = std::to_string(k) + ".wav";
                wav_write((inter_dir / ("track_a_" + suffix)).string(), audio_a[kk]);
                wav_write((inter_dir / ("track_aprime_" + suffix)).string(), audio_ap[kk]);
                wav_write((inter_dir / ("track_b_" + suffix)).string(), audio_b[kk]);
                if (!cfg.blurry_baseline) {
                    dump_tensor(tensor_from_matrix(musaic_h[kk]),
                                (inter_dir / ("musaic_h_" + std::to_string(k) + ".cstn")).string());
                    std::string log;
                    for (std::size_t i = 0; i < musaic_logs[kk].size(); ++i)
                        log += std::to_string(i) + " " + std::to_string(musaic_logs[kk][i]) + "\n";
                    write_text(inter_dir / ("musaic_kl_" + std::to_string(k) + ".txt"), log);
                }
            }
            std::string path_txt;
            for (const auto& [i, jj] : sw.path)
                path_txt += std::to_string(i) + " " + std::to_string(jj) + " " +
                            std::to_string(beats_a.onsets[static_cast<std::size_t>(i)]) + " " +
                            std::to_string(beats_ap.onsets[static_cast<std::size_t>(jj)]) + "\n";
            write_text(inter_dir / "alignment_path.txt", path_txt);
            std::string conv;
            for (std::size_t i = 0; i < joint.objective.size(); ++i)
                conv += std::to_string(i) + " " + std::to_string(joint.objective[i]) + "\n";
            write_text(inter_dir / "nmf_convergence.txt", conv);
            std::string fit_conv;
            for (std::size_t i = 0; i < fit.objective.size(); ++i)
                fit_conv += std::to_string(i) + " " + std::to_string(fit.objective[i]) + "\n";
            write_text(inter_dir / "fit_convergence.txt", fit_conv);
            nlohmann::json timings;
            for (const auto& [stage, secs] : man.stage_seconds) timings[stage] = secs;
            write_text(inter_dir / "timings.json", timings.dump(2) + "\n");
        });
    } catch (...) {
        cleanup();
        throw;
    }
    return result;
}

}  // namespace coversynth::pipeline
