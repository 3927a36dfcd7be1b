#pragma once

#include <map>
#include <string>

#include "coversynth/alignment.hpp"
#include "coversynth/musaicing.hpp"
#include "coversynth/nmf2d.hpp"

namespace coversynth::pipeline {

struct PipelineConfig {
    std::string song_a;
    std::string song_a_prime;
    std::string song_b;
    std::string output;

    nmf2d::Nmf2dConfig nmf;
    musaicing::MusaicConfig musaic;
    StftConfig stft;
    CqtConfig cqt;
    alignment::SyncOptions sync;

    double snippet_seconds = 20.0;
    double b_offset_seconds = -1.0;  // < 0: pick B's highest-onset-energy region
    bool blurry_baseline = false;    // invert the low-rank model instead of musaicing
    bool save_intermediates = false;
    std::string intermediates_dir;
    std::uint64_t rng_seed = 42;
    int threads = 1;

    void validate() const;
};

struct RunManifest {
    double tempo_a = 0.0, tempo_a_prime = 0.0, tempo_b = 0.0;
    double tempo_factor = 0.0;  // (t_B/t_A) * (t_A'/t_A)
    double alignment_score = 0.0;
    int alignment_path_length = 0;
    double a_start_seconds = 0.0, a_end_seconds = 0.0;
    double b_offset_seconds = 0.0;
    double snippet_seconds = 0.0;
    double joint_objective = 0.0;
    double fit_objective = 0.0;
    std::vector<double> musaic_final_kl;
    int output_samples = 0;
    double output_sample_rate = 0.0;
    std::uint64_t rng_seed = 0;
    std::map<std::string, double> stage_seconds;  // sidecar only, never in the JSON

    /// Deterministic JSON (no wall-clock content).
    std::string to_json(const PipelineConfig& cfg) const;
};

struct PipelineResult {
    AudioClip b_prime;
    RunManifest manifest;
};

/// Tempo-scale B by t_A/t_B (duration by t_B/t_A) so it matches A's grid.
AudioClip pre_scale_B(const AudioClip& b, double tempo_a, double tempo_b);

/// Scale the synthesized cover (at tempo t_A) back by (t_B/t_A)*(t_A'/t_A).
AudioClip post_scale_Bprime(const AudioClip& b_prime, double tempo_a, double tempo_a_prime, double tempo_b);

PipelineResult run_pipeline(const PipelineConfig& cfg);

}  // namespace coversynth::pipeline
