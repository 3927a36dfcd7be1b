#pragma once

#include <cstdint>
#include <vector>

#include "coversynth/spectra.hpp"

namespace coversynth::nmf2d {

/// K spectral templates of M frequency bins x T time lags, stored as one
/// M x K matrix per lag.
struct TemplateTensor {
    std::vector<Mat> lags;

    int rows() const { return lags.empty() ? 0 : static_cast<int>(lags[0].rows()); }
    int components() const { return lags.empty() ? 0 : static_cast<int>(lags[0].cols()); }
    int lag_count() const { return static_cast<int>(lags.size()); }
    double at(int m, int k, int tau) const { return lags[static_cast<std::size_t>(tau)](m, k); }
};

/// K activation maps of N frames x F frequency shifts, stored as one K x N
/// matrix per shift.
struct ActivationTensor {
    std::vector<Mat> shifts;

    int components() const { return shifts.empty() ? 0 : static_cast<int>(shifts[0].rows()); }
    int frames() const { return shifts.empty() ? 0 : static_cast<int>(shifts[0].cols()); }
    int shift_count() const { return static_cast<int>(shifts.size()); }
    double at(int k, int n, int phi) const { return shifts[static_cast<std::size_t>(phi)](k, n); }
};

struct Nmf2dConfig {
    int components = 3;     // K
    int time_lags = 20;     // T
    int freq_shifts = 14;   // F
    int iterations = 300;
    double mask_exponent = 2.0;
    double epsilon = 1e-10;
    std::uint64_t rng_seed = 0;
    bool pretrain_W1 = false;

    void validate(int rows, int frames) const;
};

// Shift operators: vacated rows/columns are zero-filled, the input is left
// untouched. Shifts above the corresponding dimension are an error.
Mat shift_down(const Mat& x, int amount);
Mat shift_up(const Mat& x, int amount);
Mat shift_right(const Mat& x, int amount);
Mat shift_left(const Mat& x, int amount);

/// Full 2D-convolutional model: sum over lags and shifts of the
/// down-shifted templates times right-shifted activations.
Mat reconstruct(const TemplateTensor& W, const ActivationTensor& H);

/// Single component's share of the model; summing over k gives reconstruct().
Mat component_reconstruct(const TemplateTensor& W, const ActivationTensor& H, int k);

/// Generalized KL divergence sum(X log(X/Y) - X + Y) with 0 log 0 := 0 and
/// the ratio denominator floored at epsilon.
double kl_divergence(const Mat& x, const Mat& y, double epsilon = 1e-10);

struct JointFactorization {
    TemplateTensor W1, W2;
    ActivationTensor H1;
    std::vector<double> objective;  // joint KL after each full sweep
};

/// Jointly factorize two equal-shape magnitude matrices with shared
/// activations. Multiplicative updates run W1, W2, then H each sweep, each
/// from freshly recomputed models; the joint objective never increases.
JointFactorization joint_factorize(const Mat& mag_a, const Mat& mag_a_prime, const Nmf2dConfig& cfg);

struct ActivationFit {
    ActivationTensor H;
    std::vector<double> objective;
};

/// Fit activations to a new magnitude matrix holding the templates fixed.
ActivationFit fit_activations(const Mat& mag_b, const TemplateTensor& W, const Nmf2dConfig& cfg);

/// Wiener-style soft masks Lambda_k^p / sum_m Lambda_m^p applied to a
/// complex spectrogram; the outputs partition C (masks sum to one, cells
/// with no model energy split evenly).
std::vector<ComplexSpectrogram> soft_mask_filter(const ComplexSpectrogram& c, const TemplateTensor& W,
                                                 const ActivationTensor& H, double p,
                                                 double epsilon = 1e-10);

}  // namespace coversynth::nmf2d
