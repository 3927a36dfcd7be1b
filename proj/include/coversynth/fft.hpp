#pragma once

#include <complex>
#include <vector>

namespace coversynth::fft {

/// In-place complex DFT. sign = -1 forward, +1 backward (unnormalized).
void transform(std::vector<std::complex<double>>& data, int sign);

/// Real-to-complex DFT of n samples; returns n/2+1 bins.
std::vector<std::complex<double>> real_forward(const std::vector<double>& x);

/// Complex-to-real inverse of real_forward (unnormalized; caller divides by n).
std::vector<double> real_backward(const std::vector<std::complex<double>>& spec, int n);

/// Smallest len >= n that is a multiple of `multiple` and 7-smooth after
/// dividing by it (keeps FFTW away from Bluestein sizes).
int next_fast_len(int n, int multiple);

}  // namespace coversynth::fft
