#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coversynth/nmf2d.hpp"
#include "coversynth/spectra.hpp"

namespace coversynth {

/// Row-major dense tensor for the on-disk exchange format:
/// "CSTN" magic, version byte, axis-count byte, axis lengths as u64 LE,
/// then float64 LE values with the last axis fastest.
struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<double> data;

    std::uint64_t element_count() const {
        std::uint64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

void dump_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);

Tensor tensor_from_matrix(const Mat& m);
Mat matrix_from_tensor(const Tensor& t);

/// Templates dump with axes [M, K, T]; activations with axes [K, N, F].
Tensor tensor_from_templates(const nmf2d::TemplateTensor& w);
nmf2d::TemplateTensor templates_from_tensor(const Tensor& t);
Tensor tensor_from_activations(const nmf2d::ActivationTensor& h);
nmf2d::ActivationTensor activations_from_tensor(const Tensor& t);

}  // namespace coversynth
