#pragma once

#include <vector>

#include "coversynth/features.hpp"

namespace coversynth::alignment {

struct FusionOptions {
    int knn = 5;
    int iterations = 20;
    double mu = 0.5;
};

/// Similarity-network-fusion cross-similarity: builds a joint graph over
/// both songs' blocks per feature kind, cross-diffuses the kernels, and
/// returns the summed fused cross block (rows = song A blocks, cols = song
/// A' blocks). With a single kind this degenerates to that kind's kernel.
Mat fuse_similarity(const std::vector<FeatureMatrix>& features_a,
                    const std::vector<FeatureMatrix>& features_a_prime,
                    const FusionOptions& opts = {});

}  // namespace coversynth::alignment
