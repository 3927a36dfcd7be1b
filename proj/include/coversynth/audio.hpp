#pragma once

#include <cstddef>
#include <vector>

namespace coversynth {

// Mono sample buffer. All pipeline processing happens at 22050 Hz; readers
// resample on load.
struct AudioClip {
    std::vector<double> samples;
    double sample_rate = 22050.0;

    double duration() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    /// Throws ConfigError on non-positive rate or non-finite samples.
    void validate() const;
};

/// Windowed-sinc (Kaiser) resampler to a new rate. Output length is
/// round(n * new_rate / old_rate).
AudioClip resample(const AudioClip& clip, double new_rate);

/// Resample to an exact output length, keeping the clip's sample rate tag.
std::vector<double> resample_to_length(const std::vector<double>& x, std::size_t out_len);

}  // namespace coversynth
