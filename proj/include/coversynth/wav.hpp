#pragma once

#include <string>

#include "coversynth/audio.hpp"

namespace coversynth {

enum class WavFormat { Pcm16, Float32 };

/// Reads a mono WAV file (PCM 16-bit or IEEE float 32-bit). Other layouts
/// are rejected. Returns the clip at its native rate.
AudioClip wav_read(const std::string& path);

void wav_write(const std::string& path, const AudioClip& clip, WavFormat format = WavFormat::Float32);

/// wav_read + resample to 22050 Hz + validation; the pipeline's loader.
AudioClip load_audio_22k(const std::string& path);

}  // namespace coversynth
