#include "coversynth/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "coversynth/errors.hpp"

namespace coversynth {

namespace {

constexpr double kPipelineRate = 22050.0;

std::uint32_t rd_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t rd_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
}
void wr_u16(std::ofstream& f, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    f.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

AudioClip wav_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("wav_read: cannot open " + path);
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (data.size() < 44 || std::memcmp(data.data(), "RIFF", 4) != 0 || std::memcmp(data.data() + 8, "WAVE", 4) != 0)
        throw ConfigError("wav_read: not a RIFF/WAVE file: " + path);

    std::uint16_t audio_format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* pcm = nullptr;
    std::uint32_t pcm_bytes = 0;

    std::size_t pos = 12;
    while (pos + 8 <= data.size()) {
        const unsigned char* hdr = data.data() + pos;
        std::uint32_t chunk_size = rd_u32(hdr + 4);
        const unsigned char* body = hdr + 8;
        if (pos + 8 + chunk_size > data.size()) chunk_size = static_cast<std::uint32_t>(data.size() - pos - 8);
        if (std::memcmp(hdr, "fmt ", 4) == 0 && chunk_size >= 16) {
            audio_format = rd_u16(body);
            channels = rd_u16(body + 2);
            rate = rd_u32(body + 4);
            bits = rd_u16(body + 14);
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            pcm = body;
            pcm_bytes = chunk_size;
        }
        pos += 8 + chunk_size + (chunk_size & 1);  // chunks are word-aligned
    }
    if (!pcm || rate == 0) throw ConfigError("wav_read: missing fmt/data chunk: " + path);
    if (channels != 1) throw ConfigError("wav_read: only mono input is supported: " + path);

    AudioClip clip;
    clip.sample_rate = static_cast<double>(rate);
    if (audio_format == 1 && bits == 16) {
        std::size_t n = pcm_bytes / 2;
        clip.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::int16_t s = static_cast<std::int16_t>(pcm[2 * i] | (pcm[2 * i + 1] << 8));
            clip.samples[i] = static_cast<double>(s) / 32768.0;
        }
    } else if (audio_format == 3 && bits == 32) {
        std::size_t n = pcm_bytes / 4;
        clip.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            float v;
            std::memcpy(&v, pcm + 4 * i, 4);
            clip.samples[i] = static_cast<double>(v);
        }
    } else {
        throw ConfigError("wav_read: unsupported format (need PCM16 or float32): " + path);
    }
    clip.validate();
    return clip;
}

void wav_write(const std::string& path, const AudioClip& clip, WavFormat format) {
    clip.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("wav_write: cannot open " + path);
    const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
    const std::uint16_t bytes_per = (format == WavFormat::Pcm16) ? 2 : 4;
    const std::uint32_t data_bytes = n * bytes_per;
    const std::uint32_t rate = static_cast<std::uint32_t>(std::llround(clip.sample_rate));

    f.write("RIFF", 4);
    wr_u32(f, 36 + data_bytes);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    wr_u32(f, 16);
    wr_u16(f, format == WavFormat::Pcm16 ? 1 : 3);
    wr_u16(f, 1);  // mono
    wr_u32(f, rate);
    wr_u32(f, rate * bytes_per);
    wr_u16(f, bytes_per);
    wr_u16(f, static_cast<std::uint16_t>(bytes_per * 8));
    f.write("data", 4);
    wr_u32(f, data_bytes);
    if (format == WavFormat::Pcm16) {
        for (std::uint32_t i = 0; i < n; ++i) {
            double v = std::clamp(clip.samples[i], -1.0, 1.0);
            auto s = static_cast<std::int16_t>(std::lrint(v * 32767.0));
            unsigned char b[2] = {static_cast<unsigned char>(s & 0xff),
                                  static_cast<unsigned char>((s >> 8) & 0xff)};
            f.write(reinterpret_cast<char*>(b), 2);
        }
    } else {
        for (std::uint32_t i = 0; i < n; ++i) {
            float v = static_cast<float>(clip.samples[i]);
            char b[4];
            std::memcpy(b, &v, 4);
            f.write(b, 4);
        }
    }
    if (!f) throw StageError("wav_write", "write failed: " + path);
}

AudioClip load_audio_22k(const std::string& path) {
    AudioClip clip = wav_read(path);
    if (clip.sample_rate != kPipelineRate) clip = resample(clip, kPipelineRate);
    clip.validate();
    return clip;
}

}  // namespace coversynth
