#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hallaudit::audio {

// Header facts of a RIFF/WAVE PCM file.
struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  std::size_t frames = 0;

  double duration() const { return sample_rate > 0 ? static_cast<double>(frames) / sample_rate : 0.0; }
};

// Mono samples scaled to [-1, 1).
struct Audio {
  int sample_rate = 0;
  std::vector<float> samples;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

WavInfo parse_wav_info(std::span<const char> bytes);
WavInfo read_wav_info(const std::filesystem::path& path);

// Only 16-bit PCM, mono or stereo. Stereo is downmixed by averaging channels.
Audio decode_wav(std::span<const char> bytes);
Audio read_wav(const std::filesystem::path& path);

std::vector<char> encode_wav(const Audio& audio);
void write_wav(const std::filesystem::path& path, const Audio& audio);

std::vector<char> read_file_bytes(const std::filesystem::path& path);

}  // namespace hallaudit::audio
