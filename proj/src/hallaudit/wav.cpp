#include "hallaudit/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hallaudit/error.hpp"

namespace hallaudit::audio {

namespace {

std::uint32_t read_u32(std::span<const char> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<std::uint8_t>(b[at + static_cast<std::size_t>(k)]);
  return v;
}

std::uint16_t read_u16(std::span<const char> b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<std::uint8_t>(b[at]) |
                                    (static_cast<std::uint8_t>(b[at + 1]) << 8));
}

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

void put_u16(std::vector<char>& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

struct Layout {
  WavInfo info;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;
};

Layout parse_layout(std::span<const char> b) {
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw Error(ErrorKind::parse, "not a RIFF/WAVE file");

  Layout layout;
  bool have_fmt = false;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string_view id(b.data() + pos, 4);
    const std::size_t size = read_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > b.size()) throw Error(ErrorKind::parse, "truncated fmt chunk");
      const auto format = read_u16(b, body);
      if (format != 1) throw Error(ErrorKind::parse, "unsupported WAV format tag " + std::to_string(format));
      layout.info.channels = read_u16(b, body + 2);
      layout.info.sample_rate = static_cast<int>(read_u32(b, body + 4));
      layout.info.bits_per_sample = read_u16(b, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      layout.data_offset = body;
      layout.data_size = std::min(size, b.size() - body);
      have_data = true;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw Error(ErrorKind::parse, "missing fmt chunk");
  if (!have_data) throw Error(ErrorKind::parse, "missing data chunk");
  if (layout.info.bits_per_sample != 16)
    throw Error(ErrorKind::parse, "only 16-bit PCM is supported, got " + std::to_string(layout.info.bits_per_sample));
  if (layout.info.channels != 1 && layout.info.channels != 2)
    throw Error(ErrorKind::parse, "only mono or stereo audio is supported");
  if (layout.info.sample_rate <= 0) throw Error(ErrorKind::parse, "invalid sample rate");
  const std::size_t frame_bytes = 2 * static_cast<std::size_t>(layout.info.channels);
  layout.info.frames = layout.data_size / frame_bytes;
  return layout;
}

}  // namespace

std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

WavInfo parse_wav_info(std::span<const char> bytes) { return parse_layout(bytes).info; }

WavInfo read_wav_info(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_wav_info(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

Audio decode_wav(std::span<const char> bytes) {
  const auto layout = parse_layout(bytes);
  Audio audio;
  audio.sample_rate = layout.info.sample_rate;
  audio.samples.resize(layout.info.frames);
  const int channels = layout.info.channels;
  for (std::size_t f = 0; f < layout.info.frames; ++f) {
    float sum = 0.0f;
    for (int c = 0; c < channels; ++c) {
      const auto at = layout.data_offset + (f * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)) * 2;
      sum += static_cast<float>(static_cast<std::int16_t>(read_u16(bytes, at))) / 32768.0f;
    }
    audio.samples[f] = sum / static_cast<float>(channels);
  }
  return audio;
}

Audio read_wav(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_wav(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<char> encode_wav(const Audio& audio) {
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  std::vector<char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (float s : audio.samples) {
    const float scaled = std::round(std::clamp(s, -1.0f, 1.0f) * 32767.0f);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Audio& audio) {
  const auto bytes = encode_wav(audio);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
}

}  // namespace hallaudit::audio
