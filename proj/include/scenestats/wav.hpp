#pragma once

// Minimal RIFF/WAVE reader and writer. Reads PCM integer (16/24-bit) and
// IEEE float (32-bit) data with any channel count; writes 16-bit PCM.
// Compressed codecs are rejected with a hard error naming the file.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenestats::wav {

struct WavData {
  std::uint32_t sample_rate = 0;
  std::vector<std::vector<double>> channels;  // deinterleaved, amplitudes in [-1, 1]

  std::size_t frames() const { return channels.empty() ? 0 : channels.front().size(); }
};

namespace detail {

inline std::uint32_t rd_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}
inline std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8);
}

[[noreturn]] inline void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error("wav: " + what + ": " + path.string());
}

}  // namespace detail

inline WavData read_wav(const std::filesystem::path& path) {
  using namespace detail;
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open file");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44) fail(path, "file too short for a WAV header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(path, "not a RIFF/WAVE file");

  std::uint16_t format = 0, num_channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t chunk_size = rd_u32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size()) fail(path, "truncated chunk");
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) fail(path, "fmt chunk too short");
      const unsigned char* p = bytes.data() + body;
      format = rd_u16(p);
      num_channels = rd_u16(p + 2);
      sample_rate = rd_u32(p + 4);
      bits = rd_u16(p + 14);
      if (format == 0xFFFE) {  // WAVE_FORMAT_EXTENSIBLE: subformat GUID leads with the tag
        if (chunk_size < 40) fail(path, "extensible fmt chunk too short");
        format = rd_u16(p + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt) fail(path, "missing fmt chunk");
  if (!data) fail(path, "missing data chunk");
  if (num_channels == 0) fail(path, "zero channels");
  if (sample_rate == 0) fail(path, "zero sample rate");

  const bool pcm_int = format == 0x0001;
  const bool ieee_float = format == 0x0003;
  if (!pcm_int && !ieee_float)
    fail(path, "unsupported codec (format tag " + std::to_string(format) +
                   "), only PCM integer and IEEE float are supported");
  if (pcm_int && bits != 16 && bits != 24) fail(path, "unsupported PCM bit depth " + std::to_string(bits));
  if (ieee_float && bits != 32) fail(path, "unsupported float bit depth " + std::to_string(bits));

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_size = bytes_per_sample * num_channels;
  const std::size_t frames = data_size / frame_size;

  WavData out;
  out.sample_rate = sample_rate;
  out.channels.assign(num_channels, std::vector<double>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* fptr = data + i * frame_size;
    for (std::uint16_t c = 0; c < num_channels; ++c) {
      const unsigned char* s = fptr + c * bytes_per_sample;
      double v;
      if (pcm_int && bits == 16) {
        const auto raw = static_cast<std::int16_t>(rd_u16(s));
        v = static_cast<double>(raw) / 32768.0;
      } else if (pcm_int) {  // 24-bit
        std::int32_t raw = std::int32_t{s[0]} | std::int32_t{s[1]} << 8 | std::int32_t{s[2]} << 16;
        if (raw & 0x800000) raw |= ~0xFFFFFF;  // sign extend
        v = static_cast<double>(raw) / 8388608.0;
      } else {  // 32-bit float
        float fv;
        std::memcpy(&fv, s, 4);
        v = std::clamp(static_cast<double>(fv), -1.0, 1.0);
      }
      out.channels[c][i] = v;
    }
  }
  return out;
}

/// Writes 16-bit PCM. Samples are rounded to the integer grid and clamped.
inline void write_wav16(const std::filesystem::path& path, std::uint32_t sample_rate,
                        const std::vector<std::vector<double>>& channels) {
  using namespace detail;
  if (channels.empty()) fail(path, "no channels to write");
  const std::size_t frames = channels.front().size();
  for (const auto& ch : channels)
    if (ch.size() != frames) fail(path, "channel length mismatch");

  const auto num_channels = static_cast<std::uint16_t>(channels.size());
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames * num_channels * 2);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(path, "cannot open file for writing");

  auto w_u16 = [&](std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
    f.write(b, 2);
  };
  auto w_u32 = [&](std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    f.write(b, 4);
  };

  f.write("RIFF", 4);
  w_u32(36 + data_size);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  w_u32(16);
  w_u16(1);  // PCM
  w_u16(num_channels);
  w_u32(sample_rate);
  w_u32(sample_rate * num_channels * 2);
  w_u16(static_cast<std::uint16_t>(num_channels * 2));
  w_u16(16);
  f.write("data", 4);
  w_u32(data_size);

  for (std::size_t i = 0; i < frames; ++i) {
    for (std::uint16_t c = 0; c < num_channels; ++c) {
      const double scaled = std::round(channels[c][i] * 32768.0);
      const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      w_u16(static_cast<std::uint16_t>(q));
    }
  }
  if (!f) fail(path, "write failed");
}

}  // namespace scenestats::wav
