#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace tbench {

// Non-interleaved floating-point audio. Samples are nominally in [-1, 1] but
// never clamped here; clamping only happens on PCM16 export.
class AudioBuffer {
 public:
  AudioBuffer() = default;
  AudioBuffer(std::vector<std::vector<float>> channels, int sample_rate);

  // Mono convenience constructor.
  static AudioBuffer mono(std::vector<float> samples, int sample_rate);
  // Zero-filled buffer.
  static AudioBuffer silence(std::size_t channels, std::size_t frames, int sample_rate);

  int sample_rate() const noexcept { return sample_rate_; }
  std::size_t channels() const noexcept { return data_.size(); }
  std::size_t frames() const noexcept { return data_.empty() ? 0 : data_.front().size(); }
  bool empty() const noexcept { return frames() == 0; }

  std::span<const float> channel(std::size_t c) const { return data_.at(c); }
  std::span<float> channel(std::size_t c) { return data_.at(c); }

  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;

 private:
  std::vector<std::vector<float>> data_;
  int sample_rate_ = 0;
};

enum class WavFormat { kPcm16, kFloat32 };

struct WavWriteResult {
  // Number of samples saturated to full scale during PCM16 export.
  std::size_t clamped_samples = 0;
  bool clamped() const noexcept { return clamped_samples > 0; }
};

// Reads PCM16, PCM24 or IEEE float32 RIFF/WAVE files (WAVE_FORMAT_EXTENSIBLE
// included). Integer formats are divided by full scale (2^15, 2^23).
AudioBuffer read_wav(const std::filesystem::path& path);

WavWriteResult write_wav(const AudioBuffer& buffer, const std::filesystem::path& path,
                         WavFormat format);

// Serializes to an in-memory WAV image; `write_wav` writes exactly these bytes.
std::vector<unsigned char> encode_wav(const AudioBuffer& buffer, WavFormat format,
                                      WavWriteResult* result = nullptr);
AudioBuffer decode_wav(std::span<const unsigned char> bytes);

// Per-sample arithmetic mean of all channels.
AudioBuffer downmix_mono(const AudioBuffer& buffer);

}  // namespace tbench
