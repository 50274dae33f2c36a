#include "audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

#include "error.hpp"
#include "fileutil.hpp"

namespace tbench {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

[[noreturn]] void corrupt(const std::string& what) {
  fail(ErrorKind::kInvalidInput, "unsupported/corrupt WAV: " + what);
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  std::span<const unsigned char> take(std::size_t n, const char* what) {
    if (remaining() < n) corrupt(std::string("truncated ") + what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint16_t u16(const char* what) {
    auto b = take(2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    auto b = take(4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::string tag(const char* what) {
    auto b = take(4, what);
    return std::string(b.begin(), b.end());
  }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

AudioBuffer::AudioBuffer(std::vector<std::vector<float>> channels, int sample_rate)
    : data_(std::move(channels)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) fail(ErrorKind::kInvalidInput, "sample rate must be positive");
  if (data_.empty()) fail(ErrorKind::kInvalidInput, "audio buffer needs at least one channel");
  const auto n = data_.front().size();
  for (const auto& ch : data_) {
    if (ch.size() != n) fail(ErrorKind::kInvalidInput, "audio channels have unequal lengths");
  }
}

AudioBuffer AudioBuffer::mono(std::vector<float> samples, int sample_rate) {
  std::vector<std::vector<float>> ch;
  ch.push_back(std::move(samples));
  return AudioBuffer(std::move(ch), sample_rate);
}

AudioBuffer AudioBuffer::silence(std::size_t channels, std::size_t frames, int sample_rate) {
  return AudioBuffer(std::vector<std::vector<float>>(channels, std::vector<float>(frames, 0.0f)),
                     sample_rate);
}

AudioBuffer decode_wav(std::span<const unsigned char> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 12) corrupt("truncated header");
  if (r.tag("header") != "RIFF") corrupt("missing RIFF tag");
  r.u32("header");
  if (r.tag("header") != "WAVE") corrupt("missing WAVE tag");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  std::span<const unsigned char> data;
  bool have_data = false;

  while (r.remaining() >= 8 && !(have_fmt && have_data)) {
    const auto id = r.tag("chunk header");
    const auto size = r.u32("chunk header");
    if (id == "fmt ") {
      if (size < 16) corrupt("fmt chunk too small");
      auto body = r.take(size, "fmt chunk");
      ByteReader f(body);
      format = f.u16("fmt chunk");
      channels = f.u16("fmt chunk");
      rate = f.u32("fmt chunk");
      f.u32("fmt chunk");  // byte rate
      block_align = f.u16("fmt chunk");
      bits = f.u16("fmt chunk");
      if (format == kFormatExtensible) {
        if (size < 40) corrupt("extensible fmt chunk too small");
        f.u16("fmt chunk");  // cbSize
        f.u16("fmt chunk");  // valid bits
        f.u32("fmt chunk");  // channel mask
        format = f.u16("fmt chunk");  // leading bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) corrupt("data chunk before fmt chunk");
      // Some writers leave the data size unset; clip to what is present.
      const auto n = std::min<std::size_t>(size, r.remaining());
      data = r.take(n, "data chunk");
      have_data = true;
    } else {
      r.take(std::min<std::size_t>(size, r.remaining()), "chunk");
    }
    if ((size & 1U) && r.remaining() > 0) r.take(1, "chunk padding");
  }
  if (!have_fmt) corrupt("missing fmt chunk");
  if (!have_data) corrupt("missing data chunk");
  if (channels == 0) corrupt("zero channels");
  if (rate == 0) corrupt("zero sample rate");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool pcm24 = format == kFormatPcm && bits == 24;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !pcm24 && !f32) {
    const std::string name = format == kFormatPcm     ? "PCM"
                             : format == kFormatFloat ? "IEEE float"
                                                      : "format tag " + std::to_string(format);
    fail(ErrorKind::kInvalidInput,
         "unsupported WAV encoding: " + name + " " + std::to_string(bits) + "-bit");
  }
  const std::size_t width = bits / 8;
  if (block_align != width * channels) corrupt("inconsistent block alignment");
  const std::size_t frames = data.size() / block_align;
  if (frames == 0) fail(ErrorKind::kInvalidInput, "WAV file contains zero-length audio");

  std::vector<std::vector<float>> out(channels, std::vector<float>(frames));
  const unsigned char* p = data.data();
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c, p += width) {
      float v;
      if (pcm16) {
        const auto s = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        v = static_cast<float>(s) / 32768.0f;
      } else if (pcm24) {
        std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
        if (s & 0x800000) s -= 0x1000000;
        v = static_cast<float>(s) / 8388608.0f;
      } else {
        std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
        v = std::bit_cast<float>(u);
      }
      out[c][i] = v;
    }
  }
  return AudioBuffer(std::move(out), static_cast<int>(rate));
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  const auto raw = read_file(path);
  const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
  try {
    return decode_wav(std::span<const unsigned char>(bytes, raw.size()));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> encode_wav(const AudioBuffer& buffer, WavFormat format,
                                      WavWriteResult* result) {
  if (buffer.empty()) fail(ErrorKind::kInvalidInput, "cannot write an empty audio buffer");
  const std::uint16_t channels = static_cast<std::uint16_t>(buffer.channels());
  const std::uint16_t width = format == WavFormat::kPcm16 ? 2 : 4;
  const std::uint16_t block_align = static_cast<std::uint16_t>(width * channels);
  const std::size_t data_bytes = buffer.frames() * block_align;
  if (data_bytes > 0xFFFFFFFFULL - 64) fail(ErrorKind::kInvalidInput, "audio too long for RIFF/WAVE");

  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, static_cast<std::uint32_t>(36 + data_bytes));
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format == WavFormat::kPcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate()) * block_align);
  put_u16(out, block_align);
  put_u16(out, static_cast<std::uint16_t>(width * 8));
  put_tag(out, "data");
  put_u32(out, static_cast<std::uint32_t>(data_bytes));

  WavWriteResult res;
  for (std::size_t i = 0; i < buffer.frames(); ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const float v = buffer.channel(c)[i];
      if (format == WavFormat::kFloat32) {
        put_u32(out, std::bit_cast<std::uint32_t>(v));
      } else {
        float x = v;
        if (!(x <= 1.0f && x >= -1.0f)) {
          ++res.clamped_samples;
          x = std::isnan(x) ? 0.0f : std::clamp(x, -1.0f, 1.0f);
        }
        const long q = std::clamp(std::lround(static_cast<double>(x) * 32768.0), -32768L, 32767L);
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
      }
    }
  }
  if (result) *result = res;
  return out;
}

WavWriteResult write_wav(const AudioBuffer& buffer, const std::filesystem::path& path,
                         WavFormat format) {
  WavWriteResult res;
  const auto bytes = encode_wav(buffer, format, &res);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  return res;
}

AudioBuffer downmix_mono(const AudioBuffer& buffer) {
  if (buffer.empty()) fail(ErrorKind::kInvalidInput, "cannot downmix an empty audio buffer");
  if (buffer.channels() == 1) return buffer;
  const auto n = buffer.frames();
  const double scale = 1.0 / static_cast<double>(buffer.channels());
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < buffer.channels(); ++c) acc += buffer.channel(c)[i];
    out[i] = static_cast<float>(acc * scale);
  }
  return AudioBuffer::mono(std::move(out), buffer.sample_rate());
}

}  // namespace tbench
