#include "dsp.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include "error.hpp"

namespace tbench {

namespace {

constexpr double kMaxTailSeconds = 10.0;

bool is_prime(std::size_t n) {
  if (n < 2) return false;
  for (std::size_t d = 2; d * d <= n; ++d) {
    if (n % d == 0) return false;
  }
  return true;
}

std::size_t next_prime(std::size_t n) {
  while (!is_prime(n)) ++n;
  return n;
}

// Distinct primes are pairwise co-prime, so each delay is bumped to the next
// prime above its predecessor.
template <std::size_t N>
std::array<std::size_t, N> prime_delays(const std::array<double, N>& ms, int sample_rate) {
  std::array<std::size_t, N> out{};
  std::size_t floor = 1;
  for (std::size_t i = 0; i < N; ++i) {
    const auto target = static_cast<std::size_t>(std::lround(ms[i] * sample_rate / 1000.0));
    out[i] = next_prime(std::max(target, floor + 1));
    floor = out[i];
  }
  return out;
}

void check_finite(const AudioBuffer& out, const char* what) {
  for (std::size_t c = 0; c < out.channels(); ++c) {
    for (float v : out.channel(c)) {
      if (!std::isfinite(v)) fail(ErrorKind::kNumeric, std::string(what) + ": filter instability");
    }
  }
}

class FeedbackComb {
 public:
  FeedbackComb(std::size_t delay, double feedback, double damping, double mod_depth,
               double mod_rate, double mod_phase, int sample_rate)
      : buffer_(delay + static_cast<std::size_t>(std::ceil(mod_depth)) + 2, 0.0),
        delay_(static_cast<double>(delay)),
        feedback_(feedback),
        damping_(damping),
        mod_depth_(mod_depth),
        mod_omega_(2.0 * std::numbers::pi * mod_rate / sample_rate),
        mod_phase_(mod_phase) {}

  double tick(double in) {
    const std::size_t size = buffer_.size();
    double out;
    if (mod_depth_ > 0.0) {
      const double d = delay_ + mod_depth_ * std::sin(mod_omega_ * static_cast<double>(n_) + mod_phase_);
      const double pos = static_cast<double>(write_) - d + static_cast<double>(size);
      const double base = std::floor(pos);
      const double frac = pos - base;
      const auto i0 = static_cast<std::size_t>(base) % size;
      const auto i1 = (i0 + 1) % size;
      out = buffer_[i0] + frac * (buffer_[i1] - buffer_[i0]);
    } else {
      const auto i = (write_ + size - static_cast<std::size_t>(delay_)) % size;
      out = buffer_[i];
    }
    lowpass_ = (1.0 - damping_) * out + damping_ * lowpass_;
    buffer_[write_] = in + feedback_ * lowpass_;
    write_ = (write_ + 1) % size;
    ++n_;
    return out;
  }

 private:
  std::vector<double> buffer_;
  double delay_;
  double feedback_;
  double damping_;
  double mod_depth_;
  double mod_omega_;
  double mod_phase_;
  double lowpass_ = 0.0;
  std::size_t write_ = 0;
  std::size_t n_ = 0;
};

class SchroederAllpass {
 public:
  SchroederAllpass(std::size_t delay, double gain) : buffer_(delay, 0.0), gain_(gain) {}

  double tick(double in) {
    const double delayed = buffer_[pos_];
    const double v = in + gain_ * delayed;
    buffer_[pos_] = v;
    pos_ = (pos_ + 1) % buffer_.size();
    return delayed - gain_ * v;
  }

 private:
  std::vector<double> buffer_;
  double gain_;
  std::size_t pos_ = 0;
};

void require(bool ok, const std::string& descriptor, const std::string& message) {
  if (!ok) fail(ErrorKind::kInvalidInput, "descriptor " + descriptor + ": " + message);
}

}  // namespace

void EqSettings::validate() const {
  require(bands.size() == kEqBandCount, descriptor,
          fmt::format("expected {} bands, got {}", kEqBandCount, bands.size()));
  for (std::size_t k = 0; k < bands.size(); ++k) {
    const auto& b = bands[k];
    require(std::isfinite(b.center_hz) && b.center_hz > 0.0, descriptor,
            fmt::format("band {} freq_hz must be positive", k));
    require(std::isfinite(b.bandwidth_hz) && b.bandwidth_hz > 0.0, descriptor,
            fmt::format("band {} bandwidth_hz must be positive", k));
    require(std::isfinite(b.gain_db), descriptor, fmt::format("band {} gain_db must be finite", k));
    if (k > 0) {
      require(b.center_hz > bands[k - 1].center_hz, descriptor,
              fmt::format("band {} freq_hz must be strictly increasing", k));
    }
  }
}

void ReverbSettings::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  require(finite(decay_s) && decay_s > 0.0, descriptor, "decay_s must be > 0");
  require(finite(feedback_gain) && feedback_gain >= 0.0 && feedback_gain < 1.0, descriptor,
          "feedback_gain must be in [0, 1)");
  require(finite(modulation_hz) && modulation_hz >= 0.0, descriptor, "modulation_hz must be >= 0");
  require(finite(modulation_depth_ms) && modulation_depth_ms >= 0.0, descriptor,
          "modulation_depth_ms must be >= 0");
  require(finite(lowpass_hz) && lowpass_hz > 0.0, descriptor, "lowpass_hz must be > 0");
  require(finite(effect_gain) && effect_gain >= 0.0, descriptor, "effect_gain must be >= 0");
  require(finite(wet_dry) && wet_dry >= 0.0 && wet_dry <= 1.0, descriptor,
          "wet_dry must be in [0, 1]");
}

EffectLevel::EffectLevel(double value) : value_(value) {
  if (!(value > 0.0 && value <= 1.0)) {
    fail(ErrorKind::kInvalidInput, fmt::format("effect level {} outside (0, 1]", value));
  }
}

Biquad Biquad::peaking(double sample_rate, double center_hz, double bandwidth_hz, double gain_db) {
  const double a = std::pow(10.0, gain_db / 40.0);
  const double w0 = 2.0 * std::numbers::pi * center_hz / sample_rate;
  const double q = center_hz / bandwidth_hz;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double cosw = std::cos(w0);
  const double a0 = 1.0 + alpha / a;
  Biquad bq;
  bq.b0 = (1.0 + alpha * a) / a0;
  bq.b1 = -2.0 * cosw / a0;
  bq.b2 = (1.0 - alpha * a) / a0;
  bq.a1 = -2.0 * cosw / a0;
  bq.a2 = (1.0 - alpha / a) / a0;
  return bq;
}

void Biquad::process(std::span<double> samples) const {
  double s1 = 0.0, s2 = 0.0;
  for (double& x : samples) {
    const double y = b0 * x + s1;
    s1 = b1 * x - a1 * y + s2;
    s2 = b2 * x - a2 * y;
    x = y;
  }
}

Rendered apply_eq(const AudioBuffer& buffer, const EqSettings& settings, EffectLevel level) {
  settings.validate();
  if (buffer.empty()) fail(ErrorKind::kInvalidInput, "cannot equalize an empty buffer");
  const double fs = buffer.sample_rate();
  const double nyquist = fs / 2.0;

  Rendered result;
  std::vector<Biquad> cascade;
  cascade.reserve(settings.bands.size());
  for (std::size_t k = 0; k < settings.bands.size(); ++k) {
    const auto& band = settings.bands[k];
    if (band.center_hz >= nyquist) {
      result.warnings.push_back(fmt::format("descriptor {}: band {} at {} Hz skipped (Nyquist {} Hz)",
                                            settings.descriptor, k, band.center_hz, nyquist));
      continue;
    }
    const double gain = level.value() * band.gain_db;
    if (gain == 0.0) continue;  // unity section
    cascade.push_back(Biquad::peaking(fs, band.center_hz, band.bandwidth_hz, gain));
  }

  std::vector<std::vector<float>> out(buffer.channels());
  std::vector<double> work(buffer.frames());
  for (std::size_t c = 0; c < buffer.channels(); ++c) {
    const auto in = buffer.channel(c);
    std::copy(in.begin(), in.end(), work.begin());
    for (const auto& section : cascade) section.process(work);
    out[c].assign(work.begin(), work.end());
  }
  result.audio = AudioBuffer(std::move(out), buffer.sample_rate());
  check_finite(result.audio, "EQ");
  return result;
}

ReverbTopology ReverbTopology::for_rate(int sample_rate) {
  if (sample_rate <= 0) fail(ErrorKind::kInvalidInput, "sample rate must be positive");
  ReverbTopology t;
  std::array<double, kCombs> comb_ms{};
  for (std::size_t i = 0; i < kCombs; ++i) {
    comb_ms[i] = 25.0 + 20.0 * static_cast<double>(i) / static_cast<double>(kCombs - 1);
  }
  t.comb_delays = prime_delays(comb_ms, sample_rate);
  // Longest all-pass first; delays are chosen ascending then reversed.
  const std::array<double, kAllpasses> ap_ms = {1.0, 3.0, 5.0, 7.0};
  auto ap = prime_delays(ap_ms, sample_rate);
  std::reverse(ap.begin(), ap.end());
  t.allpass_delays = ap;
  return t;
}

std::array<double, ReverbTopology::kCombs> comb_feedback(const ReverbSettings& settings,
                                                         const ReverbTopology& topology,
                                                         int sample_rate) {
  std::array<double, ReverbTopology::kCombs> g{};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double tau = static_cast<double>(topology.comb_delays[i]) / sample_rate;
    g[i] = std::min(settings.feedback_gain, std::pow(10.0, -3.0 * tau / settings.decay_s));
  }
  return g;
}

std::size_t reverb_tail_frames(const ReverbSettings& settings, int sample_rate) {
  const auto topology = ReverbTopology::for_rate(sample_rate);
  const auto g = comb_feedback(settings, topology, sample_rate);
  double comb_t60 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double tau = static_cast<double>(topology.comb_delays[i]) / sample_rate;
    // Amplitude falls by g per round trip; 60 dB takes -3 / log10(g) trips.
    const double trips = g[i] > 0.0 ? -3.0 / std::log10(g[i]) : 0.0;
    comb_t60 = std::max(comb_t60, tau * (1.0 + trips));
  }
  double allpass_t60 = 0.0;
  const double ap_trips = -3.0 / std::log10(ReverbTopology::kAllpassGain);
  for (auto d : topology.allpass_delays) {
    allpass_t60 += static_cast<double>(d) / sample_rate * (1.0 + ap_trips);
  }
  const double seconds = std::min(kMaxTailSeconds, comb_t60 + allpass_t60 +
                                                       settings.modulation_depth_ms / 1000.0);
  return static_cast<std::size_t>(std::ceil(seconds * sample_rate));
}

Rendered apply_reverb(const AudioBuffer& buffer, const ReverbSettings& settings, EffectLevel level) {
  settings.validate();
  if (buffer.empty()) fail(ErrorKind::kInvalidInput, "cannot reverberate an empty buffer");
  const int fs = buffer.sample_rate();
  const auto topology = ReverbTopology::for_rate(fs);
  const auto feedback = comb_feedback(settings, topology, fs);
  for (double g : feedback) {
    // The in-loop low-pass has unity DC gain, so the loop gain is g.
    if (!(g < 1.0)) {
      fail(ErrorKind::kNumeric,
           fmt::format("descriptor {}: unstable reverb (loop gain {})", settings.descriptor, g));
    }
  }
  const bool modulated = settings.modulation_hz > 0.0 && settings.modulation_depth_ms > 0.0;
  const double depth = modulated ? settings.modulation_depth_ms * fs / 1000.0 : 0.0;
  if (depth >= static_cast<double>(topology.comb_delays.front()) - 1.0) {
    fail(ErrorKind::kInvalidInput,
         fmt::format("descriptor {}: modulation_depth_ms {} exceeds the shortest comb delay",
                     settings.descriptor, settings.modulation_depth_ms));
  }
  const double damping = std::exp(-2.0 * std::numbers::pi * settings.lowpass_hz / fs);
  const double w = level.value() * settings.wet_dry;
  const std::size_t in_frames = buffer.frames();
  const std::size_t out_frames = in_frames + reverb_tail_frames(settings, fs);
  const double comb_scale = 1.0 / static_cast<double>(ReverbTopology::kCombs);

  std::vector<std::vector<float>> out(buffer.channels(), std::vector<float>(out_frames));
  for (std::size_t c = 0; c < buffer.channels(); ++c) {
    std::vector<FeedbackComb> combs;
    combs.reserve(ReverbTopology::kCombs);
    for (std::size_t i = 0; i < ReverbTopology::kCombs; ++i) {
      combs.emplace_back(topology.comb_delays[i], feedback[i], damping, depth,
                         settings.modulation_hz, static_cast<double>(i) * std::numbers::pi / 4.0, fs);
    }
    std::vector<SchroederAllpass> allpasses;
    for (auto d : topology.allpass_delays) allpasses.emplace_back(d, ReverbTopology::kAllpassGain);

    const auto in = buffer.channel(c);
    auto& dst = out[c];
    for (std::size_t n = 0; n < out_frames; ++n) {
      const double x = n < in_frames ? static_cast<double>(in[n]) : 0.0;
      double sum = 0.0;
      for (auto& comb : combs) sum += comb.tick(x);
      double wet = sum * comb_scale;
      for (auto& ap : allpasses) wet = ap.tick(wet);
      wet *= settings.effect_gain;
      dst[n] = static_cast<float>((1.0 - w) * x + w * wet);
    }
  }
  Rendered result{AudioBuffer(std::move(out), fs), {}};
  check_finite(result.audio, "reverb");
  return result;
}

Rendered fx(const AudioBuffer& audio, const Effect& effect, EffectLevel level) {
  return std::visit(
      [&](const auto& settings) -> Rendered {
        using T = std::decay_t<decltype(settings)>;
        if constexpr (std::is_same_v<T, EqSettings>) {
          return apply_eq(audio, settings, level);
        } else {
          return apply_reverb(audio, settings, level);
        }
      },
      effect);
}

}  // namespace tbench
