#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "audio.hpp"

namespace tbench {

inline constexpr std::size_t kEqBandCount = 40;

struct EqBand {
  double center_hz = 0.0;
  double bandwidth_hz = 0.0;
  double gain_db = 0.0;
};

struct EqSettings {
  std::string descriptor;
  std::vector<EqBand> bands;

  // Exactly 40 bands, positive frequencies and bandwidths, strictly
  // increasing centers, finite gains.
  void validate() const;
};

struct ReverbSettings {
  std::string descriptor;
  double decay_s = 1.0;
  double feedback_gain = 0.7;
  double modulation_hz = 0.0;
  double modulation_depth_ms = 0.0;
  double lowpass_hz = 8000.0;
  double effect_gain = 1.0;
  double wet_dry = 1.0;

  void validate() const;
};

// Effect intensity in (0, 1].
class EffectLevel {
 public:
  explicit EffectLevel(double value);
  double value() const noexcept { return value_; }

 private:
  double value_;
};

inline const std::vector<double> kDefaultLevels = {0.3, 0.6, 1.0};

using Effect = std::variant<EqSettings, ReverbSettings>;

struct Rendered {
  AudioBuffer audio;
  std::vector<std::string> warnings;
};

// Second-order section, transposed direct form II, normalized so a0 == 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;

  // Constant-Q peaking section with Q = center / bandwidth. The magnitude at
  // the center frequency is exactly 10^(gain_db / 20).
  static Biquad peaking(double sample_rate, double center_hz, double bandwidth_hz, double gain_db);

  void process(std::span<double> samples) const;
};

// 40-band cascade in ascending frequency order; band k is realized with
// level * gain_db(k). Bands at or above Nyquist are skipped with a warning.
Rendered apply_eq(const AudioBuffer& buffer, const EqSettings& settings, EffectLevel level);

// Delay-line layout of the reverberator at a given sample rate.
struct ReverbTopology {
  static constexpr std::size_t kCombs = 8;
  static constexpr std::size_t kAllpasses = 4;
  static constexpr double kAllpassGain = 0.5;

  std::array<std::size_t, kCombs> comb_delays{};        // samples, mutually co-prime
  std::array<std::size_t, kAllpasses> allpass_delays{};  // samples, series order

  static ReverbTopology for_rate(int sample_rate);
};

// Per-comb feedback: min(feedback_gain, 10^(-3 * tau / decay_s)).
std::array<double, ReverbTopology::kCombs> comb_feedback(const ReverbSettings& settings,
                                                         const ReverbTopology& topology,
                                                         int sample_rate);

// Samples appended after the input: the time for the slowest comb to decay
// 60 dB plus the all-pass diffusion time, capped at 10 s.
std::size_t reverb_tail_frames(const ReverbSettings& settings, int sample_rate);

// Parallel low-passed comb bank -> series all-passes -> effect gain, mixed
// with the dry signal at w = level * wet_dry.
Rendered apply_reverb(const AudioBuffer& buffer, const ReverbSettings& settings, EffectLevel level);

// Dispatches on the effect kind. Bit-for-bit deterministic.
Rendered fx(const AudioBuffer& audio, const Effect& effect, EffectLevel level);

}  // namespace tbench
