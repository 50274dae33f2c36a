#include "dsp.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <complex>
#include <numeric>
#include <random>

#include "error.hpp"
#include "test_support.hpp"

using namespace tbench;
using tbench::testing::flat_eq;
using tbench::testing::plain_reverb;
using tbench::testing::sine;
using tbench::testing::single_band_eq;

namespace {

constexpr int kRate = 44100;

// Magnitude (dB) of the constant-Q peaking section at `freq`, evaluated from
// the cookbook formula directly on the unit circle.
double analytic_peaking_db(double fs, double f0, double bw, double gain_db, double freq) {
  const double a = std::pow(10.0, gain_db / 40.0);
  const double w0 = 2.0 * std::numbers::pi * f0 / fs;
  const double alpha = std::sin(w0) / (2.0 * (f0 / bw));
  const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq / fs);
  const std::complex<double> z2 = z1 * z1;
  const auto num = (1.0 + alpha * a) - 2.0 * std::cos(w0) * z1 + (1.0 - alpha * a) * z2;
  const auto den = (1.0 + alpha / a) - 2.0 * std::cos(w0) * z1 + (1.0 - alpha / a) * z2;
  return 20.0 * std::log10(std::abs(num / den));
}

double rms(std::span<const float> x, std::size_t from, std::size_t to) {
  double acc = 0.0;
  for (std::size_t i = from; i < to; ++i) acc += static_cast<double>(x[i]) * x[i];
  return std::sqrt(acc / static_cast<double>(to - from));
}

// Steady-state gain of the EQ on a sine at `freq`, measured by RMS after a
// half-second settling period.
double measured_gain_db(const EqSettings& eq, double level, double freq) {
  const auto in = AudioBuffer::mono(sine(freq, kRate, kRate * 2), kRate);
  const auto out = apply_eq(in, eq, EffectLevel(level)).audio;
  const std::size_t from = kRate / 2, to = kRate * 2;
  return 20.0 * std::log10(rms(out.channel(0), from, to) / rms(in.channel(0), from, to));
}

// Schroeder backward-integrated energy decay; returns the first time (s) at
// which the curve reaches -60 dB.
double edc_crossing_seconds(std::span<const float> h, int fs, double level_db = -60.0) {
  std::vector<double> tail(h.size() + 1, 0.0);
  for (std::size_t i = h.size(); i-- > 0;) tail[i] = tail[i + 1] + static_cast<double>(h[i]) * h[i];
  const double total = tail[0];
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (10.0 * std::log10(tail[i] / total) <= level_db) return static_cast<double>(i) / fs;
  }
  return static_cast<double>(h.size()) / fs;
}

}  // namespace

TEST_CASE("peaking biquad matches the analytic response") {
  for (double gain : {-12.0, -3.0, 6.0, 9.5}) {
    const auto bq = Biquad::peaking(kRate, 1000.0, 500.0, gain);
    for (double f : {100.0, 700.0, 1000.0, 1500.0, 8000.0}) {
      const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * f / kRate);
      const auto h = (bq.b0 + bq.b1 * z1 + bq.b2 * z1 * z1) / (1.0 + bq.a1 * z1 + bq.a2 * z1 * z1);
      CHECK(20.0 * std::log10(std::abs(h)) == Catch::Approx(analytic_peaking_db(kRate, 1000.0, 500.0, gain, f)).margin(1e-9));
    }
  }
  // At the center the cookbook section realizes the requested gain exactly.
  CHECK(analytic_peaking_db(kRate, 1000.0, 500.0, 6.0, 1000.0) == Catch::Approx(6.0).margin(1e-9));
}

TEST_CASE("EQ single band boost at its center") {
  const auto eq = single_band_eq(1000.0, 500.0, 6.0);
  const double expected_full = analytic_peaking_db(kRate, 1000.0, 500.0, 6.0, 1000.0);
  const double expected_half = analytic_peaking_db(kRate, 1000.0, 500.0, 3.0, 1000.0);
  CHECK(measured_gain_db(eq, 1.0, 1000.0) == Catch::Approx(expected_full).margin(0.2));
  CHECK(measured_gain_db(eq, 0.5, 1000.0) == Catch::Approx(expected_half).margin(0.2));
  CHECK(measured_gain_db(eq, 1.0, 1000.0) == Catch::Approx(6.0).margin(0.2));
  CHECK(measured_gain_db(eq, 0.5, 1000.0) == Catch::Approx(3.0).margin(0.2));
}

TEST_CASE("EQ with all-zero gains is the identity") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> noise(4096);
  for (auto& v : noise) v = dist(rng);
  const AudioBuffer in({noise, noise}, kRate);
  for (double level : {0.3, 0.6, 1.0}) {
    const auto out = apply_eq(in, flat_eq("flat"), EffectLevel(level)).audio;
    REQUIRE(out.frames() == in.frames());
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t i = 0; i < in.frames(); ++i) REQUIRE(std::abs(out.channel(c)[i] - in.channel(c)[i]) <= 1e-7f);
    }
  }
}

TEST_CASE("EQ is linear in the input") {
  auto eq = flat_eq("lin");
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> g(-9.0, 9.0);
  for (auto& b : eq.bands) b.gain_db = g(rng);
  std::uniform_real_distribution<float> dist(-0.5f, 0.5f);
  std::vector<float> x(2048);
  for (auto& v : x) v = dist(rng);
  const auto y = apply_eq(AudioBuffer::mono(x, kRate), eq, EffectLevel(0.8)).audio;
  for (double alpha : {0.5, 3.0, -2.0}) {
    std::vector<float> ax(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) ax[i] = static_cast<float>(alpha * x[i]);
    const auto ay = apply_eq(AudioBuffer::mono(ax, kRate), eq, EffectLevel(0.8)).audio;
    double peak = 0.0;
    for (float v : y.channel(0)) peak = std::max(peak, std::abs(alpha * v));
    for (std::size_t i = 0; i < x.size(); ++i) {
      REQUIRE(std::abs(ay.channel(0)[i] - alpha * y.channel(0)[i]) <= 1e-6 * peak);
    }
  }
}

TEST_CASE("EQ boost at the center grows with level") {
  const auto eq = single_band_eq(2000.0, 800.0, 8.0);
  double previous = -1.0;
  for (double level = 0.1; level <= 1.0001; level += 0.1) {
    const double boost = measured_gain_db(eq, level, 2000.0);
    CHECK(boost > previous);
    previous = boost;
  }
}

TEST_CASE("EQ skips bands at or above Nyquist with a warning") {
  auto eq = flat_eq("high");
  eq.bands.back().gain_db = 6.0;  // 16 kHz, above Nyquist at 8 kHz
  const auto in = AudioBuffer::mono(sine(440.0, 8000, 800), 8000);
  const auto res = apply_eq(in, eq, EffectLevel(1.0));
  REQUIRE_FALSE(res.warnings.empty());
  CHECK_THAT(res.warnings.front(), Catch::Matchers::ContainsSubstring("skipped"));
}

TEST_CASE("EQ settings validation") {
  auto eq = flat_eq("bad");
  eq.bands.pop_back();
  CHECK_THROWS_WITH(eq.validate(), Catch::Matchers::ContainsSubstring("expected 40 bands"));
  eq = flat_eq("bad");
  std::swap(eq.bands[3], eq.bands[4]);
  CHECK_THROWS_AS(eq.validate(), Error);
  eq = flat_eq("bad");
  eq.bands[0].bandwidth_hz = 0.0;
  CHECK_THROWS_AS(eq.validate(), Error);
}

TEST_CASE("effect level range") {
  CHECK_THROWS_AS(EffectLevel(0.0), Error);
  CHECK_THROWS_AS(EffectLevel(1.01), Error);
  CHECK(EffectLevel(1.0).value() == 1.0);
}

TEST_CASE("non-finite EQ output is reported as instability") {
  const auto in = AudioBuffer::mono({0.1f, std::numeric_limits<float>::infinity(), 0.0f}, kRate);
  auto eq = single_band_eq(1000.0, 500.0, 3.0);
  CHECK_THROWS_WITH(apply_eq(in, eq, EffectLevel(1.0)), Catch::Matchers::ContainsSubstring("filter instability"));
}

TEST_CASE("reverb topology uses co-prime delays in the conventional ranges") {
  for (int fs : {8000, 16000, 22050, 44100, 48000, 96000}) {
    const auto t = ReverbTopology::for_rate(fs);
    for (std::size_t i = 0; i < t.comb_delays.size(); ++i) {
      const double ms = 1000.0 * static_cast<double>(t.comb_delays[i]) / fs;
      CHECK(ms >= 24.9);
      CHECK(ms <= 46.0);
      for (std::size_t j = i + 1; j < t.comb_delays.size(); ++j) CHECK(std::gcd(t.comb_delays[i], t.comb_delays[j]) == 1);
    }
    for (auto d : t.allpass_delays) {
      const double ms = 1000.0 * static_cast<double>(d) / fs;
      CHECK(ms >= 0.9);
      CHECK(ms <= 7.6);
    }
  }
}

TEST_CASE("comb feedback takes the more conservative of decay and feedback gain") {
  auto r = plain_reverb("x");
  r.decay_s = 1.0;
  r.feedback_gain = 0.999;
  const auto t = ReverbTopology::for_rate(kRate);
  auto g = comb_feedback(r, t, kRate);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double tau = static_cast<double>(t.comb_delays[i]) / kRate;
    CHECK(g[i] == Catch::Approx(std::pow(10.0, -3.0 * tau / 1.0)).epsilon(1e-12));
    // An isolated comb with this gain is exactly 60 dB down after decay_s.
    CHECK(20.0 * std::log10(std::pow(g[i], 1.0 / tau)) == Catch::Approx(-60.0).epsilon(1e-9));
  }
  r.feedback_gain = 0.5;
  g = comb_feedback(r, t, kRate);
  for (double v : g) CHECK(v == 0.5);
}

TEST_CASE("reverb with zero wet mix is the identity over the input") {
  auto r = plain_reverb("dry");
  r.wet_dry = 0.0;
  r.modulation_hz = 0.7;
  r.modulation_depth_ms = 2.0;
  const auto x = sine(330.0, kRate, 5000, 0.8);
  const auto in = AudioBuffer({x, x}, kRate);
  for (double level : {0.3, 0.6, 1.0}) {
    const auto out = apply_reverb(in, r, EffectLevel(level)).audio;
    REQUIRE(out.frames() == in.frames() + reverb_tail_frames(r, kRate));
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t i = 0; i < in.frames(); ++i) REQUIRE(std::abs(out.channel(c)[i] - in.channel(c)[i]) <= 1e-7f);
      for (std::size_t i = in.frames(); i < out.frames(); ++i) REQUIRE(out.channel(c)[i] == 0.0f);
    }
  }
}

TEST_CASE("reverb impulse response decays 60 dB near decay_s") {
  auto r = plain_reverb("rt60");
  r.decay_s = 1.0;
  r.feedback_gain = 0.999;
  r.lowpass_hz = 18000.0;
  r.wet_dry = 1.0;
  std::vector<float> impulse(1, 0.0f);
  impulse[0] = 1.0f;
  const auto out = apply_reverb(AudioBuffer::mono(impulse, kRate), r, EffectLevel(1.0)).audio;
  const double t60 = edc_crossing_seconds(out.channel(0), kRate);
  CHECK(t60 == Catch::Approx(1.0).margin(0.2));
}

TEST_CASE("reverb with zero effect gain at full wet is silence") {
  auto r = plain_reverb("mute");
  r.wet_dry = 1.0;
  r.effect_gain = 0.0;
  const auto in = AudioBuffer::mono(sine(200.0, kRate, 3000), kRate);
  const auto out = apply_reverb(in, r, EffectLevel(1.0)).audio;
  CHECK(out.frames() == in.frames() + reverb_tail_frames(r, kRate));
  for (float v : out.channel(0)) REQUIRE(v == 0.0f);
}

TEST_CASE("reverb validation") {
  auto r = plain_reverb("v");
  r.feedback_gain = 1.0;
  CHECK_THROWS_AS(r.validate(), Error);
  r.feedback_gain = 1.3;
  CHECK_THROWS_AS(r.validate(), Error);
  r = plain_reverb("v");
  r.wet_dry = 1.2;
  CHECK_THROWS_WITH(r.validate(), Catch::Matchers::ContainsSubstring("wet_dry"));
  r = plain_reverb("v");
  r.decay_s = 0.0;
  CHECK_THROWS_AS(r.validate(), Error);
  r = plain_reverb("v");
  r.modulation_hz = 1.0;
  r.modulation_depth_ms = 40.0;
  const auto in = AudioBuffer::mono({1.0f}, kRate);
  CHECK_THROWS_WITH(apply_reverb(in, r, EffectLevel(1.0)), Catch::Matchers::ContainsSubstring("modulation_depth_ms"));
}

TEST_CASE("reverb stays stable across random valid settings") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto in = AudioBuffer::mono({1.0f, -0.5f, 0.25f}, 16000);
  for (int trial = 0; trial < 40; ++trial) {
    ReverbSettings r;
    r.descriptor = "rand";
    r.decay_s = 0.05 + 20.0 * u(rng);
    r.feedback_gain = 0.9999 * u(rng);
    r.modulation_hz = 5.0 * u(rng);
    r.modulation_depth_ms = 10.0 * u(rng);
    r.lowpass_hz = 100.0 + 20000.0 * u(rng);
    r.effect_gain = 2.0 * u(rng);
    r.wet_dry = u(rng);
    const auto out = apply_reverb(in, r, EffectLevel(1.0)).audio;
    REQUIRE(out.frames() <= in.frames() + 10 * 16000);
    double energy = 0.0;
    for (float v : out.channel(0)) {
      REQUIRE(std::isfinite(v));
      energy += static_cast<double>(v) * v;
    }
    REQUIRE(std::isfinite(energy));
  }
}

TEST_CASE("reverb tail is capped at ten seconds") {
  auto r = plain_reverb("long");
  r.decay_s = 60.0;
  r.feedback_gain = 0.99999;
  CHECK(reverb_tail_frames(r, 8000) == 10 * 8000);
}

TEST_CASE("fx is deterministic and dispatches on effect kind") {
  auto r = plain_reverb("det");
  r.modulation_hz = 0.9;
  r.modulation_depth_ms = 3.0;
  auto eq = single_band_eq(1500.0, 300.0, -4.0);
  const auto in = AudioBuffer::mono(sine(523.0, 22050, 4000), 22050);
  for (const Effect& e : {Effect(r), Effect(eq)}) {
    const auto a = fx(in, e, EffectLevel(0.6)).audio;
    const auto b = fx(in, e, EffectLevel(0.6)).audio;
    CHECK(a == b);
  }
  CHECK(fx(in, Effect(eq), EffectLevel(1.0)).audio.frames() == in.frames());
  CHECK(fx(in, Effect(r), EffectLevel(1.0)).audio.frames() > in.frames());
  CHECK(fx(in, Effect(flat_eq("zero")), EffectLevel(0.3)).audio == in);
}
