#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tbench {

enum class TrendClass { kMonotonicUp, kMonotonicDown, kPeaked, kDipped, kFlat };

inline constexpr double kDefaultTrendTolerance = 1e-4;

// Table rendering: "↑", "↓", or "-" for every non-monotone shape.
std::string_view trend_symbol(TrendClass trend);
std::string_view trend_name(TrendClass trend);

inline constexpr std::string_view kTrendLegend =
    "↑ = Monotonic up, ↓ = Monotonic down, - = flat or inconsistent";

// Sample Pearson correlation. Returns nullopt when either sequence has zero
// variance (undefined, never reported as 0). Throws on length mismatch or
// fewer than three points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Classifies (low, mid, high) deltas. Monotone classes take precedence over
// peaked/dipped; anything else is flat.
TrendClass classify_trend(double low, double mid, double high,
                          double tolerance = kDefaultTrendTolerance);

// Same rule over any number of ascending levels: monotone if every step moves
// by at least -tolerance in one direction and the endpoints differ by more
// than tolerance; peaked/dipped if an interior value clears both endpoints.
// Three values reduce exactly to the triple overload.
TrendClass classify_trend(std::span<const double> deltas, double tolerance = kDefaultTrendTolerance);

struct LabeledCorrelation {
  std::string label;
  std::optional<double> r;
};

struct CorrelationSummary {
  std::size_t total = 0;
  std::size_t positive_count = 0;
  std::size_t negative_count = 0;
  std::size_t undefined_count = 0;
  std::optional<double> mean_r;  // over defined values; nullopt if none
};

CorrelationSummary summarize_correlations(std::span<const LabeledCorrelation> rs);

}  // namespace tbench
