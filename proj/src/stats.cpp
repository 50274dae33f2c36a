#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "error.hpp"

namespace tbench {

std::string_view trend_symbol(TrendClass trend) {
  switch (trend) {
    case TrendClass::kMonotonicUp:
      return "↑";
    case TrendClass::kMonotonicDown:
      return "↓";
    default:
      return "-";
  }
}

std::string_view trend_name(TrendClass trend) {
  switch (trend) {
    case TrendClass::kMonotonicUp:
      return "monotonic_up";
    case TrendClass::kMonotonicDown:
      return "monotonic_down";
    case TrendClass::kPeaked:
      return "peaked";
    case TrendClass::kDipped:
      return "dipped";
    case TrendClass::kFlat:
      return "flat";
  }
  return "flat";
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(ErrorKind::kInvalidInput,
         fmt::format("pearson: length mismatch ({} vs {})", x.size(), y.size()));
  }
  const std::size_t n = x.size();
  if (n < 3) fail(ErrorKind::kInvalidInput, fmt::format("pearson: need at least 3 points, got {}", n));

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

TrendClass classify_trend(double low, double mid, double high, double tolerance) {
  if (!std::isfinite(low) || !std::isfinite(mid) || !std::isfinite(high)) {
    fail(ErrorKind::kInvalidInput, "classify_trend: non-finite delta");
  }
  if (!(tolerance >= 0.0) || !std::isfinite(tolerance)) {
    fail(ErrorKind::kInvalidInput, "classify_trend: tolerance must be finite and >= 0");
  }
  const double eps = tolerance;
  if (mid >= low - eps && high >= mid - eps && high - low > eps) return TrendClass::kMonotonicUp;
  if (mid <= low + eps && high <= mid + eps && low - high > eps) return TrendClass::kMonotonicDown;
  if (mid > std::max(low, high) + eps) return TrendClass::kPeaked;
  if (mid < std::min(low, high) - eps) return TrendClass::kDipped;
  return TrendClass::kFlat;
}

TrendClass classify_trend(std::span<const double> deltas, double tolerance) {
  if (deltas.size() == 3) return classify_trend(deltas[0], deltas[1], deltas[2], tolerance);
  for (double d : deltas) {
    if (!std::isfinite(d)) fail(ErrorKind::kInvalidInput, "classify_trend: non-finite delta");
  }
  if (!(tolerance >= 0.0) || !std::isfinite(tolerance)) {
    fail(ErrorKind::kInvalidInput, "classify_trend: tolerance must be finite and >= 0");
  }
  if (deltas.size() < 2) return TrendClass::kFlat;
  const double eps = tolerance;
  const double first = deltas.front();
  const double last = deltas.back();
  bool non_decreasing = true, non_increasing = true;
  for (std::size_t k = 1; k < deltas.size(); ++k) {
    if (!(deltas[k] >= deltas[k - 1] - eps)) non_decreasing = false;
    if (!(deltas[k] <= deltas[k - 1] + eps)) non_increasing = false;
  }
  if (non_decreasing && last - first > eps) return TrendClass::kMonotonicUp;
  if (non_increasing && first - last > eps) return TrendClass::kMonotonicDown;
  const auto interior = deltas.subspan(1, deltas.size() - 2);
  if (!interior.empty()) {
    const auto [lo, hi] = std::minmax_element(interior.begin(), interior.end());
    if (*hi > std::max(first, last) + eps) return TrendClass::kPeaked;
    if (*lo < std::min(first, last) - eps) return TrendClass::kDipped;
  }
  return TrendClass::kFlat;
}

CorrelationSummary summarize_correlations(std::span<const LabeledCorrelation> rs) {
  CorrelationSummary s;
  s.total = rs.size();
  double sum = 0.0;
  std::size_t defined = 0;
  for (const auto& item : rs) {
    if (!item.r) {
      ++s.undefined_count;
      continue;
    }
    const double r = *item.r;
    if (r > 0.0) ++s.positive_count;
    if (r < 0.0) ++s.negative_count;
    sum += r;
    ++defined;
  }
  if (defined > 0) s.mean_r = sum / static_cast<double>(defined);
  return s;
}

}  // namespace tbench
