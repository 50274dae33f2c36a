#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "audio.hpp"
#include "dsp.hpp"
#include "instruments.hpp"
#include "stats.hpp"

namespace tbench {

enum class EffectKind { kEq, kReverb };

std::string_view effect_name(EffectKind effect);
EffectKind parse_effect(std::string_view text);

// Descriptor-specific settings, keyed (and therefore ordered) by descriptor.
struct DescriptorSettingsMap {
  std::map<std::string, EqSettings> eq;
  std::map<std::string, ReverbSettings> reverb;
};

// Settings files are JSON Lines (one record per descriptor) or a single JSON
// array of the same records.
//   EQ:     {"descriptor", "bands": [{"freq_hz", "bandwidth_hz", "gain_db"} x 40]}
//   reverb: {"descriptor", "decay_s", "feedback_gain", "modulation_hz",
//            "modulation_depth_ms", "lowpass_hz", "effect_gain", "wet_dry"}
std::map<std::string, EqSettings> parse_eq_settings(std::string_view text, std::string_view source = "<memory>");
std::map<std::string, ReverbSettings> parse_reverb_settings(std::string_view text,
                                                            std::string_view source = "<memory>");

// Either path may be empty, leaving that effect without descriptors.
DescriptorSettingsMap load_settings(const std::filesystem::path& eq_path,
                                    const std::filesystem::path& reverb_path);

std::string settings_hash(const EqSettings& settings);
std::string settings_hash(const ReverbSettings& settings);

// Levels must be non-empty, strictly increasing and within (0, 1].
void validate_levels(std::span<const double> levels);
// Shortest decimal form, used in item ids and CSVs ("0.3").
std::string format_level(double level);

struct ManifestItem {
  std::string item_id;
  std::string path;  // relative to the manifest's directory
  std::optional<std::string> descriptor;
  std::optional<EffectKind> effect;
  std::optional<double> level;
  std::string provenance_hash;

  bool is_reference() const noexcept { return !effect.has_value(); }
};

struct Manifest {
  std::vector<ManifestItem> items;

  const ManifestItem& reference() const;
};

inline constexpr std::string_view kReferenceItemId = "reference";

std::string format_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text, std::string_view source = "<memory>");
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

struct RenderStats {
  std::size_t rendered = 0;
  std::size_t reused = 0;
  std::vector<std::string> warnings;
};

// Renders every (descriptor, effect, level) variant of `reference` into
// `output_dir`/renders as float32 WAV, plus the reference itself. Files are
// content-addressed by provenance hash (reference, effect, settings, level);
// existing files are reused. Items are ordered: reference, EQ descriptors,
// reverb descriptors, each alphabetically with ascending levels.
Manifest render_variants(const AudioBuffer& reference, const DescriptorSettingsMap& settings,
                         std::span<const double> levels, const std::filesystem::path& output_dir,
                         RenderStats* stats = nullptr, unsigned threads = 0);

struct DeltaRecord {
  std::string descriptor;
  EffectKind effect = EffectKind::kEq;
  double level = 0.0;
  double delta = 0.0;
};

// delta = cos(t_d, emb(variant)) - cos(t_d, emb(reference)) for every
// non-reference manifest item. `audio_by_item` is keyed by item_id.
std::vector<DeltaRecord> compute_deltas(const Manifest& manifest, const EmbeddingIndex& text_by_descriptor,
                                        const EmbeddingIndex& audio_by_item);

struct TrendRow {
  std::string descriptor;
  std::vector<TrendClass> trends;  // one per model column
};

struct TrendTable {
  EffectKind effect = EffectKind::kEq;
  std::vector<std::string> models;
  std::vector<TrendRow> rows;  // sorted by descriptor
};

struct ModelDeltas {
  std::string model;
  std::vector<DeltaRecord> deltas;
};

// Classifies each descriptor's deltas over `levels` (ascending) for one
// effect. Every model must supply exactly one delta per descriptor and level.
TrendTable build_trend_table(std::span<const ModelDeltas> per_model, EffectKind effect,
                             std::span<const double> levels, double tolerance = kDefaultTrendTolerance);

// Markdown table with one symbol per cell followed by the legend line.
std::string render_trend_table(const TrendTable& table);

}  // namespace tbench
