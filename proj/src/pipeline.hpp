#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "effects.hpp"
#include "instruments.hpp"

namespace tbench {

// Output layout under RunConfig::output_dir.
namespace layout {
inline constexpr const char* kManifest = "manifest.jsonl";
inline constexpr const char* kEmbeddingsDir = "embeddings";
inline constexpr const char* kInstrumentsDir = "instruments";
inline constexpr const char* kEffectsDir = "effects";
inline constexpr const char* kDescriptorCsv = "descriptor_correlations.csv";
inline constexpr const char* kInstrumentCsv = "instrument_correlations.csv";
inline constexpr const char* kScatterCsv = "scatter.csv";
inline constexpr const char* kSummaryCsv = "summary.csv";
inline constexpr const char* kDeltasCsv = "deltas.csv";
inline constexpr const char* kTrendCountsCsv = "trend_counts.csv";
inline constexpr const char* kReport = "report.md";

// Directory name used for a model's outputs.
std::string model_dir(const std::string& model_name);
std::string trends_csv(EffectKind effect);
std::string trends_table(EffectKind effect);
}  // namespace layout

struct RenderOutcome {
  std::filesystem::path manifest_path;
  std::size_t items = 0;
  std::size_t rendered = 0;
  std::size_t reused = 0;
  std::vector<std::string> warnings;
};

struct ModelEmbedOutcome {
  std::string model;
  std::size_t requested = 0;
  std::size_t cache_hits = 0;
  std::size_t invocations = 0;
  std::filesystem::path file;
};

struct InstrumentModelOutcome {
  std::string model;
  CorrelationSummary descriptor_summary;
  CorrelationSummary chinese_summary;
  CorrelationSummary western_summary;
  CorrelationSummary instrument_summary;  // both groups
  std::vector<LabeledCorrelation> descriptor_r;
  std::vector<InstrumentCorrelation> instrument_r;
};

struct EffectsOutcome {
  std::vector<TrendTable> tables;  // one per effect with descriptors
  std::size_t delta_rows = 0;
  RenderOutcome render;
};

// render: writes renders/ and manifest.jsonl.
RenderOutcome cmd_render(const RunConfig& config);

// embed: embeds every available input (descriptor texts, instrument clips,
// manifest items) for each active adapter into embeddings/<model>.jsonl.
std::vector<ModelEmbedOutcome> cmd_embed(const RunConfig& config);

// eval-instruments: per-model correlation CSVs, scatter data and summary.
std::vector<InstrumentModelOutcome> cmd_eval_instruments(const RunConfig& config);

// eval-effects: renders (reusing cached files), embeds, then writes
// deltas.csv, per-effect trend tables and per-model trend counts.
EffectsOutcome cmd_eval_effects(const RunConfig& config);

// report: rebuilds every summary from the emitted CSVs into report.md and
// returns its text.
std::string cmd_report(const RunConfig& config);

// Audio clips for one instrument: <dir>/<id>.wav or <dir>/<id>/*.wav, sorted.
std::vector<std::filesystem::path> instrument_clips(const std::filesystem::path& dir, const std::string& instrument_id);

}  // namespace tbench
