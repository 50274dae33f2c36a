#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "embedding.hpp"

namespace tbench {

inline constexpr const char* kCacheDirEnv = "TBENCH_CACHE_DIR";

// One JSON document capturing every choice of a run. Relative paths are
// resolved against the config file's directory.
//
//   {
//     "adapters": [{"name", "command", "model_name", "expected_dim"?}],
//     "reference_audio", "ratings_csv", "instrument_audio_dir",
//     "eq_settings", "reverb_settings",
//     "levels": [0.3, 0.6, 1.0], "tolerance": 1e-4,
//     "prompt_template": "a {} sound" | null,
//     "output_dir", "cache_dir"?, "threads"?
//   }
struct RunConfig {
  std::vector<AdapterSpec> adapters;
  std::filesystem::path reference_audio;
  std::filesystem::path ratings_csv;
  std::filesystem::path instrument_audio_dir;
  std::filesystem::path eq_settings;
  std::filesystem::path reverb_settings;
  std::vector<double> levels;
  double tolerance;
  std::optional<std::string> prompt_template;
  std::filesystem::path output_dir;
  std::filesystem::path cache_dir;
  unsigned threads = 0;
  // Subset of adapter names selected on the command line; empty means all.
  std::vector<std::string> selected_adapters;

  RunConfig();

  // Adapters in config order, filtered by `selected_adapters`.
  std::vector<AdapterSpec> active_adapters() const;
  // Cache location: the environment variable wins, then "cache_dir", then
  // <output_dir>/cache.
  std::filesystem::path effective_cache_dir() const;

  void validate() const;
};

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir,
                           std::string_view source = "<memory>");
RunConfig load_run_config(const std::filesystem::path& path);

// "0.3,0.6,1.0" -> {0.3, 0.6, 1.0}
std::vector<double> parse_level_list(std::string_view text);

// Descriptor text sent to the embedder: the template with "{}" replaced, or
// the bare descriptor when no template is set.
std::string descriptor_prompt(const RunConfig& config, const std::string& descriptor);

}  // namespace tbench
