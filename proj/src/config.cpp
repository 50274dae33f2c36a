#include "config.hpp"

#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <set>

#include <json.hpp>

#include "csv.hpp"
#include "dsp.hpp"
#include "effects.hpp"
#include "error.hpp"
#include "fileutil.hpp"
#include "stats.hpp"

namespace tbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
  if (value.empty()) return {};
  fs::path p(value);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

RunConfig::RunConfig() : levels(kDefaultLevels), tolerance(kDefaultTrendTolerance) {}

std::vector<AdapterSpec> RunConfig::active_adapters() const {
  if (selected_adapters.empty()) return adapters;
  std::vector<AdapterSpec> out;
  for (const auto& name : selected_adapters) {
    bool found = false;
    for (const auto& a : adapters) {
      if (a.name == name) {
        out.push_back(a);
        found = true;
      }
    }
    if (!found) fail(ErrorKind::kInvalidInput, "unknown adapter '" + name + "'");
  }
  return out;
}

fs::path RunConfig::effective_cache_dir() const {
  if (const char* env = std::getenv(kCacheDirEnv); env && *env) return fs::path(env);
  if (!cache_dir.empty()) return cache_dir;
  return output_dir / "cache";
}

void RunConfig::validate() const {
  if (adapters.empty()) fail(ErrorKind::kInvalidInput, "config: at least one adapter is required");
  std::set<std::string> names, models;
  for (const auto& a : adapters) {
    if (a.name.empty()) fail(ErrorKind::kInvalidInput, "config: adapter without a name");
    if (a.command.empty()) fail(ErrorKind::kInvalidInput, "config: adapter '" + a.name + "' has an empty command");
    if (!names.insert(a.name).second) fail(ErrorKind::kInvalidInput, "config: duplicate adapter name " + a.name);
    if (!models.insert(a.model_name).second) {
      fail(ErrorKind::kInvalidInput, "config: duplicate model_name " + a.model_name);
    }
    if (a.expected_dim && *a.expected_dim == 0) {
      fail(ErrorKind::kInvalidInput, "config: adapter '" + a.name + "' expected_dim must be positive");
    }
  }
  validate_levels(levels);
  if (!(tolerance >= 0.0) || !std::isfinite(tolerance)) {
    fail(ErrorKind::kInvalidInput, "config: tolerance must be finite and >= 0");
  }
  if (output_dir.empty()) fail(ErrorKind::kInvalidInput, "config: output_dir is required");
}

RunConfig parse_run_config(std::string_view text, const fs::path& base_dir, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kInvalidInput, fmt::format("{}: invalid JSON: {}", source, e.what()));
  }
  if (!doc.is_object()) fail(ErrorKind::kInvalidInput, fmt::format("{}: config must be a JSON object", source));

  static const std::set<std::string> kKnown = {
      "adapters",       "reference_audio", "ratings_csv", "instrument_audio_dir", "eq_settings",
      "reverb_settings", "levels",         "tolerance",   "prompt_template",      "output_dir",
      "cache_dir",       "threads"};
  for (const auto& [key, value] : doc.items()) {
    if (!kKnown.count(key)) fail(ErrorKind::kInvalidInput, fmt::format("{}: unknown config key '{}'", source, key));
  }

  RunConfig cfg;
  try {
    for (const auto& a : doc.value("adapters", json::array())) {
      AdapterSpec spec;
      spec.name = a.at("name").get<std::string>();
      spec.command = a.at("command").get<std::string>();
      spec.model_name = a.value("model_name", spec.name);
      if (a.contains("expected_dim") && !a.at("expected_dim").is_null()) {
        const auto dim = a.at("expected_dim").get<std::int64_t>();
        if (dim <= 0) fail(ErrorKind::kInvalidInput, "adapter '" + spec.name + "': expected_dim must be positive");
        spec.expected_dim = static_cast<std::size_t>(dim);
      }
      cfg.adapters.push_back(std::move(spec));
    }
    auto path_of = [&](const char* key) { return resolve(base_dir, doc.value(key, std::string())); };
    cfg.reference_audio = path_of("reference_audio");
    cfg.ratings_csv = path_of("ratings_csv");
    cfg.instrument_audio_dir = path_of("instrument_audio_dir");
    cfg.eq_settings = path_of("eq_settings");
    cfg.reverb_settings = path_of("reverb_settings");
    cfg.output_dir = path_of("output_dir");
    cfg.cache_dir = path_of("cache_dir");
    if (doc.contains("levels")) cfg.levels = doc.at("levels").get<std::vector<double>>();
    if (doc.contains("tolerance")) cfg.tolerance = doc.at("tolerance").get<double>();
    if (doc.contains("prompt_template") && !doc.at("prompt_template").is_null()) {
      cfg.prompt_template = doc.at("prompt_template").get<std::string>();
    }
    if (doc.contains("threads")) cfg.threads = doc.at("threads").get<unsigned>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kInvalidInput, fmt::format("{}: {}", source, e.what()));
  } catch (const Error& e) {
    fail(ErrorKind::kInvalidInput, fmt::format("{}: {}", source, e.what()));
  }
  if (cfg.output_dir.empty()) cfg.output_dir = base_dir / "out";
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) fail(ErrorKind::kInvalidInput, "config file not found: " + path.string());
  const auto base = fs::absolute(path).parent_path();
  return parse_run_config(read_file(path), base, path.string());
}

std::vector<double> parse_level_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(parse_real(text.substr(start, end - start), "--levels"));
    start = end + 1;
  }
  validate_levels(out);
  return out;
}

std::string descriptor_prompt(const RunConfig& config, const std::string& descriptor) {
  if (!config.prompt_template) return descriptor;
  std::string out = *config.prompt_template;
  const auto pos = out.find("{}");
  if (pos == std::string::npos) return out + " " + descriptor;
  out.replace(pos, 2, descriptor);
  return out;
}

}  // namespace tbench
