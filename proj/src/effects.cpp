#include "effects.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fmt/format.h>
#include <set>
#include <thread>

#include <json.hpp>

#include "error.hpp"
#include "fileutil.hpp"
#include "hashing.hpp"

namespace tbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Yields (record, label) pairs from JSON Lines or a top-level JSON array.
std::vector<std::pair<json, std::string>> read_records(std::string_view text, std::string_view source) {
  std::vector<std::pair<json, std::string>> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return out;
  if (text[first] == '[') {
    json arr;
    try {
      arr = json::parse(text);
    } catch (const json::exception& e) {
      fail(ErrorKind::kInvalidInput, fmt::format("{}: invalid JSON: {}", source, e.what()));
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out.emplace_back(arr[i], fmt::format("{}: record {}", source, i + 1));
    }
    return out;
  }
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    const auto nb = line.find_first_not_of(" \t\r");
    if (nb == std::string_view::npos || line[nb] == '#') continue;
    try {
      out.emplace_back(json::parse(line), fmt::format("{}:{}", source, line_no));
    } catch (const json::exception& e) {
      fail(ErrorKind::kInvalidInput, fmt::format("{}:{}: invalid JSON: {}", source, line_no, e.what()));
    }
  }
  return out;
}

double number_field(const json& rec, const char* key, const std::string& where, const std::string& descriptor) {
  if (!rec.contains(key)) {
    fail(ErrorKind::kInvalidInput, fmt::format("{}: descriptor {}: missing field {}", where, descriptor, key));
  }
  const auto& v = rec.at(key);
  if (!v.is_number()) {
    fail(ErrorKind::kInvalidInput, fmt::format("{}: descriptor {}: field {} is not a number", where, descriptor, key));
  }
  return v.get<double>();
}

std::string descriptor_field(const json& rec, const std::string& where) {
  if (!rec.is_object() || !rec.contains("descriptor") || !rec.at("descriptor").is_string()) {
    fail(ErrorKind::kInvalidInput, where + ": record needs a string 'descriptor'");
  }
  auto d = rec.at("descriptor").get<std::string>();
  if (d.empty()) fail(ErrorKind::kInvalidInput, where + ": empty descriptor");
  return d;
}

json canonical(const EqSettings& s) {
  json bands = json::array();
  for (const auto& b : s.bands) {
    bands.push_back({{"freq_hz", b.center_hz}, {"bandwidth_hz", b.bandwidth_hz}, {"gain_db", b.gain_db}});
  }
  return {{"descriptor", s.descriptor}, {"bands", bands}};
}

json canonical(const ReverbSettings& s) {
  return {{"descriptor", s.descriptor},
          {"decay_s", s.decay_s},
          {"feedback_gain", s.feedback_gain},
          {"modulation_hz", s.modulation_hz},
          {"modulation_depth_ms", s.modulation_depth_ms},
          {"lowpass_hz", s.lowpass_hz},
          {"effect_gain", s.effect_gain},
          {"wet_dry", s.wet_dry}};
}

std::string file_stem_for(std::string_view descriptor) {
  std::string out;
  for (char c : descriptor) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-';
    out += ok ? c : '_';
  }
  return out.substr(0, 48);
}

std::string item_id_for(EffectKind effect, const std::string& descriptor, double level) {
  return fmt::format("{}/{}/{}", effect_name(effect), descriptor, format_level(level));
}

struct RenderJob {
  std::size_t item_index;
  const Effect* effect;
  double level;
};

}  // namespace

std::string_view effect_name(EffectKind effect) { return effect == EffectKind::kEq ? "eq" : "reverb"; }

EffectKind parse_effect(std::string_view text) {
  if (text == "eq") return EffectKind::kEq;
  if (text == "reverb") return EffectKind::kReverb;
  fail(ErrorKind::kInvalidInput, fmt::format("unknown effect '{}'", text));
}

std::map<std::string, EqSettings> parse_eq_settings(std::string_view text, std::string_view source) {
  std::map<std::string, EqSettings> out;
  for (const auto& [rec, where] : read_records(text, source)) {
    EqSettings s;
    s.descriptor = descriptor_field(rec, where);
    if (!rec.contains("bands") || !rec.at("bands").is_array()) {
      fail(ErrorKind::kInvalidInput, fmt::format("{}: descriptor {}: missing 'bands' array", where, s.descriptor));
    }
    for (const auto& b : rec.at("bands")) {
      if (!b.is_object()) {
        fail(ErrorKind::kInvalidInput, fmt::format("{}: descriptor {}: band is not an object", where, s.descriptor));
      }
      s.bands.push_back({number_field(b, "freq_hz", where, s.descriptor),
                         number_field(b, "bandwidth_hz", where, s.descriptor),
                         number_field(b, "gain_db", where, s.descriptor)});
    }
    try {
      s.validate();
    } catch (const Error& e) {
      fail(ErrorKind::kInvalidInput, where + ": " + e.what());
    }
    auto name = s.descriptor;
    if (!out.emplace(name, std::move(s)).second) {
      fail(ErrorKind::kInvalidInput, fmt::format("{}: duplicate EQ descriptor {}", where, name));
    }
  }
  return out;
}

std::map<std::string, ReverbSettings> parse_reverb_settings(std::string_view text, std::string_view source) {
  std::map<std::string, ReverbSettings> out;
  for (const auto& [rec, where] : read_records(text, source)) {
    ReverbSettings s;
    s.descriptor = descriptor_field(rec, where);
    s.decay_s = number_field(rec, "decay_s", where, s.descriptor);
    s.feedback_gain = number_field(rec, "feedback_gain", where, s.descriptor);
    s.modulation_hz = number_field(rec, "modulation_hz", where, s.descriptor);
    s.modulation_depth_ms = number_field(rec, "modulation_depth_ms", where, s.descriptor);
    s.lowpass_hz = number_field(rec, "lowpass_hz", where, s.descriptor);
    s.effect_gain = number_field(rec, "effect_gain", where, s.descriptor);
    s.wet_dry = number_field(rec, "wet_dry", where, s.descriptor);
    try {
      s.validate();
    } catch (const Error& e) {
      fail(ErrorKind::kInvalidInput, where + ": " + e.what());
    }
    auto name = s.descriptor;
    if (!out.emplace(name, std::move(s)).second) {
      fail(ErrorKind::kInvalidInput, fmt::format("{}: duplicate reverb descriptor {}", where, name));
    }
  }
  return out;
}

DescriptorSettingsMap load_settings(const fs::path& eq_path, const fs::path& reverb_path) {
  DescriptorSettingsMap map;
  if (!eq_path.empty()) map.eq = parse_eq_settings(read_file(eq_path), eq_path.string());
  if (!reverb_path.empty()) map.reverb = parse_reverb_settings(read_file(reverb_path), reverb_path.string());
  return map;
}

std::string settings_hash(const EqSettings& settings) { return sha256_hex(canonical(settings).dump()); }
std::string settings_hash(const ReverbSettings& settings) { return sha256_hex(canonical(settings).dump()); }

void validate_levels(std::span<const double> levels) {
  if (levels.empty()) fail(ErrorKind::kInvalidInput, "level set is empty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    EffectLevel check(levels[i]);
    if (i > 0 && !(levels[i] > levels[i - 1])) {
      fail(ErrorKind::kInvalidInput, "levels must be strictly increasing");
    }
  }
}

std::string format_level(double level) { return fmt::format("{}", level); }

const ManifestItem& Manifest::reference() const {
  for (const auto& item : items) {
    if (item.is_reference()) return item;
  }
  fail(ErrorKind::kInvalidInput, "manifest has no reference item");
}

std::string format_manifest(const Manifest& manifest) {
  std::string out;
  for (const auto& item : manifest.items) {
    json rec = json::object();
    rec["item_id"] = item.item_id;
    rec["path"] = item.path;
    rec["descriptor"] = item.descriptor ? json(*item.descriptor) : json(nullptr);
    rec["effect"] = item.effect ? json(effect_name(*item.effect)) : json(nullptr);
    rec["level"] = item.level ? json(*item.level) : json(nullptr);
    rec["provenance_hash"] = item.provenance_hash;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

Manifest parse_manifest(std::string_view text, std::string_view source) {
  Manifest m;
  std::set<std::string> ids;
  for (const auto& [rec, where] : read_records(text, source)) {
    ManifestItem item;
    try {
      item.item_id = rec.at("item_id").get<std::string>();
      item.path = rec.at("path").get<std::string>();
      if (!rec.at("descriptor").is_null()) item.descriptor = rec.at("descriptor").get<std::string>();
      if (!rec.at("effect").is_null()) item.effect = parse_effect(rec.at("effect").get<std::string>());
      if (!rec.at("level").is_null()) item.level = rec.at("level").get<double>();
      item.provenance_hash = rec.at("provenance_hash").get<std::string>();
    } catch (const json::exception& e) {
      fail(ErrorKind::kInvalidInput, fmt::format("{}: malformed manifest record: {}", where, e.what()));
    }
    if (item.effect.has_value() != item.descriptor.has_value() || item.effect.has_value() != item.level.has_value()) {
      fail(ErrorKind::kInvalidInput, where + ": descriptor, effect and level must be all set or all null");
    }
    if (!ids.insert(item.item_id).second) {
      fail(ErrorKind::kInvalidInput, fmt::format("{}: duplicate item_id {}", where, item.item_id));
    }
    m.items.push_back(std::move(item));
  }
  return m;
}

Manifest load_manifest(const fs::path& path) { return parse_manifest(read_file(path), path.string()); }

void save_manifest(const Manifest& manifest, const fs::path& path) {
  write_file_atomic(path, format_manifest(manifest));
}

Manifest render_variants(const AudioBuffer& reference, const DescriptorSettingsMap& settings,
                         std::span<const double> levels, const fs::path& output_dir, RenderStats* stats,
                         unsigned threads) {
  validate_levels(levels);
  if (reference.empty()) fail(ErrorKind::kInvalidInput, "reference audio is empty");

  const auto ref_bytes = encode_wav(reference, WavFormat::kFloat32);
  const std::string_view ref_view(reinterpret_cast<const char*>(ref_bytes.data()), ref_bytes.size());
  const auto ref_hash = sha256_hex(ref_view);
  const fs::path renders = output_dir / "renders";

  RenderStats local;
  Manifest manifest;
  {
    ManifestItem ref;
    ref.item_id = std::string(kReferenceItemId);
    ref.path = fmt::format("renders/reference-{}.wav", ref_hash.substr(0, 16));
    ref.provenance_hash = ref_hash;
    if (fs::exists(output_dir / ref.path)) {
      ++local.reused;
    } else {
      write_file_atomic(output_dir / ref.path, ref_view);
      ++local.rendered;
    }
    manifest.items.push_back(std::move(ref));
  }

  // Effects are stored so RenderJob can point at them.
  std::vector<std::pair<EffectKind, Effect>> effects;
  for (const auto& [name, s] : settings.eq) effects.emplace_back(EffectKind::kEq, s);
  for (const auto& [name, s] : settings.reverb) effects.emplace_back(EffectKind::kReverb, s);

  std::vector<RenderJob> jobs;
  for (const auto& [kind, effect] : effects) {
    const auto& descriptor = std::visit([](const auto& s) -> const std::string& { return s.descriptor; }, effect);
    const auto s_hash = std::visit([](const auto& s) { return settings_hash(s); }, effect);
    for (double level : levels) {
      ManifestItem item;
      item.item_id = item_id_for(kind, descriptor, level);
      item.descriptor = descriptor;
      item.effect = kind;
      item.level = level;
      item.provenance_hash = sha256_hex(json{{"reference", ref_hash},
                                             {"effect", effect_name(kind)},
                                             {"settings", s_hash},
                                             {"level", level}}
                                            .dump());
      item.path = fmt::format("renders/{}/{}-l{}-{}.wav", effect_name(kind), file_stem_for(descriptor),
                              format_level(level), item.provenance_hash.substr(0, 16));
      if (fs::exists(output_dir / item.path)) {
        ++local.reused;
      } else {
        jobs.push_back({manifest.items.size(), &effect, level});
      }
      manifest.items.push_back(std::move(item));
    }
  }

  std::vector<std::vector<std::string>> job_warnings(jobs.size());
  std::vector<std::exception_ptr> job_errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto& job = jobs[j];
      const auto& item = manifest.items[job.item_index];
      try {
        auto out = fx(reference, *job.effect, EffectLevel(job.level));
        write_wav(out.audio, output_dir / item.path, WavFormat::kFloat32);
        job_warnings[j] = std::move(out.warnings);
      } catch (const Error& e) {
        job_errors[j] = std::make_exception_ptr(
            Error(e.kind(), fmt::format("rendering {}: {}", item.item_id, e.what())));
      } catch (...) {
        job_errors[j] = std::current_exception();
      }
    }
  };
  unsigned n_threads = threads ? threads : std::max(1U, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, jobs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (auto& err : job_errors) {
    if (err) std::rethrow_exception(err);
  }
  for (auto& w : job_warnings) {
    local.warnings.insert(local.warnings.end(), w.begin(), w.end());
  }
  local.rendered += jobs.size();
  if (stats) *stats = std::move(local);
  return manifest;
}

std::vector<DeltaRecord> compute_deltas(const Manifest& manifest, const EmbeddingIndex& text_by_descriptor,
                                        const EmbeddingIndex& audio_by_item) {
  const auto& ref_item = manifest.reference();
  auto find_audio = [&](const ManifestItem& item) -> const Embedding& {
    auto it = audio_by_item.find(item.item_id);
    if (it == audio_by_item.end()) fail(ErrorKind::kInvalidInput, "missing audio embedding for manifest item " + item.item_id);
    return it->second;
  };
  const auto& ref = find_audio(ref_item);
  std::vector<DeltaRecord> out;
  std::map<std::string, double, std::less<>> baseline;
  for (const auto& item : manifest.items) {
    if (item.is_reference()) continue;
    const auto& descriptor = *item.descriptor;
    auto t = text_by_descriptor.find(descriptor);
    if (t == text_by_descriptor.end()) {
      fail(ErrorKind::kInvalidInput, "missing text embedding for descriptor " + descriptor);
    }
    auto base = baseline.find(descriptor);
    if (base == baseline.end()) base = baseline.emplace(descriptor, cosine_similarity(t->second, ref)).first;
    const double sim = cosine_similarity(t->second, find_audio(item));
    out.push_back({descriptor, *item.effect, *item.level, sim - base->second});
  }
  return out;
}

TrendTable build_trend_table(std::span<const ModelDeltas> per_model, EffectKind effect, std::span<const double> levels,
                             double tolerance) {
  validate_levels(levels);
  TrendTable table;
  table.effect = effect;
  // descriptor -> per-model trend
  std::map<std::string, std::vector<TrendClass>> rows;
  for (std::size_t m = 0; m < per_model.size(); ++m) {
    const auto& md = per_model[m];
    table.models.push_back(md.model);
    std::map<std::string, std::vector<std::optional<double>>> by_descriptor;
    for (const auto& rec : md.deltas) {
      if (rec.effect != effect) continue;
      auto& slots = by_descriptor.try_emplace(rec.descriptor, levels.size()).first->second;
      const auto pos = std::find(levels.begin(), levels.end(), rec.level);
      if (pos == levels.end()) {
        fail(ErrorKind::kInvalidInput, fmt::format("model {}: {} {} has delta at unconfigured level {}", md.model,
                                                   effect_name(effect), rec.descriptor, format_level(rec.level)));
      }
      auto& slot = slots[static_cast<std::size_t>(pos - levels.begin())];
      if (slot) {
        fail(ErrorKind::kInvalidInput, fmt::format("model {}: duplicate delta for {} {} level {}", md.model,
                                                   effect_name(effect), rec.descriptor, format_level(rec.level)));
      }
      slot = rec.delta;
    }
    if (m > 0 && by_descriptor.size() != rows.size()) {
      fail(ErrorKind::kInvalidInput, fmt::format("model {} covers a different {} descriptor set", md.model,
                                                 effect_name(effect)));
    }
    for (const auto& [descriptor, slots] : by_descriptor) {
      std::vector<double> values;
      for (std::size_t k = 0; k < slots.size(); ++k) {
        if (!slots[k]) {
          fail(ErrorKind::kInvalidInput, fmt::format("model {}: {} {} is missing level {}", md.model,
                                                     effect_name(effect), descriptor, format_level(levels[k])));
        }
        values.push_back(*slots[k]);
      }
      auto& row = rows[descriptor];
      if (row.size() != m) {
        fail(ErrorKind::kInvalidInput, fmt::format("model {} covers a different {} descriptor set", md.model,
                                                   effect_name(effect)));
      }
      row.push_back(classify_trend(values, tolerance));
    }
  }
  for (auto& [descriptor, trends] : rows) table.rows.push_back({descriptor, std::move(trends)});
  return table;
}

std::string render_trend_table(const TrendTable& table) {
  std::string out = "| Descriptor |";
  for (const auto& m : table.models) out += " " + m + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < table.models.size(); ++i) out += ":---:|";
  out += '\n';
  for (const auto& row : table.rows) {
    out += "| " + row.descriptor + " |";
    for (auto t : row.trends) out += fmt::format(" {} |", trend_symbol(t));
    out += '\n';
  }
  out += fmt::format("\nLegend: {}\n", kTrendLegend);
  return out;
}

}  // namespace tbench
