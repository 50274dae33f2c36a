#include "pipeline.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <map>
#include <set>

#include "audio.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "fileutil.hpp"

namespace tbench {

namespace fs = std::filesystem;

namespace layout {

std::string model_dir(const std::string& model_name) {
  std::string out;
  for (char c : model_name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

std::string trends_csv(EffectKind effect) { return fmt::format("trends_{}.csv", effect_name(effect)); }
std::string trends_table(EffectKind effect) { return fmt::format("trends_{}.md", effect_name(effect)); }

}  // namespace layout

namespace {

constexpr std::array<TrendClass, 5> kAllTrends = {TrendClass::kMonotonicUp, TrendClass::kMonotonicDown,
                                                  TrendClass::kPeaked, TrendClass::kDipped, TrendClass::kFlat};

void require_path(const fs::path& path, const char* what) {
  if (path.empty()) fail(ErrorKind::kInvalidInput, fmt::format("config does not set {}", what));
  std::error_code ec;
  if (!fs::exists(path, ec)) fail(ErrorKind::kInvalidInput, fmt::format("{} not found: {}", what, path.string()));
}

std::string text_id(const std::string& descriptor) { return "text:" + descriptor; }

std::string format_r(const std::optional<double>& r) { return r ? format_real(*r) : "NA"; }

std::optional<double> parse_r(const std::string& text, std::string_view where) {
  if (text == "NA") return std::nullopt;
  return parse_real(text, where);
}

std::string format_mean(const std::optional<double>& mean) { return mean ? fmt::format("{:.2f}", *mean) : "n/a"; }

std::vector<Embedding> embed(const RunConfig& config, const AdapterSpec& adapter,
                             const std::vector<EmbedRequest>& requests, AdapterRunStats* stats = nullptr) {
  AdapterOptions options;
  options.cache_dir = config.effective_cache_dir();
  options.work_dir = config.output_dir / "work" / layout::model_dir(adapter.model_name);
  return run_adapter(adapter, requests, options, stats);
}

void append_text_requests(const RunConfig& config, const std::set<std::string>& descriptors,
                          std::vector<EmbedRequest>& out) {
  for (const auto& d : descriptors) out.push_back({text_id(d), Modality::kText, descriptor_prompt(config, d)});
}

struct ClipRequests {
  std::vector<EmbedRequest> requests;
  std::vector<std::pair<std::string, std::vector<std::string>>> ids_by_instrument;
};

ClipRequests clip_requests(const RunConfig& config, const RatingsTable& ratings) {
  ClipRequests out;
  for (const auto& inst : ratings.instruments) {
    auto& ids = out.ids_by_instrument.emplace_back(inst.id, std::vector<std::string>{}).second;
    for (const auto& clip : instrument_clips(config.instrument_audio_dir, inst.id)) {
      const auto id = fmt::format("clip:{}:{}", inst.id, clip.filename().string());
      out.requests.push_back({id, Modality::kAudio, fs::absolute(clip).string()});
      ids.push_back(id);
    }
  }
  return out;
}

std::vector<EmbedRequest> manifest_requests(const RunConfig& config, const Manifest& manifest) {
  std::vector<EmbedRequest> out;
  for (const auto& item : manifest.items) {
    out.push_back({item.item_id, Modality::kAudio, fs::absolute(config.output_dir / item.path).string()});
  }
  return out;
}

EmbeddingIndex index_by_id(std::vector<Embedding> embs) {
  EmbeddingIndex out;
  for (auto& e : embs) {
    auto id = e.id;
    out.emplace(std::move(id), std::move(e));
  }
  return out;
}

EmbeddingIndex text_index(const EmbeddingIndex& all, const std::set<std::string>& descriptors) {
  EmbeddingIndex out;
  for (const auto& d : descriptors) {
    auto it = all.find(text_id(d));
    if (it != all.end()) out.emplace(d, it->second);
  }
  return out;
}

std::string summary_row(const char* scope, const char* group, const CorrelationSummary& s) {
  return csv_line({scope, group, std::to_string(s.total), std::to_string(s.positive_count),
                   std::to_string(s.negative_count), std::to_string(s.undefined_count),
                   s.mean_r ? format_real(*s.mean_r) : "NA"});
}

std::map<TrendClass, std::size_t> count_column(const TrendTable& table, std::size_t column) {
  std::map<TrendClass, std::size_t> counts;
  for (auto t : kAllTrends) counts[t] = 0;
  for (const auto& row : table.rows) ++counts[row.trends[column]];
  return counts;
}

std::vector<ModelDeltas> parse_deltas_csv(const fs::path& path) {
  const auto csv = parse_csv(read_file(path), path.string());
  const auto c_desc = csv.column("descriptor");
  const auto c_effect = csv.column("effect");
  const auto c_level = csv.column("level");
  const auto c_model = csv.column("model");
  const auto c_delta = csv.column("delta");
  std::vector<ModelDeltas> out;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const auto where = fmt::format("{}:{}", path.string(), csv.line_numbers[r]);
    auto it = std::find_if(out.begin(), out.end(), [&](const ModelDeltas& m) { return m.model == row[c_model]; });
    if (it == out.end()) it = out.insert(out.end(), ModelDeltas{row[c_model], {}});
    it->deltas.push_back({row[c_desc], parse_effect(row[c_effect]), parse_real(row[c_level], where),
                          parse_real(row[c_delta], where)});
  }
  return out;
}

std::vector<double> levels_of(const std::vector<ModelDeltas>& per_model, EffectKind effect) {
  std::set<double> levels;
  for (const auto& m : per_model) {
    for (const auto& d : m.deltas) {
      if (d.effect == effect) levels.insert(d.level);
    }
  }
  return {levels.begin(), levels.end()};
}

}  // namespace

std::vector<fs::path> instrument_clips(const fs::path& dir, const std::string& instrument_id) {
  std::vector<fs::path> clips;
  std::error_code ec;
  const auto single = dir / (instrument_id + ".wav");
  if (fs::is_regular_file(single, ec)) clips.push_back(single);
  const auto sub = dir / instrument_id;
  if (fs::is_directory(sub, ec)) {
    for (const auto& entry : fs::directory_iterator(sub)) {
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (entry.is_regular_file() && ext == ".wav") clips.push_back(entry.path());
    }
  }
  std::sort(clips.begin(), clips.end());
  if (clips.empty()) {
    fail(ErrorKind::kInvalidInput, fmt::format("no audio clips for instrument {} under {}", instrument_id, dir.string()));
  }
  return clips;
}

RenderOutcome cmd_render(const RunConfig& config) {
  config.validate();
  require_path(config.reference_audio, "reference_audio");
  if (!config.eq_settings.empty()) require_path(config.eq_settings, "eq_settings");
  if (!config.reverb_settings.empty()) require_path(config.reverb_settings, "reverb_settings");
  const auto settings = load_settings(config.eq_settings, config.reverb_settings);
  const auto reference = read_wav(config.reference_audio);

  RenderStats stats;
  const auto manifest = render_variants(reference, settings, config.levels, config.output_dir, &stats, config.threads);
  RenderOutcome out;
  out.manifest_path = config.output_dir / layout::kManifest;
  save_manifest(manifest, out.manifest_path);
  out.items = manifest.items.size();
  out.rendered = stats.rendered;
  out.reused = stats.reused;
  out.warnings = std::move(stats.warnings);
  return out;
}

std::vector<ModelEmbedOutcome> cmd_embed(const RunConfig& config) {
  config.validate();
  std::error_code ec;
  std::set<std::string> descriptors;
  std::optional<RatingsTable> ratings;
  if (!config.ratings_csv.empty()) {
    require_path(config.ratings_csv, "ratings_csv");
    ratings = load_ratings_csv(config.ratings_csv);
    descriptors.insert(ratings->descriptors.begin(), ratings->descriptors.end());
  }
  if (!config.eq_settings.empty()) require_path(config.eq_settings, "eq_settings");
  if (!config.reverb_settings.empty()) require_path(config.reverb_settings, "reverb_settings");
  const auto settings = load_settings(config.eq_settings, config.reverb_settings);
  for (const auto& [d, s] : settings.eq) descriptors.insert(d);
  for (const auto& [d, s] : settings.reverb) descriptors.insert(d);

  std::vector<EmbedRequest> requests;
  append_text_requests(config, descriptors, requests);
  if (ratings && !config.instrument_audio_dir.empty()) {
    require_path(config.instrument_audio_dir, "instrument_audio_dir");
    auto clips = clip_requests(config, *ratings);
    requests.insert(requests.end(), clips.requests.begin(), clips.requests.end());
  }
  const auto manifest_path = config.output_dir / layout::kManifest;
  if (fs::exists(manifest_path, ec)) {
    auto items = manifest_requests(config, load_manifest(manifest_path));
    requests.insert(requests.end(), items.begin(), items.end());
  }
  if (requests.empty()) fail(ErrorKind::kInvalidInput, "nothing to embed: no descriptors, clips or manifest");

  std::vector<ModelEmbedOutcome> out;
  for (const auto& adapter : config.active_adapters()) {
    AdapterRunStats stats;
    const auto embs = embed(config, adapter, requests, &stats);
    ModelEmbedOutcome o;
    o.model = adapter.model_name;
    o.requested = stats.requested;
    o.cache_hits = stats.cache_hits;
    o.invocations = stats.invocations;
    o.file = config.output_dir / layout::kEmbeddingsDir / (layout::model_dir(adapter.model_name) + ".jsonl");
    save_embeddings(embs, o.file);
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<InstrumentModelOutcome> cmd_eval_instruments(const RunConfig& config) {
  config.validate();
  require_path(config.ratings_csv, "ratings_csv");
  require_path(config.instrument_audio_dir, "instrument_audio_dir");
  const auto ratings = load_ratings_csv(config.ratings_csv);
  const std::set<std::string> descriptor_set(ratings.descriptors.begin(), ratings.descriptors.end());
  const auto clips = clip_requests(config, ratings);
  std::vector<std::string> instrument_ids;
  for (const auto& inst : ratings.instruments) instrument_ids.push_back(inst.id);

  std::vector<EmbedRequest> requests;
  append_text_requests(config, descriptor_set, requests);
  requests.insert(requests.end(), clips.requests.begin(), clips.requests.end());

  std::vector<InstrumentModelOutcome> out;
  for (const auto& adapter : config.active_adapters()) {
    const auto all = index_by_id(embed(config, adapter, requests));
    const auto text = text_index(all, descriptor_set);
    EmbeddingIndex audio;
    for (const auto& [inst_id, ids] : clips.ids_by_instrument) {
      std::vector<Embedding> per_clip;
      for (const auto& id : ids) per_clip.push_back(all.at(id));
      audio.emplace(inst_id, average_embeddings(per_clip, inst_id));
    }
    const auto s = compute_similarity_matrix(instrument_ids, ratings.descriptors, audio, text);

    InstrumentModelOutcome o;
    o.model = adapter.model_name;
    o.descriptor_r = descriptor_level_correlation(s, ratings);
    o.instrument_r = instrument_level_correlation(s, ratings);
    o.descriptor_summary = summarize_correlations(o.descriptor_r);
    o.chinese_summary = summarize_group(o.instrument_r, InstrumentGroup::kChinese);
    o.western_summary = summarize_group(o.instrument_r, InstrumentGroup::kWestern);
    {
      std::vector<LabeledCorrelation> all_r;
      for (const auto& r : o.instrument_r) all_r.push_back({r.instrument.id, r.r});
      o.instrument_summary = summarize_correlations(all_r);
    }

    const auto dir = config.output_dir / layout::kInstrumentsDir / layout::model_dir(adapter.model_name);
    std::string desc_csv = csv_line({"descriptor", "r"});
    for (const auto& r : o.descriptor_r) desc_csv += csv_line({r.label, format_r(r.r)});
    write_file_atomic(dir / layout::kDescriptorCsv, desc_csv);

    std::string inst_csv = csv_line({"instrument_id", "instrument_name", "group", "r"});
    for (const auto& r : o.instrument_r) {
      inst_csv += csv_line({r.instrument.id, r.instrument.name, std::string(group_name(r.instrument.group)), format_r(r.r)});
    }
    write_file_atomic(dir / layout::kInstrumentCsv, inst_csv);

    std::string scatter = csv_line({"instrument_id", "group", "descriptor", "human_rating", "similarity"});
    for (std::size_t i = 0; i < ratings.instruments.size(); ++i) {
      for (std::size_t d = 0; d < ratings.descriptors.size(); ++d) {
        scatter += csv_line({ratings.instruments[i].id, std::string(group_name(ratings.instruments[i].group)),
                             ratings.descriptors[d], format_real(ratings.ratings[i][d]), format_real(s.values[i][d])});
      }
    }
    write_file_atomic(dir / layout::kScatterCsv, scatter);

    std::string summary = csv_line({"scope", "group", "count", "positive", "negative", "undefined", "mean_r"});
    summary += summary_row("descriptor", "all", o.descriptor_summary);
    summary += summary_row("instrument", "chinese", o.chinese_summary);
    summary += summary_row("instrument", "western", o.western_summary);
    summary += summary_row("instrument", "all", o.instrument_summary);
    write_file_atomic(dir / layout::kSummaryCsv, summary);
    out.push_back(std::move(o));
  }
  return out;
}

EffectsOutcome cmd_eval_effects(const RunConfig& config) {
  EffectsOutcome out;
  out.render = cmd_render(config);
  const auto manifest = load_manifest(out.render.manifest_path);
  const auto settings = load_settings(config.eq_settings, config.reverb_settings);

  std::set<std::string> descriptors;
  for (const auto& [d, s] : settings.eq) descriptors.insert(d);
  for (const auto& [d, s] : settings.reverb) descriptors.insert(d);
  std::vector<EmbedRequest> requests;
  append_text_requests(config, descriptors, requests);
  const auto audio_requests = manifest_requests(config, manifest);
  requests.insert(requests.end(), audio_requests.begin(), audio_requests.end());

  std::vector<ModelDeltas> per_model;
  std::string deltas_csv = csv_line({"descriptor", "effect", "level", "model", "delta"});
  for (const auto& adapter : config.active_adapters()) {
    const auto all = index_by_id(embed(config, adapter, requests));
    auto deltas = compute_deltas(manifest, text_index(all, descriptors), all);
    for (const auto& d : deltas) {
      deltas_csv += csv_line({d.descriptor, std::string(effect_name(d.effect)), format_level(d.level),
                              adapter.model_name, format_real(d.delta)});
    }
    out.delta_rows += deltas.size();
    per_model.push_back({adapter.model_name, std::move(deltas)});
  }

  const auto dir = config.output_dir / layout::kEffectsDir;
  write_file_atomic(dir / layout::kDeltasCsv, deltas_csv);

  std::string counts = csv_line({"model", "effect", "monotonic_up", "monotonic_down", "peaked", "dipped", "flat"});
  for (auto effect : {EffectKind::kEq, EffectKind::kReverb}) {
    const bool present = effect == EffectKind::kEq ? !settings.eq.empty() : !settings.reverb.empty();
    if (!present) continue;
    auto table = build_trend_table(per_model, effect, config.levels, config.tolerance);
    CsvRow header{"descriptor"};
    header.insert(header.end(), table.models.begin(), table.models.end());
    std::string csv = csv_line(header);
    for (const auto& row : table.rows) {
      CsvRow line{row.descriptor};
      for (auto t : row.trends) line.emplace_back(trend_symbol(t));
      csv += csv_line(line);
    }
    write_file_atomic(dir / layout::trends_csv(effect), csv);
    write_file_atomic(dir / layout::trends_table(effect), render_trend_table(table));
    for (std::size_t m = 0; m < table.models.size(); ++m) {
      const auto c = count_column(table, m);
      counts += csv_line({table.models[m], std::string(effect_name(effect)),
                          std::to_string(c.at(TrendClass::kMonotonicUp)), std::to_string(c.at(TrendClass::kMonotonicDown)),
                          std::to_string(c.at(TrendClass::kPeaked)), std::to_string(c.at(TrendClass::kDipped)),
                          std::to_string(c.at(TrendClass::kFlat))});
    }
    out.tables.push_back(std::move(table));
  }
  write_file_atomic(dir / layout::kTrendCountsCsv, counts);
  return out;
}

std::string cmd_report(const RunConfig& config) {
  config.validate();
  const auto adapters = config.active_adapters();
  std::error_code ec;
  std::vector<std::string> missing;
  std::vector<std::string> present_models;
  // Missing artifacts are listed relative to the output directory.
  for (const auto& a : adapters) {
    const auto rel = fs::path(layout::kInstrumentsDir) / layout::model_dir(a.model_name);
    bool ok = true;
    for (const char* f : {layout::kDescriptorCsv, layout::kInstrumentCsv}) {
      if (!fs::is_regular_file(config.output_dir / rel / f, ec)) {
        missing.push_back((rel / f).generic_string());
        ok = false;
      }
    }
    if (ok) present_models.push_back(a.model_name);
  }
  const auto deltas_rel = fs::path(layout::kEffectsDir) / layout::kDeltasCsv;
  const auto deltas_path = config.output_dir / deltas_rel;
  const bool have_effects = fs::is_regular_file(deltas_path, ec);
  if (!have_effects) missing.push_back(deltas_rel.generic_string());
  if (present_models.empty() && !have_effects) {
    std::string list;
    for (const auto& m : missing) list += "\n  " + m;
    fail(ErrorKind::kInvalidInput,
         fmt::format("no evaluation outputs to report under {}; missing:{}", config.output_dir.string(), list));
  }

  std::string doc = "# Timbre alignment report\n";
  if (!present_models.empty()) {
    doc += "\n## Instrument descriptors\n";
    for (const auto& model : present_models) {
      const auto dir = config.output_dir / layout::kInstrumentsDir / layout::model_dir(model);
      const auto dpath = dir / layout::kDescriptorCsv;
      const auto dcsv = parse_csv(read_file(dpath), dpath.string());
      std::vector<LabeledCorrelation> drs;
      for (std::size_t r = 0; r < dcsv.rows.size(); ++r) {
        drs.push_back({dcsv.rows[r][dcsv.column("descriptor")],
                       parse_r(dcsv.rows[r][dcsv.column("r")], fmt::format("{}:{}", dpath.string(), dcsv.line_numbers[r]))});
      }
      const auto ipath = dir / layout::kInstrumentCsv;
      const auto icsv = parse_csv(read_file(ipath), ipath.string());
      std::map<std::string, std::vector<LabeledCorrelation>> by_group;
      for (std::size_t r = 0; r < icsv.rows.size(); ++r) {
        const auto& row = icsv.rows[r];
        by_group[row[icsv.column("group")]].push_back(
            {row[icsv.column("instrument_id")],
             parse_r(row[icsv.column("r")], fmt::format("{}:{}", ipath.string(), icsv.line_numbers[r]))});
      }
      const auto ds = summarize_correlations(drs);
      doc += fmt::format("\n### {}\n\n", model);
      doc += fmt::format("- Descriptor level: {} of {} descriptors positively correlated (mean r = {})", ds.positive_count,
                         ds.total, format_mean(ds.mean_r));
      if (ds.undefined_count) doc += fmt::format(", {} undefined", ds.undefined_count);
      doc += "\n";
      for (const auto& [group, rs] : by_group) {
        const auto gs = summarize_correlations(rs);
        doc += fmt::format("- Instrument level, {}: {} of {} instruments positively correlated (mean r = {})", group,
                           gs.positive_count, gs.total, format_mean(gs.mean_r));
        if (gs.undefined_count) doc += fmt::format(", {} undefined", gs.undefined_count);
        doc += "\n";
      }
    }
  }

  if (have_effects) {
    doc += "\n## Audio effects\n";
    const auto per_model = parse_deltas_csv(deltas_path);
    for (auto effect : {EffectKind::kEq, EffectKind::kReverb}) {
      const auto levels = levels_of(per_model, effect);
      if (levels.empty()) continue;
      const auto table = build_trend_table(per_model, effect, levels, config.tolerance);
      doc += fmt::format("\n### {} trends\n\n", effect == EffectKind::kEq ? "EQ" : "Reverb");
      doc += render_trend_table(table);
      doc += "\n";
      for (std::size_t m = 0; m < table.models.size(); ++m) {
        const auto c = count_column(table, m);
        const auto n = table.rows.size();
        const auto up = c.at(TrendClass::kMonotonicUp);
        doc += fmt::format("- {}: {} of {} descriptors monotonic up ({:.0f}%), {} monotonic down, {} flat or inconsistent\n",
                           table.models[m], up, n, n ? 100.0 * static_cast<double>(up) / static_cast<double>(n) : 0.0,
                           c.at(TrendClass::kMonotonicDown),
                           c.at(TrendClass::kPeaked) + c.at(TrendClass::kDipped) + c.at(TrendClass::kFlat));
      }
    }
  }

  if (!missing.empty()) {
    doc += "\n## Missing artifacts\n\n";
    for (const auto& m : missing) doc += "- " + m + "\n";
  }
  write_file_atomic(config.output_dir / layout::kReport, doc);
  return doc;
}

}  // namespace tbench
