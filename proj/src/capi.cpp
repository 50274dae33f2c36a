#include "tbench/tbench.h"

#include <fmt/format.h>
#include <new>
#include <string>

#include <json.hpp>

#include "audio.hpp"
#include "config.hpp"
#include "dsp.hpp"
#include "effects.hpp"
#include "embedding.hpp"
#include "error.hpp"
#include "pipeline.hpp"
#include "stats.hpp"

struct tbench_audio {
  tbench::AudioBuffer buffer;
};

struct tbench_session {
  tbench::RunConfig config;
  std::string summary;
};

namespace {

thread_local std::string g_last_error;

tbench_status status_for(tbench::ErrorKind kind) {
  switch (kind) {
    case tbench::ErrorKind::kInvalidInput:
      return TBENCH_ERR_INVALID_INPUT;
    case tbench::ErrorKind::kIo:
      return TBENCH_ERR_IO;
    case tbench::ErrorKind::kNumeric:
      return TBENCH_ERR_NUMERIC;
    case tbench::ErrorKind::kAdapter:
      return TBENCH_ERR_ADAPTER;
    case tbench::ErrorKind::kInternal:
      return TBENCH_ERR_INTERNAL;
  }
  return TBENCH_ERR_INTERNAL;
}

// Runs `fn`, translating exceptions into status codes.
template <typename Fn>
tbench_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    return TBENCH_OK;
  } catch (const tbench::Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return TBENCH_ERR_INTERNAL;
}

template <typename... Ptrs>
void require_non_null(const char* fn, const Ptrs*... ptrs) {
  if (((ptrs == nullptr) || ...)) tbench::fail(tbench::ErrorKind::kInvalidInput, fmt::format("{}: null argument", fn));
}

tbench::Effect parse_effect_record(const char* json_text, tbench::EffectKind kind) {
  std::string line = nlohmann::json::parse(json_text).dump();
  if (kind == tbench::EffectKind::kEq) return tbench::parse_eq_settings(line, "settings").begin()->second;
  return tbench::parse_reverb_settings(line, "settings").begin()->second;
}

tbench_status apply_effect(const tbench_audio* in, const char* settings_json, double level, tbench_audio** out,
                           tbench::EffectKind kind) {
  return guarded([&] {
    require_non_null("apply effect", in, settings_json, out);
    tbench::Effect effect;
    try {
      effect = parse_effect_record(settings_json, kind);
    } catch (const nlohmann::json::exception& e) {
      tbench::fail(tbench::ErrorKind::kInvalidInput, std::string("settings: invalid JSON: ") + e.what());
    }
    auto rendered = tbench::fx(in->buffer, effect, tbench::EffectLevel(level));
    *out = new tbench_audio{std::move(rendered.audio)};
  });
}

}  // namespace

extern "C" {

const char* tbench_version(void) { return "0.1.0"; }

const char* tbench_last_error(void) { return g_last_error.c_str(); }

const char* tbench_status_string(tbench_status status) {
  switch (status) {
    case TBENCH_OK:
      return "ok";
    case TBENCH_ERR_INVALID_INPUT:
      return "invalid input";
    case TBENCH_ERR_IO:
      return "i/o error";
    case TBENCH_ERR_NUMERIC:
      return "numeric error";
    case TBENCH_ERR_ADAPTER:
      return "adapter error";
    case TBENCH_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

tbench_status tbench_audio_create(const float* const* channels, size_t channel_count, size_t frames, int sample_rate,
                                  tbench_audio** out) {
  return guarded([&] {
    require_non_null("tbench_audio_create", channels, out);
    std::vector<std::vector<float>> data;
    for (size_t c = 0; c < channel_count; ++c) {
      require_non_null("tbench_audio_create", channels[c]);
      data.emplace_back(channels[c], channels[c] + frames);
    }
    *out = new tbench_audio{tbench::AudioBuffer(std::move(data), sample_rate)};
  });
}

tbench_status tbench_audio_read_wav(const char* path, tbench_audio** out) {
  return guarded([&] {
    require_non_null("tbench_audio_read_wav", path, out);
    *out = new tbench_audio{tbench::read_wav(path)};
  });
}

tbench_status tbench_audio_write_wav(const tbench_audio* audio, const char* path, tbench_wav_format format,
                                     size_t* clamped_samples) {
  return guarded([&] {
    require_non_null("tbench_audio_write_wav", audio, path);
    const auto fmt = format == TBENCH_WAV_PCM16 ? tbench::WavFormat::kPcm16 : tbench::WavFormat::kFloat32;
    const auto res = tbench::write_wav(audio->buffer, path, fmt);
    if (clamped_samples) *clamped_samples = res.clamped_samples;
  });
}

tbench_status tbench_audio_downmix_mono(const tbench_audio* audio, tbench_audio** out) {
  return guarded([&] {
    require_non_null("tbench_audio_downmix_mono", audio, out);
    *out = new tbench_audio{tbench::downmix_mono(audio->buffer)};
  });
}

size_t tbench_audio_channels(const tbench_audio* audio) { return audio ? audio->buffer.channels() : 0; }
size_t tbench_audio_frames(const tbench_audio* audio) { return audio ? audio->buffer.frames() : 0; }
int tbench_audio_sample_rate(const tbench_audio* audio) { return audio ? audio->buffer.sample_rate() : 0; }

const float* tbench_audio_channel_data(const tbench_audio* audio, size_t channel) {
  if (!audio || channel >= audio->buffer.channels()) return nullptr;
  return audio->buffer.channel(channel).data();
}

void tbench_audio_free(tbench_audio* audio) { delete audio; }

tbench_status tbench_apply_eq(const tbench_audio* in, const char* settings_json, double level, tbench_audio** out) {
  return apply_effect(in, settings_json, level, out, tbench::EffectKind::kEq);
}

tbench_status tbench_apply_reverb(const tbench_audio* in, const char* settings_json, double level,
                                  tbench_audio** out) {
  return apply_effect(in, settings_json, level, out, tbench::EffectKind::kReverb);
}

tbench_status tbench_cosine_similarity(const double* x, const double* y, size_t n, double* out) {
  return guarded([&] {
    require_non_null("tbench_cosine_similarity", x, y, out);
    *out = tbench::cosine_similarity(std::span<const double>(x, n), std::span<const double>(y, n));
  });
}

tbench_status tbench_pearson(const double* x, const double* y, size_t n, double* out, int* defined) {
  return guarded([&] {
    require_non_null("tbench_pearson", x, y, out, defined);
    const auto r = tbench::pearson(std::span<const double>(x, n), std::span<const double>(y, n));
    *defined = r.has_value() ? 1 : 0;
    if (r) *out = *r;
  });
}

tbench_status tbench_classify_trend(double low, double mid, double high, double tolerance, tbench_trend* out) {
  return guarded([&] {
    require_non_null("tbench_classify_trend", out);
    *out = static_cast<tbench_trend>(tbench::classify_trend(low, mid, high, tolerance));
  });
}

const char* tbench_trend_symbol(tbench_trend trend) {
  return tbench::trend_symbol(static_cast<tbench::TrendClass>(trend)).data();
}

const char* tbench_trend_legend(void) { return tbench::kTrendLegend.data(); }

tbench_status tbench_session_open(const char* config_path, tbench_session** out) {
  return guarded([&] {
    require_non_null("tbench_session_open", config_path, out);
    auto session = std::make_unique<tbench_session>();
    session->config = tbench::load_run_config(config_path);
    *out = session.release();
  });
}

void tbench_session_free(tbench_session* session) { delete session; }

tbench_status tbench_session_set_levels(tbench_session* session, const double* levels, size_t count) {
  return guarded([&] {
    require_non_null("tbench_session_set_levels", session, levels);
    std::vector<double> v(levels, levels + count);
    tbench::validate_levels(v);
    session->config.levels = std::move(v);
  });
}

tbench_status tbench_session_set_tolerance(tbench_session* session, double tolerance) {
  return guarded([&] {
    require_non_null("tbench_session_set_tolerance", session);
    if (!(tolerance >= 0.0) || !std::isfinite(tolerance)) {
      tbench::fail(tbench::ErrorKind::kInvalidInput, "tolerance must be finite and >= 0");
    }
    session->config.tolerance = tolerance;
  });
}

tbench_status tbench_session_set_output_dir(tbench_session* session, const char* path) {
  return guarded([&] {
    require_non_null("tbench_session_set_output_dir", session, path);
    if (!*path) tbench::fail(tbench::ErrorKind::kInvalidInput, "output directory must not be empty");
    session->config.output_dir = path;
  });
}

tbench_status tbench_session_select_adapter(tbench_session* session, const char* name) {
  return guarded([&] {
    require_non_null("tbench_session_select_adapter", session, name);
    session->config.selected_adapters.emplace_back(name);
    session->config.active_adapters();  // rejects unknown names now
  });
}

tbench_status tbench_session_render(tbench_session* session, tbench_render_stats* stats) {
  return guarded([&] {
    require_non_null("tbench_session_render", session);
    const auto r = tbench::cmd_render(session->config);
    if (stats) *stats = {r.items, r.rendered, r.reused, r.warnings.size()};
    std::string s = fmt::format("manifest: {} ({} items; {} rendered, {} reused from cache)\n",
                                r.manifest_path.string(), r.items, r.rendered, r.reused);
    for (const auto& w : r.warnings) s += "warning: " + w + "\n";
    session->summary = std::move(s);
  });
}

tbench_status tbench_session_embed(tbench_session* session) {
  return guarded([&] {
    require_non_null("tbench_session_embed", session);
    std::string s;
    for (const auto& m : tbench::cmd_embed(session->config)) {
      s += fmt::format("{}: {} embeddings ({} from cache, {} adapter calls) -> {}\n", m.model, m.requested,
                       m.cache_hits, m.invocations, m.file.string());
    }
    session->summary = std::move(s);
  });
}

tbench_status tbench_session_eval_instruments(tbench_session* session) {
  return guarded([&] {
    require_non_null("tbench_session_eval_instruments", session);
    std::string s;
    auto mean = [](const tbench::CorrelationSummary& c) {
      return c.mean_r ? fmt::format("{:.2f}", *c.mean_r) : std::string("n/a");
    };
    for (const auto& m : tbench::cmd_eval_instruments(session->config)) {
      s += fmt::format("{}: descriptors {}/{} positive (mean r = {}); chinese {}/{} (mean r = {}); western {}/{} (mean r = {})\n",
                       m.model, m.descriptor_summary.positive_count, m.descriptor_summary.total,
                       mean(m.descriptor_summary), m.chinese_summary.positive_count, m.chinese_summary.total,
                       mean(m.chinese_summary), m.western_summary.positive_count, m.western_summary.total,
                       mean(m.western_summary));
    }
    session->summary = std::move(s);
  });
}

tbench_status tbench_session_eval_effects(tbench_session* session) {
  return guarded([&] {
    require_non_null("tbench_session_eval_effects", session);
    const auto r = tbench::cmd_eval_effects(session->config);
    std::string s = fmt::format("{} manifest items ({} rendered, {} reused); {} delta rows\n", r.render.items,
                                r.render.rendered, r.render.reused, r.delta_rows);
    for (const auto& t : r.tables) s += "\n" + tbench::render_trend_table(t);
    session->summary = std::move(s);
  });
}

tbench_status tbench_session_report(tbench_session* session) {
  return guarded([&] {
    require_non_null("tbench_session_report", session);
    session->summary = tbench::cmd_report(session->config);
  });
}

const char* tbench_session_summary(const tbench_session* session) {
  return session ? session->summary.c_str() : "";
}

}  // extern "C"
