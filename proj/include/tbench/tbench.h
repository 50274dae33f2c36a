/*
 * tbench: benchmark harness for timbre alignment of joint language-audio
 * embeddings.
 *
 * C interface over the C++ core. Objects are opaque handles released with
 * the matching *_free function. Every fallible call returns a tbench_status;
 * on failure tbench_last_error() describes the problem for the calling
 * thread until its next failing call.
 */
#ifndef TBENCH_TBENCH_H
#define TBENCH_TBENCH_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(TBENCH_BUILDING_LIBRARY)
#    define TBENCH_API __declspec(dllexport)
#  else
#    define TBENCH_API __declspec(dllimport)
#  endif
#else
#  define TBENCH_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tbench_status {
  TBENCH_OK = 0,
  TBENCH_ERR_INVALID_INPUT = 1, /* bad arguments, malformed files, failed validation */
  TBENCH_ERR_IO = 2,            /* unreadable or unwritable paths */
  TBENCH_ERR_NUMERIC = 3,       /* filter instability, non-finite values */
  TBENCH_ERR_ADAPTER = 4,       /* embedder subprocess failed or broke protocol */
  TBENCH_ERR_INTERNAL = 5
} tbench_status;

typedef enum tbench_wav_format { TBENCH_WAV_PCM16 = 0, TBENCH_WAV_FLOAT32 = 1 } tbench_wav_format;

typedef enum tbench_trend {
  TBENCH_TREND_MONOTONIC_UP = 0,
  TBENCH_TREND_MONOTONIC_DOWN = 1,
  TBENCH_TREND_PEAKED = 2,
  TBENCH_TREND_DIPPED = 3,
  TBENCH_TREND_FLAT = 4
} tbench_trend;

TBENCH_API const char* tbench_version(void);
TBENCH_API const char* tbench_last_error(void);
TBENCH_API const char* tbench_status_string(tbench_status status);

/* ---- Audio ------------------------------------------------------------ */

typedef struct tbench_audio tbench_audio;

/* Builds a buffer from non-interleaved channel data (channels pointers of
 * `frames` samples each). */
TBENCH_API tbench_status tbench_audio_create(const float* const* channels, size_t channel_count, size_t frames,
                                             int sample_rate, tbench_audio** out);
TBENCH_API tbench_status tbench_audio_read_wav(const char* path, tbench_audio** out);
/* `clamped_samples` (optional) receives the number of samples saturated
 * during PCM16 export. */
TBENCH_API tbench_status tbench_audio_write_wav(const tbench_audio* audio, const char* path,
                                                tbench_wav_format format, size_t* clamped_samples);
TBENCH_API tbench_status tbench_audio_downmix_mono(const tbench_audio* audio, tbench_audio** out);
TBENCH_API size_t tbench_audio_channels(const tbench_audio* audio);
TBENCH_API size_t tbench_audio_frames(const tbench_audio* audio);
TBENCH_API int tbench_audio_sample_rate(const tbench_audio* audio);
/* Pointer to `frames` samples of one channel, valid until the handle is freed. */
TBENCH_API const float* tbench_audio_channel_data(const tbench_audio* audio, size_t channel);
TBENCH_API void tbench_audio_free(tbench_audio* audio);

/* ---- Effects ----------------------------------------------------------- */

/* `settings_json` is one settings record as found in the EQ / reverb
 * settings files. Level must be in (0, 1]. */
TBENCH_API tbench_status tbench_apply_eq(const tbench_audio* in, const char* settings_json, double level,
                                         tbench_audio** out);
TBENCH_API tbench_status tbench_apply_reverb(const tbench_audio* in, const char* settings_json, double level,
                                             tbench_audio** out);

/* ---- Statistics -------------------------------------------------------- */

TBENCH_API tbench_status tbench_cosine_similarity(const double* x, const double* y, size_t n, double* out);
/* *defined is set to 0 (and *out untouched) when either input has zero
 * variance. */
TBENCH_API tbench_status tbench_pearson(const double* x, const double* y, size_t n, double* out, int* defined);
TBENCH_API tbench_status tbench_classify_trend(double low, double mid, double high, double tolerance,
                                               tbench_trend* out);
/* "↑", "↓" or "-" (UTF-8). */
TBENCH_API const char* tbench_trend_symbol(tbench_trend trend);
TBENCH_API const char* tbench_trend_legend(void);

/* ---- Pipeline session -------------------------------------------------- */

typedef struct tbench_session tbench_session;

typedef struct tbench_render_stats {
  size_t items;    /* manifest entries including the reference */
  size_t rendered; /* files written by this call */
  size_t reused;   /* files found in place */
  size_t warnings;
} tbench_render_stats;

TBENCH_API tbench_status tbench_session_open(const char* config_path, tbench_session** out);
TBENCH_API void tbench_session_free(tbench_session* session);

/* Command-line style overrides; they win over the config file. */
TBENCH_API tbench_status tbench_session_set_levels(tbench_session* session, const double* levels, size_t count);
TBENCH_API tbench_status tbench_session_set_tolerance(tbench_session* session, double tolerance);
TBENCH_API tbench_status tbench_session_set_output_dir(tbench_session* session, const char* path);
/* Restricts commands to the named adapters; may be called repeatedly. */
TBENCH_API tbench_status tbench_session_select_adapter(tbench_session* session, const char* name);

TBENCH_API tbench_status tbench_session_render(tbench_session* session, tbench_render_stats* stats);
TBENCH_API tbench_status tbench_session_embed(tbench_session* session);
TBENCH_API tbench_status tbench_session_eval_instruments(tbench_session* session);
TBENCH_API tbench_status tbench_session_eval_effects(tbench_session* session);
TBENCH_API tbench_status tbench_session_report(tbench_session* session);

/* Human-readable summary of the last successful command, owned by the
 * session and valid until the next command. */
TBENCH_API const char* tbench_session_summary(const tbench_session* session);

#ifdef __cplusplus
}
#endif

#endif /* TBENCH_TBENCH_H */
