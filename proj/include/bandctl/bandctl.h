/* C interface of the bandctl library. Every function returns a bcn_status;
 * on failure bcn_last_error() describes the problem for the calling thread.
 * Handles are opaque and released with the matching *_free function. */
#ifndef BANDCTL_BANDCTL_H
#define BANDCTL_BANDCTL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define BCN_API __declspec(dllexport)
#else
#define BCN_API __attribute__((visibility("default")))
#endif

typedef enum bcn_status {
  BCN_OK = 0,
  BCN_E_INVALID_ARGUMENT,
  BCN_E_IO,
  BCN_E_BAD_FORMAT,
  BCN_E_MALFORMED_MIDI,
  BCN_E_UNSUPPORTED_TIME_SIGNATURE,
  BCN_E_NO_MELODY_TRACK,
  BCN_E_NO_DRUM_TRACK,
  BCN_E_REJECTED,
  BCN_E_INVALID_GRID,
  BCN_E_NOTE_OUT_OF_RANGE,
  BCN_E_MALFORMED_SEQUENCE,
  BCN_E_UNKNOWN_TOKEN,
  BCN_E_TARGET_TOO_SMALL,
  BCN_E_EMPTY_CORPUS,
  BCN_E_BIN_OUT_OF_VOCAB,
  BCN_E_ID_OUT_OF_VOCAB,
  BCN_E_NON_FINITE,
  BCN_E_SHAPE_MISMATCH,
  BCN_E_BAR_INDEX_OUT_OF_RANGE,
  BCN_E_BAR_COUNT_MISMATCH,
  BCN_E_EMPTY_CODEBOOK,
  BCN_E_DEGENERATE_VOCAB,
  BCN_E_ZERO_BARS,
  BCN_E_ZERO_DURATION,
  BCN_E_PAIR_MISMATCH,
  BCN_E_MISSING_INPUT,
  BCN_E_INTERNAL
} bcn_status;

typedef enum bcn_representation { BCN_REMI_TRACK = 0, BCN_REMI_PLUS = 1 } bcn_representation;

BCN_API const char* bcn_status_name(bcn_status status);
BCN_API const char* bcn_last_error(void);
/* Track and token index of the last sequence error, -1 when not applicable. */
BCN_API void bcn_last_error_location(int* track, long* index);
BCN_API const char* bcn_version(void);

typedef struct bcn_song bcn_song;
typedef struct bcn_vocab bcn_vocab;
typedef struct bcn_corpus bcn_corpus;
typedef struct bcn_bpe bcn_bpe;
typedef struct bcn_grid bcn_grid;
typedef struct bcn_model bcn_model;

/* ---- songs ---- */
BCN_API bcn_status bcn_song_synth(uint64_t seed, bcn_song** out);
BCN_API bcn_status bcn_song_read_midi(const char* path, bcn_song** out);
BCN_API bcn_status bcn_song_read_text(const char* path, bcn_song** out);
BCN_API bcn_status bcn_song_write_midi(const bcn_song* song, const char* path);
BCN_API bcn_status bcn_song_write_text(const bcn_song* song, const char* path);
/* Quantize and compress; with check_filter != 0 a failing song returns
 * BCN_E_REJECTED naming the violated rules. */
BCN_API bcn_status bcn_song_prepare(const bcn_song* raw, int check_filter, bcn_song** out);
/* accepted = 1/0; *reasons (may be NULL) receives comma-separated rule names,
 * valid until the next call on this thread. */
BCN_API bcn_status bcn_song_filter(const bcn_song* song, int* accepted, const char** reasons);
BCN_API bcn_status bcn_song_windows(const bcn_song* song, int min_bars, int max_bars, int stride, bcn_song*** out,
                                    size_t* count);
/* keep[i] = 1 for the first song of every group with equal expert features. */
BCN_API bcn_status bcn_song_dedupe(bcn_song* const* songs, size_t count, unsigned char* keep);
BCN_API bcn_status bcn_song_detokenized(const bcn_song* song, bcn_song** out);
BCN_API int bcn_song_n_bars(const bcn_song* song);
BCN_API size_t bcn_song_n_tracks(const bcn_song* song);
BCN_API size_t bcn_song_note_count(const bcn_song* song);
BCN_API int bcn_song_equal(const bcn_song* a, const bcn_song* b);
BCN_API void bcn_song_free(bcn_song* song);
BCN_API void bcn_song_array_free(bcn_song** songs, size_t count);

/* 1 when the song id falls in the held-out 10% (stable hash of the id). */
BCN_API int bcn_is_test_song(const char* id);

/* ---- vocabulary ---- */
BCN_API bcn_status bcn_vocab_default(bcn_representation repr, bcn_vocab** out);
BCN_API bcn_status bcn_vocab_read(const char* path, bcn_vocab** out);
BCN_API bcn_status bcn_vocab_write(const bcn_vocab* vocab, const char* path);
BCN_API int bcn_vocab_size(const bcn_vocab* vocab);
BCN_API void bcn_vocab_free(bcn_vocab* vocab);

/* ---- token corpus: records of per-track unpadded id sequences ---- */
BCN_API bcn_status bcn_corpus_new(bcn_corpus** out);
BCN_API bcn_status bcn_corpus_read(const char* path, bcn_corpus** out);
BCN_API bcn_status bcn_corpus_write(const bcn_corpus* corpus, const char* path);
BCN_API bcn_status bcn_corpus_add_song(bcn_corpus* corpus, const char* id, const bcn_song* song,
                                       const bcn_vocab* vocab);
BCN_API size_t bcn_corpus_size(const bcn_corpus* corpus);
BCN_API bcn_status bcn_corpus_record(const bcn_corpus* corpus, size_t index, const char** id, size_t* n_tracks);
/* *ids stays valid until the corpus is modified or freed. */
BCN_API bcn_status bcn_corpus_track(const bcn_corpus* corpus, size_t index, size_t track, const int32_t** ids,
                                    size_t* length);
BCN_API bcn_status bcn_corpus_detokenize(const bcn_corpus* corpus, size_t index, int n_bars, const bcn_vocab* vocab,
                                         bcn_song** out);
BCN_API void bcn_corpus_free(bcn_corpus* corpus);

/* ---- BPE ---- */
BCN_API bcn_status bcn_bpe_train(const bcn_corpus* corpus, const bcn_vocab* vocab, int target_size, bcn_bpe** out);
BCN_API bcn_status bcn_bpe_read(const char* path, const bcn_vocab* vocab, bcn_bpe** out);
BCN_API bcn_status bcn_bpe_write(const bcn_bpe* bpe, const char* path);
BCN_API int bcn_bpe_vocab_size(const bcn_bpe* bpe);
BCN_API bcn_status bcn_bpe_encode_corpus(const bcn_bpe* bpe, const bcn_corpus* in, bcn_corpus** out);
BCN_API bcn_status bcn_bpe_decode_corpus(const bcn_bpe* bpe, const bcn_corpus* in, bcn_corpus** out);
BCN_API void bcn_bpe_free(bcn_bpe* bpe);

/* ---- token statistics ---- */
typedef struct bcn_tok_stats {
  int vocab_size;
  double tok_per_beat;
  double tok_per_note;
  double avg_len;
  size_t n_songs;
} bcn_tok_stats;
/* bpe_target > 0 learns BPE of that size on the same songs first. */
BCN_API bcn_status bcn_stats(bcn_song* const* songs, size_t count, bcn_representation repr, int bpe_target,
                             bcn_tok_stats* out);

/* ---- expert features ---- */
BCN_API bcn_status bcn_grid_extract(const bcn_song* song, bcn_grid** out);
BCN_API bcn_status bcn_grid_read(const char* path, bcn_grid** out);
BCN_API bcn_status bcn_grid_write(const bcn_grid* grid, const char* path);
BCN_API int bcn_grid_n_bars(const bcn_grid* grid);
BCN_API size_t bcn_grid_n_tracks(const bcn_grid* grid);
BCN_API void bcn_grid_free(bcn_grid* grid);

/* ---- model ---- */
typedef void (*bcn_progress_fn)(void* user, const char* phase, int step, double loss);

typedef struct bcn_train_options {
  const char* preset;      /* "toy" (default when NULL) or "paper" */
  const char* config_text; /* optional "key = value" overrides */
  int crop_bars;           /* 0 = whole songs */
  int max_samples;         /* 0 = all */
  bcn_progress_fn progress;
  void* user;
} bcn_train_options;

BCN_API bcn_status bcn_model_train(bcn_song* const* songs, size_t count, const bcn_bpe* bpe,
                                   const bcn_train_options* options, bcn_model** out);
BCN_API bcn_status bcn_model_read(const char* path, bcn_model** out);
BCN_API bcn_status bcn_model_write(const bcn_model* model, const char* path);
/* Config as "key = value" text, valid until the next call on this thread. */
BCN_API const char* bcn_model_config(const bcn_model* model);
BCN_API int bcn_model_vocab_size(const bcn_model* model);
BCN_API void bcn_model_free(bcn_model* model);

typedef struct bcn_generation_info {
  long long tokens;
  double seconds;
  int forced;
  int outside_top_k;
  int n_bars;
  size_t notes;
} bcn_generation_info;

/* Generates a cover of a prepared reference song. `raw_tokens` (may be NULL)
 * receives one record "<record_id>" with the emitted ids per track. */
BCN_API bcn_status bcn_generate(bcn_model* model, const bcn_song* reference, uint64_t seed, bcn_song** out,
                                bcn_corpus* raw_tokens, const char* record_id, bcn_generation_info* info);

/* ---- metrics ---- */
typedef struct bcn_report {
  double nde, oap, oad, oav, ccs, gcs, ca, ssmd;
  double tok_per_sec, note_per_sec;
  int n_bars_compared;
  int truncated;
} bcn_report;

/* tokens/notes/seconds describe the generation run; seconds <= 0 skips speed. */
BCN_API bcn_status bcn_evaluate(const bcn_song* ref, const bcn_song* cov, long long tokens, long long notes,
                                double seconds, bcn_report* out);
BCN_API bcn_status bcn_report_mean(const bcn_report* reports, size_t count, bcn_report* out);
/* Text helpers; strings valid until the next call on this thread. */
BCN_API const char* bcn_report_text(const bcn_report* report);
BCN_API const char* bcn_report_csv_header(void);
BCN_API const char* bcn_report_csv_row(const char* id, const bcn_report* report);

#ifdef __cplusplus
}
#endif

#endif
