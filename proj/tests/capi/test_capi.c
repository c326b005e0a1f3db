#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "bandctl/bandctl.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

#define OK(call)                                                                          \
  do {                                                                                    \
    bcn_status st_ = (call);                                                              \
    if (st_ != BCN_OK) {                                                                  \
      fprintf(stderr, "%s:%d: %s -> %s (%s)\n", __FILE__, __LINE__, #call, bcn_status_name(st_), \
              bcn_last_error());                                                          \
      exit(1);                                                                            \
    }                                                                                     \
  } while (0)

static char dir[1024];

static const char* path(const char* name) {
  static char buf[4][1200];
  static int slot = 0;
  slot = (slot + 1) % 4;
  snprintf(buf[slot], sizeof buf[slot], "%s/%s", dir, name);
  return buf[slot];
}

static void progress(void* user, const char* phase, int step, double loss) {
  (void)phase;
  (void)step;
  EXPECT(isfinite(loss));
  ++*(int*)user;
}

int main(int argc, char** argv) {
  snprintf(dir, sizeof dir, "%s", argc > 1 ? argv[1] : ".");

  EXPECT(strcmp(bcn_status_name(BCN_OK), "Ok") == 0);
  EXPECT(strcmp(bcn_status_name(BCN_E_PAIR_MISMATCH), "PairMismatch") == 0);
  EXPECT(strlen(bcn_version()) > 0);

  /* argument errors */
  bcn_song* none = NULL;
  EXPECT(bcn_song_read_midi(NULL, &none) == BCN_E_INVALID_ARGUMENT);
  EXPECT(bcn_song_read_midi(path("missing.mid"), &none) == BCN_E_IO);
  EXPECT(strlen(bcn_last_error()) > 0);
  EXPECT(none == NULL);

  /* songs */
  bcn_song *raw, *song;
  OK(bcn_song_synth(21, &raw));
  OK(bcn_song_prepare(raw, 1, &song));
  int accepted = 0;
  const char* reasons = NULL;
  OK(bcn_song_filter(song, &accepted, &reasons));
  EXPECT(accepted == 1);
  EXPECT(bcn_song_n_tracks(song) == 4);
  OK(bcn_song_write_midi(song, path("capi.mid")));
  bcn_song *back_raw, *back;
  OK(bcn_song_read_midi(path("capi.mid"), &back_raw));
  OK(bcn_song_prepare(back_raw, 0, &back));
  EXPECT(bcn_song_note_count(back) == bcn_song_note_count(song));
  OK(bcn_song_write_text(song, path("capi.song")));
  bcn_song* text;
  OK(bcn_song_read_text(path("capi.song"), &text));
  EXPECT(bcn_song_equal(text, song));

  bcn_song** windows = NULL;
  size_t n_windows = 0;
  OK(bcn_song_windows(song, 16, 32, 8, &windows, &n_windows));
  EXPECT(n_windows >= 1);
  bcn_song* pair[2] = {song, text};
  unsigned char keep[2] = {9, 9};
  OK(bcn_song_dedupe(pair, 2, keep));
  EXPECT(keep[0] == 1 && keep[1] == 0);

  /* tokens */
  bcn_vocab* vocab;
  OK(bcn_vocab_default(BCN_REMI_TRACK, &vocab));
  EXPECT(bcn_vocab_size(vocab) == 282);
  bcn_corpus* corpus;
  OK(bcn_corpus_new(&corpus));
  OK(bcn_corpus_add_song(corpus, "song", song, vocab));
  EXPECT(bcn_corpus_size(corpus) == 1);
  const char* id = NULL;
  size_t n_tracks = 0;
  OK(bcn_corpus_record(corpus, 0, &id, &n_tracks));
  EXPECT(strcmp(id, "song") == 0 && n_tracks == 4);
  const int32_t* ids = NULL;
  size_t len = 0;
  OK(bcn_corpus_track(corpus, 0, 1, &ids, &len));
  EXPECT(len > 3 && ids[1] == 1);
  EXPECT(bcn_corpus_track(corpus, 0, 9, &ids, &len) == BCN_E_INVALID_ARGUMENT);
  bcn_song *detok, *canon;
  OK(bcn_corpus_detokenize(corpus, 0, bcn_song_n_bars(song), vocab, &detok));
  OK(bcn_song_detokenized(song, &canon));
  EXPECT(bcn_song_equal(detok, canon));

  FILE* f = fopen(path("bad.tok"), "w");
  fprintf(f, "#SONG bad\n7 1 9 60 2\n");
  fclose(f);
  bcn_corpus* bad;
  OK(bcn_corpus_read(path("bad.tok"), &bad));
  bcn_song* nothing = NULL;
  EXPECT(bcn_corpus_detokenize(bad, 0, 1, vocab, &nothing) == BCN_E_MALFORMED_SEQUENCE);
  int track = -2;
  long index = -2;
  bcn_last_error_location(&track, &index);
  EXPECT(track == 0 && index == 3);
  bcn_corpus_free(bad);

  bcn_bpe* bpe;
  OK(bcn_bpe_train(corpus, vocab, 400, &bpe));
  EXPECT(bcn_bpe_vocab_size(bpe) > 282 && bcn_bpe_vocab_size(bpe) <= 400);
  EXPECT(bcn_bpe_train(corpus, vocab, 100, &bpe) == BCN_E_TARGET_TOO_SMALL);
  bcn_corpus *enc, *dec;
  OK(bcn_bpe_encode_corpus(bpe, corpus, &enc));
  OK(bcn_bpe_decode_corpus(bpe, enc, &dec));
  OK(bcn_corpus_write(corpus, path("a.tok")));
  OK(bcn_corpus_write(dec, path("b.tok")));
  const int32_t *x, *y;
  size_t lx, ly;
  OK(bcn_corpus_track(corpus, 0, 2, &x, &lx));
  OK(bcn_corpus_track(dec, 0, 2, &y, &ly));
  EXPECT(lx == ly && memcmp(x, y, lx * sizeof *x) == 0);
  OK(bcn_corpus_track(enc, 0, 2, &y, &ly));
  EXPECT(ly < lx);

  bcn_tok_stats a, b;
  OK(bcn_stats(&song, 1, BCN_REMI_TRACK, 0, &a));
  OK(bcn_stats(&song, 1, BCN_REMI_PLUS, 0, &b));
  EXPECT(a.avg_len < b.avg_len);
  EXPECT(bcn_stats(NULL, 0, BCN_REMI_TRACK, 0, &a) == BCN_E_MISSING_INPUT);

  bcn_grid* grid;
  OK(bcn_grid_extract(song, &grid));
  EXPECT(bcn_grid_n_bars(grid) == bcn_song_n_bars(song));
  OK(bcn_grid_write(grid, path("capi.grid")));
  bcn_grid* grid2;
  OK(bcn_grid_read(path("capi.grid"), &grid2));
  EXPECT(bcn_grid_n_tracks(grid2) == 4);

  /* model */
  int calls = 0;
  bcn_train_options opt = {"toy", "steps = 2\nvq_steps = 2\nbatch_size = 1\nt_max = 300\n", 2, 2, progress, &calls};
  bcn_model* model;
  OK(bcn_model_train(&windows[0], 1, NULL, &opt, &model));
  EXPECT(calls >= 4);
  EXPECT(bcn_model_vocab_size(model) == 282);
  EXPECT(strstr(bcn_model_config(model), "steps = 2") != NULL);
  OK(bcn_model_write(model, path("capi.ckpt")));
  bcn_model* loaded;
  OK(bcn_model_read(path("capi.ckpt"), &loaded));

  bcn_song** refs = NULL;
  size_t n_refs = 0;
  OK(bcn_song_windows(song, 2, 2, 2, &refs, &n_refs));
  bcn_song *c1, *c2;
  bcn_generation_info info;
  bcn_corpus* raw_tokens;
  OK(bcn_corpus_new(&raw_tokens));
  OK(bcn_generate(loaded, refs[0], 7, &c1, raw_tokens, "cover", &info));
  OK(bcn_generate(model, refs[0], 7, &c2, NULL, NULL, NULL));
  EXPECT(bcn_song_equal(c1, c2));
  EXPECT(info.n_bars == 2 && info.outside_top_k == 0 && info.tokens > 0);
  EXPECT(bcn_corpus_size(raw_tokens) == 1);

  bcn_report r, m;
  OK(bcn_evaluate(refs[0], refs[0], 0, 0, 0, &r));
  EXPECT(r.nde == 0 && r.oap == 1 && r.ca == 1 && r.ssmd == 0);
  OK(bcn_evaluate(refs[0], c1, info.tokens, (long long)info.notes, 2.0, &r));
  EXPECT(r.tok_per_sec == info.tokens / 2.0);
  bcn_report both[2] = {r, r};
  OK(bcn_report_mean(both, 2, &m));
  EXPECT(m.oap == r.oap && m.n_bars_compared == 2 * r.n_bars_compared);
  EXPECT(strstr(bcn_report_text(&m), "oap") != NULL);
  EXPECT(strncmp(bcn_report_csv_row("x", &m), "x,", 2) == 0);
  EXPECT(bcn_evaluate(NULL, c1, 0, 0, 0, &r) == BCN_E_INVALID_ARGUMENT);

  bcn_corpus_free(raw_tokens);
  bcn_song_free(c1);
  bcn_song_free(c2);
  bcn_song_array_free(refs, n_refs);
  bcn_model_free(loaded);
  bcn_model_free(model);
  bcn_grid_free(grid2);
  bcn_grid_free(grid);
  bcn_corpus_free(enc);
  bcn_corpus_free(dec);
  bcn_bpe_free(bpe);
  bcn_song_free(detok);
  bcn_song_free(canon);
  bcn_corpus_free(corpus);
  bcn_vocab_free(vocab);
  bcn_song_array_free(windows, n_windows);
  bcn_song_free(text);
  bcn_song_free(back);
  bcn_song_free(back_raw);
  bcn_song_free(song);
  bcn_song_free(raw);

  if (failures) {
    fprintf(stderr, "%d failed expectations\n", failures);
    return 1;
  }
  printf("C API checks passed\n");
  return 0;
}
