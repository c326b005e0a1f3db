#include "bandctl/bandctl.h"

#include <exception>
#include <map>
#include <new>
#include <string>
#include <vector>

#include "bcn/bpe.hpp"
#include "bcn/error.hpp"
#include "bcn/features.hpp"
#include "bcn/io.hpp"
#include "bcn/metrics.hpp"
#include "bcn/midi.hpp"
#include "bcn/model.hpp"
#include "bcn/pipeline.hpp"
#include "bcn/score_io.hpp"
#include "bcn/synth.hpp"
#include "bcn/text.hpp"
#include "bcn/tokenizer.hpp"

struct bcn_song {
  bcn::Song song;
};
struct bcn_vocab {
  bcn::Vocab vocab;
};
struct bcn_corpus {
  std::vector<bcn::TokenRecord> records;
  std::vector<std::vector<std::int32_t>> flat;  // scratch for bcn_corpus_track
};
struct bcn_bpe {
  bcn::BpeModel bpe;
  bcn::Vocab base;
};
struct bcn_grid {
  bcn::FeatureGrid grid;
};
struct bcn_model {
  bcn::Bundle bundle;
};

namespace {

thread_local std::string g_error;
thread_local int g_error_track = -1;
thread_local long g_error_index = -1;
thread_local std::string g_text;

bcn_status to_status(bcn::Errc c) { return static_cast<bcn_status>(static_cast<int>(c) + 1); }

template <class F>
bcn_status guard(F&& f) {
  g_error.clear();
  g_error_track = -1;
  g_error_index = -1;
  try {
    f();
    return BCN_OK;
  } catch (const bcn::Error& e) {
    g_error = e.what();
    g_error_track = e.track();
    g_error_index = e.index();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
  } catch (const std::exception& e) {
    g_error = e.what();
  } catch (...) {
    g_error = "unknown failure";
  }
  return BCN_E_INTERNAL;
}

void need(const void* p, const char* what) {
  if (!p) throw bcn::Error(bcn::Errc::InvalidArgument, std::string(what) + " is null");
}

bcn::Representation repr_of(bcn_representation r) {
  if (r == BCN_REMI_PLUS) return bcn::Representation::RemiPlus;
  if (r == BCN_REMI_TRACK) return bcn::Representation::RemiTrack;
  throw bcn::Error(bcn::Errc::InvalidArgument, "unknown representation");
}

const bcn::TokenRecord& record_at(const bcn_corpus* c, std::size_t i) {
  need(c, "corpus");
  if (i >= c->records.size()) throw bcn::Error(bcn::Errc::InvalidArgument, "record index out of range");
  return c->records[i];
}

std::vector<bcn::Song> songs_of(bcn_song* const* songs, std::size_t count) {
  if (count > 0) need(songs, "songs");
  std::vector<bcn::Song> out;
  for (std::size_t i = 0; i < count; ++i) {
    need(songs[i], "song");
    out.push_back(songs[i]->song);
  }
  return out;
}

bcn::MetricsReport from_c(const bcn_report& r) {
  bcn::MetricsReport m;
  m.nde = r.nde;
  m.oap = r.oap;
  m.oad = r.oad;
  m.oav = r.oav;
  m.ccs = r.ccs;
  m.gcs = r.gcs;
  m.ca = r.ca;
  m.ssmd = r.ssmd;
  m.tok_per_sec = r.tok_per_sec;
  m.note_per_sec = r.note_per_sec;
  m.n_bars_compared = r.n_bars_compared;
  m.truncated = r.truncated != 0;
  return m;
}

bcn_report to_c(const bcn::MetricsReport& m) {
  return {m.nde, m.oap, m.oad, m.oav, m.ccs, m.gcs, m.ca, m.ssmd, m.tok_per_sec, m.note_per_sec, m.n_bars_compared,
          m.truncated ? 1 : 0};
}

}  // namespace

extern "C" {

const char* bcn_status_name(bcn_status status) {
  if (status == BCN_OK) return "Ok";
  if (status == BCN_E_INTERNAL) return "Internal";
  if (status > BCN_OK && status < BCN_E_INTERNAL) return bcn::errc_name(static_cast<bcn::Errc>(status - 1));
  return "Unknown";
}

const char* bcn_last_error(void) { return g_error.c_str(); }

void bcn_last_error_location(int* track, long* index) {
  if (track) *track = g_error_track;
  if (index) *index = g_error_index;
}

const char* bcn_version(void) { return "1.0.0"; }

// ---- songs ----

bcn_status bcn_song_synth(uint64_t seed, bcn_song** out) {
  return guard([&] {
    need(out, "out");
    *out = new bcn_song{bcn::synth_song(seed)};
  });
}

bcn_status bcn_song_read_midi(const char* path, bcn_song** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new bcn_song{bcn::parse_midi(bcn::read_bytes(path))};
  });
}

bcn_status bcn_song_read_text(const char* path, bcn_song** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new bcn_song{bcn::song_from_text(bcn::read_text(path))};
  });
}

bcn_status bcn_song_write_midi(const bcn_song* song, const char* path) {
  return guard([&] {
    need(song, "song");
    need(path, "path");
    bcn::write_file_atomic(path, bcn::write_midi(song->song));
  });
}

bcn_status bcn_song_write_text(const bcn_song* song, const char* path) {
  return guard([&] {
    need(song, "song");
    need(path, "path");
    bcn::write_file_atomic(path, bcn::song_to_text(song->song));
  });
}

bcn_status bcn_song_prepare(const bcn_song* raw, int check_filter, bcn_song** out) {
  return guard([&] {
    need(raw, "song");
    need(out, "out");
    *out = new bcn_song{bcn::prepare_song(raw->song, check_filter != 0)};
  });
}

bcn_status bcn_song_filter(const bcn_song* song, int* accepted, const char** reasons) {
  return guard([&] {
    need(song, "song");
    need(accepted, "accepted");
    bcn::FilterVerdict v = bcn::filter_song(song->song);
    *accepted = v.accepted ? 1 : 0;
    g_text.clear();
    for (bcn::FilterRule r : v.reasons) g_text += (g_text.empty() ? "" : ",") + std::string(bcn::filter_rule_name(r));
    if (reasons) *reasons = g_text.c_str();
  });
}

bcn_status bcn_song_windows(const bcn_song* song, int min_bars, int max_bars, int stride, bcn_song*** out,
                            size_t* count) {
  return guard([&] {
    need(song, "song");
    need(out, "out");
    need(count, "count");
    if (min_bars < 1 || max_bars < min_bars || stride < 1) {
      throw bcn::Error(bcn::Errc::InvalidArgument, "need 1 <= min_bars <= max_bars and stride >= 1");
    }
    auto windows = bcn::split_windows(song->song, min_bars, max_bars, stride);
    auto* arr = new bcn_song*[windows.size() + 1]();
    for (std::size_t i = 0; i < windows.size(); ++i) arr[i] = new bcn_song{std::move(windows[i])};
    *out = arr;
    *count = windows.size();
  });
}

bcn_status bcn_song_dedupe(bcn_song* const* songs, size_t count, unsigned char* keep) {
  return guard([&] {
    if (count > 0) need(keep, "keep");
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < count; ++i) {
      need(songs[i], "song");
      const std::string key = bcn::features_to_text(bcn::extract_expert_features(songs[i]->song));
      keep[i] = seen.emplace(key, i).second ? 1 : 0;
    }
  });
}

bcn_status bcn_song_detokenized(const bcn_song* song, bcn_song** out) {
  return guard([&] {
    need(song, "song");
    need(out, "out");
    const bcn::Vocab v = bcn::Vocab::build_default();
    *out = new bcn_song{bcn::detokenize(bcn::tokenize_song(song->song, v), v)};
  });
}

int bcn_song_n_bars(const bcn_song* song) { return song ? song->song.n_bars : -1; }
size_t bcn_song_n_tracks(const bcn_song* song) { return song ? song->song.tracks.size() : 0; }
size_t bcn_song_note_count(const bcn_song* song) { return song ? song->song.note_count() : 0; }
int bcn_song_equal(const bcn_song* a, const bcn_song* b) { return a && b && a->song == b->song ? 1 : 0; }
void bcn_song_free(bcn_song* song) { delete song; }

void bcn_song_array_free(bcn_song** songs, size_t count) {
  if (!songs) return;
  for (std::size_t i = 0; i < count; ++i) delete songs[i];
  delete[] songs;
}

int bcn_is_test_song(const char* id) { return id && bcn::stable_hash(id) % 10 == 0 ? 1 : 0; }

// ---- vocabulary ----

bcn_status bcn_vocab_default(bcn_representation repr, bcn_vocab** out) {
  return guard([&] {
    need(out, "out");
    *out = new bcn_vocab{bcn::Vocab::build_default(repr_of(repr))};
  });
}

bcn_status bcn_vocab_read(const char* path, bcn_vocab** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new bcn_vocab{bcn::Vocab::from_text(bcn::read_text(path))};
  });
}

bcn_status bcn_vocab_write(const bcn_vocab* vocab, const char* path) {
  return guard([&] {
    need(vocab, "vocab");
    need(path, "path");
    bcn::write_file_atomic(path, vocab->vocab.to_text());
  });
}

int bcn_vocab_size(const bcn_vocab* vocab) { return vocab ? vocab->vocab.size() : 0; }
void bcn_vocab_free(bcn_vocab* vocab) { delete vocab; }

// ---- token corpus ----

bcn_status bcn_corpus_new(bcn_corpus** out) {
  return guard([&] {
    need(out, "out");
    *out = new bcn_corpus{};
  });
}

bcn_status bcn_corpus_read(const char* path, bcn_corpus** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new bcn_corpus{bcn::corpus_from_text(bcn::read_text(path)), {}};
  });
}

bcn_status bcn_corpus_write(const bcn_corpus* corpus, const char* path) {
  return guard([&] {
    need(corpus, "corpus");
    need(path, "path");
    bcn::write_file_atomic(path, bcn::corpus_to_text(corpus->records));
  });
}

bcn_status bcn_corpus_add_song(bcn_corpus* corpus, const char* id, const bcn_song* song, const bcn_vocab* vocab) {
  return guard([&] {
    need(corpus, "corpus");
    need(id, "id");
    need(song, "song");
    need(vocab, "vocab");
    bcn::TokenRecord rec;
    rec.id = id;
    if (vocab->vocab.representation() == bcn::Representation::RemiPlus) {
      rec.tracks.push_back(bcn::tokenize_remi_plus(song->song, vocab->vocab));
    } else {
      for (const auto& s : bcn::tokenize_song(song->song, vocab->vocab).seqs) rec.tracks.push_back(bcn::strip_padding(s));
    }
    corpus->records.push_back(std::move(rec));
  });
}

size_t bcn_corpus_size(const bcn_corpus* corpus) { return corpus ? corpus->records.size() : 0; }

bcn_status bcn_corpus_record(const bcn_corpus* corpus, size_t index, const char** id, size_t* n_tracks) {
  return guard([&] {
    const auto& rec = record_at(corpus, index);
    if (id) *id = rec.id.c_str();
    if (n_tracks) *n_tracks = rec.tracks.size();
  });
}

bcn_status bcn_corpus_track(const bcn_corpus* corpus, size_t index, size_t track, const int32_t** ids,
                            size_t* length) {
  return guard([&] {
    const auto& rec = record_at(corpus, index);
    need(ids, "ids");
    need(length, "length");
    if (track >= rec.tracks.size()) throw bcn::Error(bcn::Errc::InvalidArgument, "track index out of range");
    auto* self = const_cast<bcn_corpus*>(corpus);
    self->flat.emplace_back(rec.tracks[track].begin(), rec.tracks[track].end());
    *ids = self->flat.back().data();
    *length = self->flat.back().size();
  });
}

bcn_status bcn_corpus_detokenize(const bcn_corpus* corpus, size_t index, int n_bars, const bcn_vocab* vocab,
                                 bcn_song** out) {
  return guard([&] {
    const auto& rec = record_at(corpus, index);
    need(vocab, "vocab");
    need(out, "out");
    bcn::Song s;
    s.n_bars = n_bars;
    for (std::size_t t = 0; t < rec.tracks.size(); ++t) {
      s.tracks.push_back(bcn::detokenize_track(rec.tracks[t], n_bars, vocab->vocab, static_cast<int>(t)));
    }
    *out = new bcn_song{std::move(s)};
  });
}

void bcn_corpus_free(bcn_corpus* corpus) { delete corpus; }

// ---- BPE ----

bcn_status bcn_bpe_train(const bcn_corpus* corpus, const bcn_vocab* vocab, int target_size, bcn_bpe** out) {
  return guard([&] {
    need(corpus, "corpus");
    need(vocab, "vocab");
    need(out, "out");
    std::vector<std::vector<int>> seqs;
    for (const auto& r : corpus->records) seqs.insert(seqs.end(), r.tracks.begin(), r.tracks.end());
    *out = new bcn_bpe{bcn::learn_bpe(seqs, vocab->vocab, target_size), vocab->vocab};
  });
}

bcn_status bcn_bpe_read(const char* path, const bcn_vocab* vocab, bcn_bpe** out) {
  return guard([&] {
    need(path, "path");
    need(vocab, "vocab");
    need(out, "out");
    *out = new bcn_bpe{bcn::BpeModel::from_text(bcn::read_text(path), vocab->vocab), vocab->vocab};
  });
}

bcn_status bcn_bpe_write(const bcn_bpe* bpe, const char* path) {
  return guard([&] {
    need(bpe, "bpe");
    need(path, "path");
    bcn::write_file_atomic(path, bpe->bpe.to_text());
  });
}

int bcn_bpe_vocab_size(const bcn_bpe* bpe) { return bpe ? bpe->bpe.vocab_size() : 0; }

bcn_status bcn_bpe_encode_corpus(const bcn_bpe* bpe, const bcn_corpus* in, bcn_corpus** out) {
  return guard([&] {
    need(bpe, "bpe");
    need(in, "corpus");
    need(out, "out");
    auto* c = new bcn_corpus{in->records, {}};
    for (auto& r : c->records) {
      for (auto& t : r.tracks) t = bpe->bpe.encode(t);
    }
    *out = c;
  });
}

bcn_status bcn_bpe_decode_corpus(const bcn_bpe* bpe, const bcn_corpus* in, bcn_corpus** out) {
  return guard([&] {
    need(bpe, "bpe");
    need(in, "corpus");
    need(out, "out");
    auto* c = new bcn_corpus{in->records, {}};
    for (auto& r : c->records) {
      for (auto& t : r.tracks) t = bpe->bpe.decode(t);
    }
    *out = c;
  });
}

void bcn_bpe_free(bcn_bpe* bpe) { delete bpe; }

// ---- statistics ----

bcn_status bcn_stats(bcn_song* const* songs, size_t count, bcn_representation repr, int bpe_target,
                     bcn_tok_stats* out) {
  return guard([&] {
    need(out, "out");
    auto s = songs_of(songs, count);
    bcn::TokStats t = bcn::representation_stats(s, repr_of(repr), bpe_target);
    *out = {t.vocab_size, t.tok_per_beat, t.tok_per_note, t.avg_len, t.n_songs};
  });
}

// ---- features ----

bcn_status bcn_grid_extract(const bcn_song* song, bcn_grid** out) {
  return guard([&] {
    need(song, "song");
    need(out, "out");
    *out = new bcn_grid{bcn::extract_expert_features(song->song)};
  });
}

bcn_status bcn_grid_read(const char* path, bcn_grid** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new bcn_grid{bcn::features_from_text(bcn::read_text(path))};
  });
}

bcn_status bcn_grid_write(const bcn_grid* grid, const char* path) {
  return guard([&] {
    need(grid, "grid");
    need(path, "path");
    bcn::write_file_atomic(path, bcn::features_to_text(grid->grid));
  });
}

int bcn_grid_n_bars(const bcn_grid* grid) { return grid ? grid->grid.n_bars : -1; }
size_t bcn_grid_n_tracks(const bcn_grid* grid) { return grid ? grid->grid.n_tracks() : 0; }
void bcn_grid_free(bcn_grid* grid) { delete grid; }

// ---- model ----

bcn_status bcn_model_train(bcn_song* const* songs, size_t count, const bcn_bpe* bpe, const bcn_train_options* options,
                           bcn_model** out) {
  return guard([&] {
    need(out, "out");
    bcn::TrainOptions opt;
    const char* preset = options && options->preset ? options->preset : "toy";
    opt.config = bcn::preset(preset);
    if (options && options->config_text) opt.config = bcn::config_from_text(options->config_text, opt.config);
    if (options) {
      opt.crop_bars = options->crop_bars;
      opt.max_samples = options->max_samples;
      if (options->progress) {
        auto fn = options->progress;
        void* user = options->user;
        opt.progress = [fn, user](std::string_view phase, int step, double loss) {
          fn(user, std::string(phase).c_str(), step, loss);
        };
      }
    }
    auto s = songs_of(songs, count);
    *out = new bcn_model{bcn::train_bundle(s, bpe ? &bpe->bpe : nullptr, opt)};
  });
}

bcn_status bcn_model_read(const char* path, bcn_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new bcn_model{bcn::load_bundle(bcn::read_bytes(path))};
  });
}

bcn_status bcn_model_write(const bcn_model* model, const char* path) {
  return guard([&] {
    need(model, "model");
    need(path, "path");
    bcn::write_file_atomic(path, bcn::save_bundle(model->bundle));
  });
}

const char* bcn_model_config(const bcn_model* model) {
  g_text = model ? bcn::config_to_text(model->bundle.config) : std::string();
  return g_text.c_str();
}

int bcn_model_vocab_size(const bcn_model* model) { return model ? model->bundle.config.vocab_size : 0; }
void bcn_model_free(bcn_model* model) { delete model; }

bcn_status bcn_generate(bcn_model* model, const bcn_song* reference, uint64_t seed, bcn_song** out,
                        bcn_corpus* raw_tokens, const char* record_id, bcn_generation_info* info) {
  return guard([&] {
    need(model, "model");
    need(reference, "reference");
    need(out, "out");
    bcn::Cover c = bcn::generate_cover(model->bundle, reference->song, seed);
    if (raw_tokens) {
      bcn::TokenRecord rec;
      rec.id = record_id ? record_id : "generated";
      for (const auto& s : c.result.raw.seqs) rec.tracks.push_back(bcn::strip_padding(s));
      raw_tokens->records.push_back(std::move(rec));
    }
    if (info) {
      info->tokens = c.result.tokens;
      info->seconds = c.result.seconds;
      info->forced = c.forced;
      info->outside_top_k = c.outside_top_k;
      info->n_bars = c.song.n_bars;
      info->notes = c.song.note_count();
    }
    *out = new bcn_song{std::move(c.song)};
  });
}

// ---- metrics ----

bcn_status bcn_evaluate(const bcn_song* ref, const bcn_song* cov, long long tokens, long long notes, double seconds,
                        bcn_report* out) {
  return guard([&] {
    need(ref, "reference");
    need(cov, "cover");
    need(out, "out");
    std::optional<bcn::SpeedReport> timing;
    if (seconds > 0) timing = bcn::speed_report(tokens, notes, seconds);
    *out = to_c(bcn::evaluate_pair(ref->song, cov->song, timing));
  });
}

bcn_status bcn_report_mean(const bcn_report* reports, size_t count, bcn_report* out) {
  return guard([&] {
    need(out, "out");
    if (count > 0) need(reports, "reports");
    std::vector<bcn::MetricsReport> rs;
    for (std::size_t i = 0; i < count; ++i) rs.push_back(from_c(reports[i]));
    *out = to_c(bcn::mean_report(rs));
  });
}

const char* bcn_report_text(const bcn_report* report) {
  g_text = report ? bcn::report_to_text(from_c(*report)) : std::string();
  return g_text.c_str();
}

const char* bcn_report_csv_header(void) {
  g_text = bcn::report_csv_header();
  return g_text.c_str();
}

const char* bcn_report_csv_row(const char* id, const bcn_report* report) {
  g_text = report ? bcn::report_csv_row(id ? id : "", from_c(*report)) : std::string();
  return g_text.c_str();
}

}  // extern "C"
