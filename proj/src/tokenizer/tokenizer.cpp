#include "bcn/tokenizer.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

#include "bcn/error.hpp"
#include "bcn/text.hpp"

namespace bcn {

namespace {

int snap_onset(int onset, int grid, int limit) {
  int r = onset % grid;
  int s = onset - r;
  if (2 * r > grid && s + grid < limit) s += grid;
  return s;
}

Track canonical_track(const Track& track, int n_bars, const Vocab& vocab) {
  const int limit = n_bars * kTicksPerBar;
  Track out = make_track(track.instrument);
  out.notes.reserve(track.notes.size());
  for (const Note& n : track.notes) {
    if (n.onset < 0 || n.onset >= limit || n.pitch < 0 || n.pitch > 127) {
      throw Error(Errc::NoteOutOfRange, "note at tick " + std::to_string(n.onset) + " pitch " +
                                            std::to_string(n.pitch) + " outside " +
                                            std::to_string(n_bars) + " bars");
    }
    Note c;
    c.onset = snap_onset(n.onset, vocab.position_grid(), limit);
    if (track.is_drum()) {
      c.pitch = map_drum_key(n.pitch);
      c.duration = kDrumDuration;
      c.velocity = kDrumVelocity;
    } else {
      c.pitch = n.pitch;
      c.duration = snap_duration(n.duration, vocab.duration_mesh());
      c.velocity = velocity_from_bin(velocity_bin(n.velocity));
    }
    out.notes.push_back(c);
  }
  normalize_notes(out);
  return out;
}

void append_note(std::vector<int>& seq, const Note& n, bool drum, const Vocab& vocab) {
  if (drum) {
    seq.push_back(vocab.drum_id(n.pitch));
  } else {
    seq.push_back(vocab.pitch_id(n.pitch));
    seq.push_back(vocab.duration_id(n.duration));
    seq.push_back(vocab.velocity_id(velocity_bin(n.velocity)));
  }
}

void require_resolution(const Song& song) {
  if (song.resolution != kTicksPerQuarter) {
    throw Error(Errc::InvalidArgument, "song must be quantized to 48 ticks per quarter");
  }
}

}  // namespace

Song canonicalize_for_vocab(const Song& song, const Vocab& vocab) {
  require_resolution(song);
  Song out;
  out.n_bars = song.n_bars;
  out.bpm = song.bpm;
  for (const Track& t : song.tracks) out.tracks.push_back(canonical_track(t, song.n_bars, vocab));
  return out;
}

std::vector<int> tokenize_track(const Track& track, int n_bars, const Vocab& vocab) {
  if (vocab.representation() != Representation::RemiTrack) {
    throw Error(Errc::InvalidArgument, "REMI_Track tokenization needs a vocab with BarEmpty");
  }
  Track c = canonical_track(track, n_bars, vocab);
  std::vector<int> seq{vocab.instrument_id(c.instrument), kBosId};
  std::size_t i = 0;
  for (int b = 0; b < n_bars; ++b) {
    const int bar_end = (b + 1) * kTicksPerBar;
    if (i == c.notes.size() || c.notes[i].onset >= bar_end) {
      seq.push_back(vocab.bar_id(true));
      continue;
    }
    seq.push_back(vocab.bar_id(false));
    int last_onset = -1;
    for (; i < c.notes.size() && c.notes[i].onset < bar_end; ++i) {
      const Note& n = c.notes[i];
      if (n.onset != last_onset) {
        seq.push_back(vocab.position_id(n.onset - b * kTicksPerBar));
        last_onset = n.onset;
      }
      append_note(seq, n, c.is_drum(), vocab);
    }
  }
  seq.push_back(kEosId);
  return seq;
}

TrackTokenSeqs tokenize_song(const Song& song, const Vocab& vocab) {
  require_resolution(song);
  std::vector<std::vector<int>> seqs;
  std::vector<Instrument> insts;
  for (const Track& t : song.tracks) {
    seqs.push_back(tokenize_track(t, song.n_bars, vocab));
    insts.push_back(t.instrument);
  }
  return pad_tracks(std::move(seqs), std::move(insts), song.n_bars);
}

Track detokenize_track(std::span<const int> seq, int n_bars, const Vocab& vocab, int track_index) {
  auto bad = [&](long index, const std::string& what) {
    return Error(Errc::MalformedSequence, what + " (track " + std::to_string(track_index) + ", index " +
                                              std::to_string(index) + ")",
                 track_index, index);
  };
  auto tok = [&](std::size_t t) -> Token {
    if (!vocab.contains(seq[t])) throw bad(static_cast<long>(t), "unknown id " + std::to_string(seq[t]));
    return vocab.token(seq[t]);
  };
  if (seq.empty() || tok(0).kind != TokenKind::Instrument) throw bad(0, "sequence must open with an Instrument token");
  if (seq.size() < 2 || tok(1).kind != TokenKind::Bos) throw bad(1, "expected BOS after the Instrument token");
  Track track = make_track(static_cast<Instrument>(tok(0).value));
  const bool drum = track.is_drum();

  int bar = -1;
  int pos = -1;
  bool bar_empty = false;
  int stage = 0;  // 0 idle, 1 after Pitch, 2 after Duration
  Note pending;
  bool ended = false;
  for (std::size_t t = 2; t < seq.size(); ++t) {
    const long at = static_cast<long>(t);
    Token k = tok(t);
    if (ended) {
      if (k.kind != TokenKind::Pad) throw bad(at, "token after EOS");
      continue;
    }
    if (stage != 0 && k.kind != (stage == 1 ? TokenKind::Duration : TokenKind::Velocity)) {
      throw bad(at, "incomplete Pitch/Duration/Velocity group");
    }
    switch (k.kind) {
      case TokenKind::Eos:
        ended = true;
        break;
      case TokenKind::BarNormal:
      case TokenKind::BarEmpty:
        if (++bar >= n_bars) throw bad(at, "more than " + std::to_string(n_bars) + " bars");
        pos = -1;
        bar_empty = k.kind == TokenKind::BarEmpty;
        break;
      case TokenKind::Position:
        if (bar < 0) throw bad(at, "Position before any Bar");
        if (bar_empty) throw bad(at, "Position inside an empty bar");
        if (k.value < pos) throw bad(at, "Position moves backwards");
        pos = k.value;
        break;
      case TokenKind::Pitch:
        if (drum) throw bad(at, "Pitch token in a drum track");
        if (pos < 0) throw bad(at, "note token before any Position");
        pending = Note{k.value, bar * kTicksPerBar + pos, 1, 1};
        stage = 1;
        break;
      case TokenKind::Duration:
        if (stage != 1) throw bad(at, "Duration without Pitch");
        pending.duration = k.value;
        stage = 2;
        break;
      case TokenKind::Velocity:
        if (stage != 2) throw bad(at, "Velocity without Duration");
        pending.velocity = velocity_from_bin(k.value);
        track.notes.push_back(pending);
        stage = 0;
        break;
      case TokenKind::PitchDrum:
        if (!drum) throw bad(at, "drum token in a pitched track");
        if (pos < 0) throw bad(at, "note token before any Position");
        track.notes.push_back(Note{k.value, bar * kTicksPerBar + pos, kDrumDuration, kDrumVelocity});
        break;
      case TokenKind::Pad:
        throw bad(at, "PAD before EOS");
      case TokenKind::Merged:
        throw bad(at, "merged token; decode BPE first");
      case TokenKind::Instrument:
      case TokenKind::Bos:
        throw bad(at, "framing token inside the sequence");
    }
  }
  if (!ended) throw bad(static_cast<long>(seq.size()), "missing EOS");
  if (bar + 1 != n_bars) {
    throw bad(static_cast<long>(seq.size()),
              "found " + std::to_string(bar + 1) + " bars, expected " + std::to_string(n_bars));
  }
  normalize_notes(track);
  return track;
}

Song detokenize(const TrackTokenSeqs& seqs, const Vocab& vocab) {
  Song song;
  song.n_bars = seqs.n_bars;
  for (std::size_t i = 0; i < seqs.seqs.size(); ++i) {
    Track t = detokenize_track(seqs.seqs[i], seqs.n_bars, vocab, static_cast<int>(i));
    if (i < seqs.instruments.size() && seqs.instruments[i] != t.instrument) {
      throw Error(Errc::MalformedSequence, "instrument token disagrees with track metadata",
                  static_cast<int>(i), 0);
    }
    song.tracks.push_back(std::move(t));
  }
  return song;
}

TrackTokenSeqs pad_tracks(std::vector<std::vector<int>> seqs, std::vector<Instrument> instruments, int n_bars,
                          std::size_t length) {
  for (const auto& s : seqs) length = std::max(length, s.size());
  for (auto& s : seqs) s.resize(length, kPadId);
  TrackTokenSeqs out;
  out.seqs = std::move(seqs);
  out.instruments = std::move(instruments);
  out.n_bars = n_bars;
  return out;
}

std::vector<int> strip_padding(std::span<const int> seq) {
  std::size_t n = seq.size();
  while (n > 0 && seq[n - 1] == kPadId) --n;
  return {seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<int> bar_index(std::span<const int> seq, const Vocab& vocab, int n_bars) {
  const int last = std::max(0, n_bars - 1);
  std::vector<int> out(seq.size(), 0);
  int bar = -1;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    TokenKind k = vocab.token(seq[t]).kind;
    if (k == TokenKind::Pad || k == TokenKind::Eos) {
      out[t] = last;
      continue;
    }
    if (is_bar_kind(k)) ++bar;
    out[t] = std::clamp(bar, 0, last);
  }
  return out;
}

std::vector<int> bar_token_positions(std::span<const int> seq, const Vocab& vocab) {
  std::vector<int> out;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (is_bar_kind(vocab.token(seq[t]).kind)) out.push_back(static_cast<int>(t));
  }
  return out;
}

std::vector<int> repair_track(std::span<const int> seq, Instrument inst, int n_bars, const Vocab& vocab) {
  const bool drum = inst == Instrument::Drum;
  using Group = std::vector<int>;                // Position id followed by note ids
  std::vector<std::vector<Group>> bars;
  bool pos_valid = false;
  int cur_pos = -1;
  std::vector<int> pending;
  for (int id : seq) {
    if (!vocab.contains(id) || id >= vocab.base_size()) continue;
    Token k = vocab.token(id);
    if (k.kind == TokenKind::Eos) break;
    if (is_bar_kind(k.kind)) {
      pending.clear();
      if (static_cast<int>(bars.size()) >= n_bars) break;
      bars.emplace_back();
      cur_pos = -1;
      pos_valid = false;
      continue;
    }
    if (bars.empty()) continue;
    auto& groups = bars.back();
    switch (k.kind) {
      case TokenKind::Position:
        pending.clear();
        if (k.value < cur_pos) {
          pos_valid = false;
        } else {
          if (k.value > cur_pos) groups.push_back({id});
          cur_pos = k.value;
          pos_valid = true;
        }
        break;
      case TokenKind::Pitch:
        pending.clear();
        if (!drum && pos_valid) pending.push_back(id);
        break;
      case TokenKind::Duration:
        if (pending.size() == 1) {
          pending.push_back(id);
        } else {
          pending.clear();
        }
        break;
      case TokenKind::Velocity:
        if (pending.size() == 2) {
          groups.back().insert(groups.back().end(), pending.begin(), pending.end());
          groups.back().push_back(id);
        }
        pending.clear();
        break;
      case TokenKind::PitchDrum:
        pending.clear();
        if (drum && pos_valid) groups.back().push_back(id);
        break;
      default:
        pending.clear();
        break;
    }
  }
  std::vector<int> out{vocab.instrument_id(inst), kBosId};
  for (int b = 0; b < n_bars; ++b) {
    bool has_notes = false;
    if (b < static_cast<int>(bars.size())) {
      for (const Group& g : bars[static_cast<std::size_t>(b)]) has_notes |= g.size() > 1;
    }
    out.push_back(vocab.bar_id(!has_notes));
    if (!has_notes) continue;
    for (const Group& g : bars[static_cast<std::size_t>(b)]) {
      if (g.size() > 1) out.insert(out.end(), g.begin(), g.end());
    }
  }
  out.push_back(kEosId);
  return out;
}

std::vector<int> tokenize_remi_plus(const Song& song, const Vocab& vocab) {
  Song c = canonicalize_for_vocab(song, vocab);
  struct Item {
    int onset;
    int track;
    int pitch;
    const Note* note;
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < c.tracks.size(); ++i) {
    for (const Note& n : c.tracks[i].notes) items.push_back({n.onset, static_cast<int>(i), n.pitch, &n});
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return std::tie(a.onset, a.track, a.pitch) < std::tie(b.onset, b.track, b.pitch);
  });
  std::vector<int> seq{kBosId};
  std::size_t j = 0;
  for (int b = 0; b < c.n_bars; ++b) {
    seq.push_back(vocab.bar_id(false));
    int last_onset = -1;
    for (; j < items.size() && items[j].onset < (b + 1) * kTicksPerBar; ++j) {
      const Item& it = items[j];
      if (it.onset != last_onset) {
        seq.push_back(vocab.position_id(it.onset - b * kTicksPerBar));
        last_onset = it.onset;
      }
      const Track& tr = c.tracks[static_cast<std::size_t>(it.track)];
      seq.push_back(vocab.instrument_id(tr.instrument));
      append_note(seq, *it.note, tr.is_drum(), vocab);
    }
  }
  seq.push_back(kEosId);
  return seq;
}

TokStats corpus_stats(std::span<const SongTokenCount> songs, int vocab_size) {
  if (songs.empty()) throw Error(Errc::EmptyCorpus, "no songs to summarize");
  long long tokens = 0, notes = 0, beats = 0;
  for (const auto& s : songs) {
    tokens += s.tokens;
    notes += s.notes;
    beats += s.beats;
  }
  TokStats st;
  st.vocab_size = vocab_size;
  st.n_songs = songs.size();
  st.tok_per_beat = beats > 0 ? static_cast<double>(tokens) / static_cast<double>(beats) : 0.0;
  st.tok_per_note = notes > 0 ? static_cast<double>(tokens) / static_cast<double>(notes) : 0.0;
  st.avg_len = static_cast<double>(tokens) / static_cast<double>(songs.size());
  return st;
}

long long remi_track_length(const TrackTokenSeqs& seqs) {
  std::size_t best = 0;
  for (const auto& s : seqs.seqs) best = std::max(best, strip_padding(s).size());
  return static_cast<long long>(best);
}

std::string corpus_to_text(std::span<const TokenRecord> records) {
  std::ostringstream out;
  for (const auto& r : records) {
    out << "#SONG " << r.id << '\n';
    for (const auto& tr : r.tracks) {
      for (std::size_t i = 0; i < tr.size(); ++i) out << (i ? " " : "") << tr[i];
      out << '\n';
    }
  }
  return out.str();
}

std::vector<TokenRecord> corpus_from_text(std::string_view text) {
  std::vector<TokenRecord> out;
  for (auto line : split_lines(text)) {
    if (trim(line).empty()) continue;
    if (line.substr(0, 6) == "#SONG ") {
      out.push_back({std::string(trim(line.substr(6))), {}});
      continue;
    }
    if (out.empty()) throw Error(Errc::BadFormat, "token line before any #SONG record");
    std::vector<int> ids;
    for (auto f : split_ws(line)) ids.push_back(parse_int(f));
    out.back().tracks.push_back(std::move(ids));
  }
  return out;
}

}  // namespace bcn
