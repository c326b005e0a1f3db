#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "bcn/song.hpp"
#include "bcn/tokenizer.hpp"

namespace bcn::test {

inline Note note(int pitch, int onset, int duration = 48, int velocity = 64) {
  return Note{pitch, onset, duration, velocity};
}

inline Track track(Instrument inst, std::vector<Note> notes) {
  Track t = make_track(inst);
  t.notes = std::move(notes);
  normalize_notes(t);
  return t;
}

inline Song song(int n_bars, std::vector<Track> tracks) {
  Song s;
  s.n_bars = n_bars;
  s.tracks = std::move(tracks);
  return s;
}

// One bar, five notes on four instruments: two drum hits and one note each
// for bass, piano and melody, spread over three onsets.
inline Song five_note_bar() {
  return song(1, {track(Instrument::Drum, {note(36, 0, 24, 64), note(38, 24, 24, 64)}),
                  track(Instrument::Piano, {note(64, 24, 48, 72)}),
                  track(Instrument::Bass, {note(40, 0, 96, 80)}),
                  track(Instrument::SquareSynth, {note(72, 12, 12, 96)})});
}

// Small deterministic generator for property tests.
struct Lcg {
  std::uint64_t s;
  explicit Lcg(std::uint64_t seed) : s(seed * 2862933555777941757ULL + 3037000493ULL) {}
  std::uint64_t next() {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    return s >> 11;
  }
  int uniform(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }
  double real(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-42; }
};

inline Song random_song(Lcg& g, int n_bars, int notes_per_track) {
  Song s;
  s.n_bars = n_bars;
  for (Instrument inst : {Instrument::Drum, Instrument::Piano, Instrument::Bass, Instrument::SquareSynth}) {
    Track t = make_track(inst);
    for (int k = 0; k < notes_per_track; ++k) {
      const int onset = g.uniform(0, n_bars * kTicksPerBar - 1);
      const int pitch = inst == Instrument::Drum ? g.uniform(35, 59) : g.uniform(24, 100);
      t.notes.push_back(note(pitch, onset, g.uniform(1, 200), g.uniform(1, 127)));
    }
    normalize_notes(t);
    s.tracks.push_back(std::move(t));
  }
  return s;
}

}  // namespace bcn::test
