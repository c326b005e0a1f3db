#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bcn {

// Canonical tick grid: 48 ticks per quarter, 4/4 only.
inline constexpr int kTicksPerQuarter = 48;
inline constexpr int kTicksPerBeat = kTicksPerQuarter;
inline constexpr int kBeatsPerBar = 4;
inline constexpr int kTicksPerBar = kTicksPerBeat * kBeatsPerBar;
inline constexpr int kDrumDuration = 24;  // 16th note
inline constexpr int kDrumVelocity = 64;
inline constexpr int kDefaultBpm = 120;

enum class Instrument : std::uint8_t { Drum, Piano, Guitar, Bass, Strings, SquareSynth };
inline constexpr int kInstrumentCount = 6;

std::string_view instrument_name(Instrument inst);
std::optional<Instrument> instrument_from_name(std::string_view name);
// General-MIDI program used when a compressed class is written back to MIDI.
int canonical_program(Instrument inst);

struct Note {
  int pitch = 0;
  int onset = 0;
  int duration = 1;
  int velocity = 64;

  friend bool operator==(const Note&, const Note&) = default;
};

// Track order: (onset, pitch, duration, velocity).
bool note_less(const Note& a, const Note& b);

struct Track {
  Instrument instrument = Instrument::Piano;
  int program = 0;          // GM program, meaningful for pitched tracks
  bool is_melody = false;   // melody flag from metadata or heuristic
  std::string name;
  std::vector<Note> notes;

  bool is_drum() const { return instrument == Instrument::Drum; }
  friend bool operator==(const Track&, const Track&) = default;
};

struct Song {
  std::vector<Track> tracks;
  int n_bars = 0;
  int resolution = kTicksPerQuarter;  // ticks per quarter of the note data
  int bpm = kDefaultBpm;

  int ticks_per_bar() const { return resolution * kBeatsPerBar; }
  std::size_t note_count() const;
  friend bool operator==(const Song&, const Song&) = default;
};

// Sorts notes and drops repeated (onset, pitch) pairs, keeping the longest.
void normalize_notes(Track& track);

// A track carrying the canonical metadata of a compressed instrument class.
Track make_track(Instrument inst);

}  // namespace bcn
