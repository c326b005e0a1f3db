#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bcn/song.hpp"

namespace bcn {

// Snaps onsets/durations to the 48-per-quarter grid (round half up, duration
// floor 1) and normalizes drum notes to 24 ticks / velocity 64. Idempotent.
Song quantize_song(const Song& song);

// Six-class compression of General-MIDI programs for non-drum tracks that are
// not the melody. Programs 112-127 (percussive, sound effects) return nullopt.
std::optional<Instrument> program_class(int program);

// Fraction of notes that overlap no other note of the same track.
double monophonic_ratio(const Track& track);

// Index of the melody track, or -1: an explicitly flagged track wins,
// otherwise the non-drum track with the highest mean pitch among those at
// least 90% monophonic.
int find_melody_track(const Song& song);

// Maps tracks onto the six classes, merges tracks of the same class and keeps
// Drum, SquareSynth and the two accompaniment classes with the most notes
// (ties by class order). Output tracks follow class order.
// Throws NoDrumTrack / NoMelodyTrack.
Song compress_instruments(const Song& song);

enum class FilterRule { MinInstruments, MissingDrum, MissingMelody, MinBars, MinNotes, MaxEmptyBars };
std::string_view filter_rule_name(FilterRule rule);

struct FilterVerdict {
  bool accepted = true;
  std::vector<FilterRule> reasons;
};

struct FilterLimits {
  int min_instruments = 4;
  int min_bars_exclusive = 16;    // keep songs with more than this many bars
  int min_notes_exclusive = 512;  // ... and more than this many notes
  int max_empty_bars = 4;
};

int count_empty_bars(const Song& song);
FilterVerdict filter_song(const Song& song, const FilterLimits& limits = {});

// Bars [first_bar, first_bar + n_bars) of `song`, rebased to bar 0. Notes are
// selected by onset and keep their full duration.
Song slice_bars(const Song& song, int first_bar, int n_bars);

// Windows of max_bars every `stride` bars, plus one trailing shorter window
// when it has at least min_bars bars.
std::vector<Song> split_windows(const Song& song, int min_bars, int max_bars, int stride);

// Keeps the first song of each group sharing the same binned expert features.
std::vector<Song> dedupe_corpus(const std::vector<Song>& songs);

// Line format: "SONG n_bars=<n>" then "T<idx> <instrument> <onset> <pitch>
// <duration> <velocity>" per note. A track without notes is declared by a
// bare "T<idx> <instrument>" line so it survives the round trip.
std::string song_to_text(const Song& song);
Song song_from_text(std::string_view text);

}  // namespace bcn
