#include <set>
#include <vector>

#include "bcn/score_io.hpp"

namespace bcn {

std::string_view filter_rule_name(FilterRule rule) {
  switch (rule) {
    case FilterRule::MinInstruments: return "MinInstruments";
    case FilterRule::MissingDrum: return "MissingDrum";
    case FilterRule::MissingMelody: return "MissingMelody";
    case FilterRule::MinBars: return "MinBars";
    case FilterRule::MinNotes: return "MinNotes";
    case FilterRule::MaxEmptyBars: return "MaxEmptyBars";
  }
  return "?";
}

int count_empty_bars(const Song& song) {
  if (song.n_bars <= 0) return 0;
  std::vector<char> used(static_cast<std::size_t>(song.n_bars), 0);
  const int bar_ticks = song.ticks_per_bar();
  for (const auto& t : song.tracks) {
    for (const auto& n : t.notes) {
      int bar = n.onset / bar_ticks;
      if (bar >= 0 && bar < song.n_bars) used[static_cast<std::size_t>(bar)] = 1;
    }
  }
  int empty = 0;
  for (char u : used) empty += u ? 0 : 1;
  return empty;
}

FilterVerdict filter_song(const Song& song, const FilterLimits& limits) {
  FilterVerdict v;
  std::set<Instrument> present;
  for (const auto& t : song.tracks) {
    if (!t.notes.empty()) present.insert(t.instrument);
  }
  if (static_cast<int>(present.size()) < limits.min_instruments) v.reasons.push_back(FilterRule::MinInstruments);
  if (!present.count(Instrument::Drum)) v.reasons.push_back(FilterRule::MissingDrum);
  if (!present.count(Instrument::SquareSynth)) v.reasons.push_back(FilterRule::MissingMelody);
  if (song.n_bars <= limits.min_bars_exclusive) v.reasons.push_back(FilterRule::MinBars);
  if (static_cast<long>(song.note_count()) <= limits.min_notes_exclusive) v.reasons.push_back(FilterRule::MinNotes);
  if (count_empty_bars(song) > limits.max_empty_bars) v.reasons.push_back(FilterRule::MaxEmptyBars);
  v.accepted = v.reasons.empty();
  return v;
}

}  // namespace bcn
