#include "bcn/song.hpp"

#include <algorithm>
#include <tuple>

namespace bcn {

namespace {
constexpr std::array<std::string_view, kInstrumentCount> kNames = {
    "Drum", "Piano", "Guitar", "Bass", "Strings", "SquareSynth"};
}

std::string_view instrument_name(Instrument inst) {
  return kNames[static_cast<std::size_t>(inst)];
}

std::optional<Instrument> instrument_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Instrument>(i);
  }
  return std::nullopt;
}

int canonical_program(Instrument inst) {
  switch (inst) {
    case Instrument::Drum: return 0;
    case Instrument::Piano: return 0;
    case Instrument::Guitar: return 24;
    case Instrument::Bass: return 32;
    case Instrument::Strings: return 48;
    case Instrument::SquareSynth: return 80;
  }
  return 0;
}

bool note_less(const Note& a, const Note& b) {
  return std::tie(a.onset, a.pitch, a.duration, a.velocity) <
         std::tie(b.onset, b.pitch, b.duration, b.velocity);
}

std::size_t Song::note_count() const {
  std::size_t n = 0;
  for (const auto& t : tracks) n += t.notes.size();
  return n;
}

void normalize_notes(Track& track) {
  auto& notes = track.notes;
  std::sort(notes.begin(), notes.end(), [](const Note& a, const Note& b) {
    return std::tie(a.onset, a.pitch, b.duration, b.velocity) <
           std::tie(b.onset, b.pitch, a.duration, a.velocity);
  });
  auto last = std::unique(notes.begin(), notes.end(), [](const Note& a, const Note& b) {
    return a.onset == b.onset && a.pitch == b.pitch;
  });
  notes.erase(last, notes.end());
}

Track make_track(Instrument inst) {
  Track t;
  t.instrument = inst;
  t.program = canonical_program(inst);
  t.is_melody = inst == Instrument::SquareSynth;
  return t;
}

}  // namespace bcn
