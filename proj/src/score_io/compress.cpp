#include <algorithm>
#include <array>
#include <numeric>

#include "bcn/error.hpp"
#include "bcn/score_io.hpp"

namespace bcn {

std::optional<Instrument> program_class(int program) {
  if (program < 0 || program > 127) return std::nullopt;
  if (program <= 15) return Instrument::Piano;
  if (program <= 23) return Instrument::Strings;
  if (program <= 31) return Instrument::Guitar;
  if (program <= 39) return Instrument::Bass;
  if (program <= 103) return Instrument::Strings;
  if (program <= 111) return Instrument::Guitar;
  return std::nullopt;
}

double monophonic_ratio(const Track& track) {
  const auto& notes = track.notes;
  if (notes.empty()) return 0.0;
  std::vector<Note> sorted = notes;
  std::sort(sorted.begin(), sorted.end(), note_less);
  std::size_t mono = 0;
  long reach = -1;  // furthest end of all earlier notes
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Note& n = sorted[i];
    long end = static_cast<long>(n.onset) + n.duration;
    bool overlapped = reach > n.onset;
    if (i + 1 < sorted.size() && sorted[i + 1].onset < end) overlapped = true;
    if (!overlapped) ++mono;
    reach = std::max(reach, end);
  }
  return static_cast<double>(mono) / static_cast<double>(notes.size());
}

int find_melody_track(const Song& song) {
  for (std::size_t i = 0; i < song.tracks.size(); ++i) {
    const Track& t = song.tracks[i];
    if (!t.is_drum() && t.is_melody && !t.notes.empty()) return static_cast<int>(i);
  }
  int best = -1;
  double best_pitch = -1.0;
  for (std::size_t i = 0; i < song.tracks.size(); ++i) {
    const Track& t = song.tracks[i];
    if (t.is_drum() || t.notes.empty()) continue;
    if (monophonic_ratio(t) < 0.9) continue;
    double sum = 0;
    for (const auto& n : t.notes) sum += n.pitch;
    double mean = sum / static_cast<double>(t.notes.size());
    if (mean > best_pitch) {
      best_pitch = mean;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Song compress_instruments(const Song& song) {
  std::array<Track, kInstrumentCount> merged;
  for (int c = 0; c < kInstrumentCount; ++c) merged[c] = make_track(static_cast<Instrument>(c));

  bool any_flagged = false;
  for (const auto& t : song.tracks) any_flagged |= (!t.is_drum() && t.is_melody && !t.notes.empty());
  const int melody = find_melody_track(song);

  for (std::size_t i = 0; i < song.tracks.size(); ++i) {
    const Track& t = song.tracks[i];
    if (t.notes.empty()) continue;
    std::optional<Instrument> cls;
    bool is_melody = any_flagged ? (!t.is_drum() && t.is_melody) : static_cast<int>(i) == melody;
    if (t.is_drum()) {
      cls = Instrument::Drum;
    } else if (is_melody) {
      cls = Instrument::SquareSynth;
    } else {
      cls = program_class(t.program);
    }
    if (!cls) continue;
    auto& dst = merged[static_cast<std::size_t>(*cls)].notes;
    dst.insert(dst.end(), t.notes.begin(), t.notes.end());
  }
  for (auto& t : merged) normalize_notes(t);

  const auto& drum = merged[static_cast<std::size_t>(Instrument::Drum)];
  const auto& lead = merged[static_cast<std::size_t>(Instrument::SquareSynth)];
  if (drum.notes.empty()) throw Error(Errc::NoDrumTrack, "song has no drum notes");
  if (lead.notes.empty()) throw Error(Errc::NoMelodyTrack, "no melody track identified");

  std::vector<int> accompaniment;
  for (Instrument c : {Instrument::Piano, Instrument::Guitar, Instrument::Bass, Instrument::Strings}) {
    if (!merged[static_cast<std::size_t>(c)].notes.empty()) accompaniment.push_back(static_cast<int>(c));
  }
  std::stable_sort(accompaniment.begin(), accompaniment.end(), [&](int a, int b) {
    return merged[a].notes.size() > merged[b].notes.size();
  });
  if (accompaniment.size() > 2) accompaniment.resize(2);

  Song out;
  out.n_bars = song.n_bars;
  out.resolution = song.resolution;
  out.bpm = song.bpm;
  for (int c = 0; c < kInstrumentCount; ++c) {
    auto inst = static_cast<Instrument>(c);
    bool keep = inst == Instrument::Drum || inst == Instrument::SquareSynth ||
                std::find(accompaniment.begin(), accompaniment.end(), c) != accompaniment.end();
    if (keep) out.tracks.push_back(std::move(merged[static_cast<std::size_t>(c)]));
  }
  return out;
}

}  // namespace bcn
