#include <algorithm>

#include "bcn/score_io.hpp"

namespace bcn {

namespace {

int rescale(long ticks, int resolution) {
  // Round half up onto the canonical grid.
  return static_cast<int>((2L * ticks * kTicksPerQuarter + resolution) / (2L * resolution));
}

}  // namespace

Song quantize_song(const Song& song) {
  Song out = song;
  const int res = song.resolution;
  int max_onset = -1;
  for (auto& track : out.tracks) {
    for (auto& n : track.notes) {
      n.onset = rescale(n.onset, res);
      n.duration = std::max(1, rescale(n.duration, res));
      n.velocity = std::clamp(n.velocity, 1, 127);
      if (track.is_drum()) {
        n.duration = kDrumDuration;
        n.velocity = kDrumVelocity;
      }
      max_onset = std::max(max_onset, n.onset);
    }
    normalize_notes(track);
  }
  out.resolution = kTicksPerQuarter;
  if (max_onset >= 0) out.n_bars = std::max(out.n_bars, max_onset / kTicksPerBar + 1);
  return out;
}

}  // namespace bcn
