#include <unordered_set>

#include "bcn/error.hpp"
#include "bcn/features.hpp"
#include "bcn/score_io.hpp"

namespace bcn {

Song slice_bars(const Song& song, int first_bar, int n_bars) {
  Song out;
  out.n_bars = n_bars;
  out.resolution = song.resolution;
  out.bpm = song.bpm;
  const long lo = static_cast<long>(first_bar) * song.ticks_per_bar();
  const long hi = lo + static_cast<long>(n_bars) * song.ticks_per_bar();
  for (const auto& t : song.tracks) {
    Track w = t;
    w.notes.clear();
    for (const auto& n : t.notes) {
      if (n.onset >= lo && n.onset < hi) {
        Note m = n;
        m.onset = static_cast<int>(n.onset - lo);
        w.notes.push_back(m);
      }
    }
    out.tracks.push_back(std::move(w));
  }
  return out;
}

std::vector<Song> split_windows(const Song& song, int min_bars, int max_bars, int stride) {
  if (min_bars < 1 || min_bars > max_bars || stride < 1) {
    throw Error(Errc::InvalidArgument, "window needs 1 <= min_bars <= max_bars and stride >= 1");
  }
  std::vector<Song> out;
  const int n = song.n_bars;
  int start = 0;
  for (; start + max_bars <= n; start += stride) out.push_back(slice_bars(song, start, max_bars));
  if (start < n && n - start >= min_bars) out.push_back(slice_bars(song, start, n - start));
  return out;
}

std::vector<Song> dedupe_corpus(const std::vector<Song>& songs) {
  std::unordered_set<std::string> seen;
  std::vector<Song> out;
  for (const auto& s : songs) {
    std::string key = features_to_text(extract_expert_features(s));
    if (seen.insert(std::move(key)).second) out.push_back(s);
  }
  return out;
}

}  // namespace bcn
