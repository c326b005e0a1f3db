#include <algorithm>
#include <array>
#include <bit>

#include "bcn/error.hpp"
#include "bcn/features.hpp"

namespace bcn {

namespace {

constexpr std::array<std::string_view, kChordQualityCount> kQualityNames = {
    "maj", "min", "dim", "aug", "sus2", "sus4", "maj7", "min7", "7", "hdim7", "dim7"};

// Interval sets relative to the root, indexed by ChordQuality.
constexpr std::array<std::array<int, 4>, kChordQualityCount> kTemplates = {{
    {0, 4, 7, -1},
    {0, 3, 7, -1},
    {0, 3, 6, -1},
    {0, 4, 8, -1},
    {0, 2, 7, -1},
    {0, 5, 7, -1},
    {0, 4, 7, 11},
    {0, 3, 7, 10},
    {0, 4, 7, 10},
    {0, 3, 6, 10},
    {0, 3, 6, 9},
}};

constexpr std::array<std::string_view, 12> kPitchNames = {"C",  "C#", "D",  "D#", "E",  "F",
                                                          "F#", "G",  "G#", "A",  "A#", "B"};

unsigned template_mask(int quality, int root) {
  unsigned m = 0;
  for (int iv : kTemplates[static_cast<std::size_t>(quality)]) {
    if (iv >= 0) m |= 1u << ((root + iv) % 12);
  }
  return m;
}

}  // namespace

ChordLabel ChordLabel::from_index(int index) {
  if (index < 0 || index > kNoChordIndex) throw Error(Errc::BinOutOfVocab, "chord index out of range");
  if (index == kNoChordIndex) return {};
  return ChordLabel{index / kChordQualityCount, index % kChordQualityCount};
}

std::string ChordLabel::name() const {
  if (is_none()) return "N";
  return std::string(kPitchNames[static_cast<std::size_t>(root)]) + ":" +
         std::string(kQualityNames[static_cast<std::size_t>(quality)]);
}

ChordLabel detect_chord(std::span<const int> pitches) {
  unsigned present = 0;
  for (int p : pitches) present |= 1u << (((p % 12) + 12) % 12);
  const int n_classes = std::popcount(present);
  if (n_classes < 2) return {};

  // Scores are kept doubled so the half-point penalty stays integral.
  int best_score = -1000;
  ChordLabel best;
  for (int q = 0; q < kChordQualityCount; ++q) {
    for (int root = 0; root < 12; ++root) {
      unsigned tmpl = template_mask(q, root);
      int matched = std::popcount(present & tmpl);
      int foreign = n_classes - matched;
      int score2 = 2 * matched - foreign;
      if (score2 > best_score) {
        best_score = score2;
        best = ChordLabel{root, q};
      }
    }
  }
  if (best_score < 4) return {};
  return best;
}

std::vector<ChordLabel> beat_chords(const Song& song) {
  const int beat_ticks = song.resolution;
  const int n_beats = song.n_bars * kBeatsPerBar;
  std::vector<std::vector<int>> sounding(static_cast<std::size_t>(std::max(0, n_beats)));
  for (const auto& t : song.tracks) {
    if (t.is_drum()) continue;
    for (const auto& n : t.notes) {
      long end = static_cast<long>(n.onset) + n.duration;
      int first = n.onset / beat_ticks;
      int last = static_cast<int>((end - 1) / beat_ticks);
      for (int b = std::max(0, first); b <= last && b < n_beats; ++b) {
        sounding[static_cast<std::size_t>(b)].push_back(n.pitch);
      }
    }
  }
  std::vector<ChordLabel> out;
  out.reserve(sounding.size());
  for (const auto& pitches : sounding) out.push_back(detect_chord(pitches));
  return out;
}

}  // namespace bcn
