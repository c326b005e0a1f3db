#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcn/song.hpp"

namespace bcn {

enum class ChordQuality : std::uint8_t { Maj, Min, Dim, Aug, Sus2, Sus4, Maj7, Min7, Dom7, HDim7, Dim7 };
inline constexpr int kChordQualityCount = 11;
inline constexpr int kChordLabelCount = 12 * kChordQualityCount + 1;  // 133 with "no chord"
inline constexpr int kNoChordIndex = kChordLabelCount - 1;

struct ChordLabel {
  int root = -1;     // 0-11, -1 for no chord
  int quality = -1;  // ChordQuality index, -1 for no chord

  bool is_none() const { return root < 0; }
  int index() const { return is_none() ? kNoChordIndex : root * kChordQualityCount + quality; }
  static ChordLabel from_index(int index);
  std::string name() const;  // "G:hdim7", "N"
  friend bool operator==(const ChordLabel&, const ChordLabel&) = default;
};

// Template scoring over the pitch-class set: matched tones minus half the
// foreign pitch classes. Ties prefer the quality listed first, then the lower
// root. Fewer than two pitch classes, or a best score below 2, yields no chord.
ChordLabel detect_chord(std::span<const int> pitches);

// Chords for every beat of the song (n_bars * 4 entries) over all pitched
// notes sounding in the beat, including notes held from earlier onsets.
std::vector<ChordLabel> beat_chords(const Song& song);

// Expert feature types, in embedding-table order.
enum class Feature : std::uint8_t { CT, DT, DD, ND, MP, MD, MV };
inline constexpr int kFeatureCount = 7;
inline constexpr std::array<int, kFeatureCount> kFeatureVocab = {133, 32, 50, 66, 34, 30, 34};
// Reserved index (one past the vocabulary) for empty bars and for slots that
// do not apply to the track's variant.
inline int feature_sentinel(Feature f) { return kFeatureVocab[static_cast<std::size_t>(f)]; }
std::string_view feature_name(Feature f);

struct RawBarFeatures {
  bool empty = true;  // no onsets of this track in the bar
  int dt = 0;         // distinct drum keys
  double dd = 0;      // drum onsets per beat
  double nd = 0;      // pitched onsets per beat
  double mp = 0, md = 0, mv = 0;
  std::array<ChordLabel, 4> ct{};
};

struct RawFeatureGrid {
  std::vector<Instrument> instruments;
  int n_bars = 0;
  std::vector<RawBarFeatures> cells;  // row-major [track][bar]
  const RawBarFeatures& at(std::size_t track, std::size_t bar) const { return cells[track * n_bars + bar]; }
};

struct ExpertFeatures {
  int dt = 0, dd = 0, nd = 0, mp = 0, md = 0, mv = 0;
  std::array<int, 4> ct{};
  friend bool operator==(const ExpertFeatures&, const ExpertFeatures&) = default;
};

inline constexpr int kVqGroups = 8;
using VqCodes = std::array<int, kVqGroups>;

struct FeatureGrid {
  std::vector<Instrument> instruments;
  int n_bars = 0;
  std::vector<ExpertFeatures> entries;  // row-major [track][bar]
  std::vector<VqCodes> vq_entries;      // empty, or same layout as entries

  std::size_t n_tracks() const { return instruments.size(); }
  const ExpertFeatures& at(std::size_t track, std::size_t bar) const { return entries[track * n_bars + bar]; }
  ExpertFeatures& at(std::size_t track, std::size_t bar) { return entries[track * n_bars + bar]; }
  bool has_vq() const { return !vq_entries.empty(); }
  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

RawFeatureGrid extract_raw_features(const Song& song);

// Bin index for one raw scalar feature (CT is already discrete and not
// accepted here).
int quantize_feature(Feature f, double raw);
// Representative raw value of a bin; quantize_feature(f, bin_center(f, b)) == b.
double bin_center(Feature f, int bin);

FeatureGrid quantize_features(const RawFeatureGrid& raw);
FeatureGrid extract_expert_features(const Song& song);

// "FGRID n_tracks=<I> n_bars=<B> instruments=<a,b,...>" header, then one
// "F <track> <bar> k=v ..." line per cell.
std::string features_to_text(const FeatureGrid& grid);
FeatureGrid features_from_text(std::string_view text);

}  // namespace bcn
