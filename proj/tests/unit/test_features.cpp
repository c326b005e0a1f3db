#include <doctest.h>

#include <cmath>

#include "../common/fixtures.hpp"
#include "bcn/error.hpp"
#include "bcn/features.hpp"
#include "bcn/score_io.hpp"
#include "bcn/synth.hpp"

using namespace bcn;
using namespace bcn::test;

namespace {

ChordLabel chord_of(std::vector<int> pcs) { return detect_chord(pcs); }

// Bin oracles written from the bin definitions, independent of the library.
int oracle_bin(Feature f, double x) {
  auto fl = [](double v, int hi) { return std::max(0, std::min(hi, static_cast<int>(std::floor(v)))); };
  switch (f) {
    case Feature::DT: return std::min(31, static_cast<int>(x));
    case Feature::DD: return fl(x * 4.0, 49);
    case Feature::ND: return fl(x * 4.0, 65);
    case Feature::MP: return fl((std::min(99.0, std::max(32.0, x)) - 32.0) / 2.0, 33);
    case Feature::MD: return fl(30.0 * std::log(std::max(4.0, x) / 4.0) / std::log(96.0), 29);
    case Feature::MV: return fl(std::min(135.0, std::max(0.0, x)) / 4.0, 33);
    case Feature::CT: break;
  }
  return -1;
}

}  // namespace

TEST_CASE("chord detection") {
  CHECK(chord_of({60, 64, 67}) == ChordLabel{0, static_cast<int>(ChordQuality::Maj)});
  CHECK(chord_of({60, 64, 67}).name() == "C:maj");
  ChordLabel g = chord_of({67, 70, 73, 77});
  CHECK(g == ChordLabel{7, static_cast<int>(ChordQuality::HDim7)});
  CHECK(g.name() == "G:hdim7");
  CHECK(chord_of({69}).is_none());
  CHECK(chord_of({69, 81}).is_none());
  CHECK(chord_of({}).is_none());
  CHECK(chord_of({57, 60, 64}).name() == "A:min");
  CHECK(ChordLabel{}.index() == kNoChordIndex);
  for (int i = 0; i < kChordLabelCount; ++i) CHECK(ChordLabel::from_index(i).index() == i);
}

TEST_CASE("full chord voicings are recovered at every root") {
  // Symmetric qualities (aug, dim7) tie across roots and are left out.
  const std::vector<std::pair<ChordQuality, std::vector<int>>> shapes = {
      {ChordQuality::Maj, {0, 4, 7}},      {ChordQuality::Min, {0, 3, 7}},
      {ChordQuality::Dim, {0, 3, 6}},      {ChordQuality::Sus2, {0, 2, 7}},
      {ChordQuality::Maj7, {0, 4, 7, 11}}, {ChordQuality::Min7, {0, 3, 7, 10}},
      {ChordQuality::Dom7, {0, 4, 7, 10}}, {ChordQuality::HDim7, {0, 3, 6, 10}}};
  Lcg r(3);
  for (const auto& [q, iv] : shapes) {
    for (int root = 0; root < 12; ++root) {
      std::vector<int> pitches;
      for (int x : iv) pitches.push_back(36 + root + x + 12 * r.uniform(0, 3));
      CHECK(detect_chord(pitches) == ChordLabel{root, static_cast<int>(q)});
    }
  }
}

TEST_CASE("beat chords include held notes") {
  Song s = song(1, {track(Instrument::Piano, {note(60, 0, 192), note(64, 0, 192), note(67, 96, 96)})});
  auto chords = beat_chords(s);
  REQUIRE(chords.size() == 4);
  CHECK(chords[0].name() == "C:maj");  // two matched tones reach the threshold
  CHECK(chords[2].name() == "C:maj");
  CHECK(chords[3].name() == "C:maj");
}

TEST_CASE("raw bar features") {
  std::vector<Note> pitched;
  for (int k = 0; k < 8; ++k) pitched.push_back(note(60 + k, k * 24, 24, 64));
  std::vector<Note> drums;
  const int keys[] = {36, 38, 42};
  for (int k = 0; k < 10; ++k) drums.push_back(note(keys[k % 3], k * 12, 24, 64));
  Song s = song(2, {track(Instrument::Drum, drums), track(Instrument::Piano, pitched)});
  RawFeatureGrid raw = extract_raw_features(s);
  CHECK(raw.at(0, 0).dt == 3);
  CHECK(raw.at(0, 0).dd == doctest::Approx(2.5));
  CHECK(raw.at(1, 0).nd == doctest::Approx(2.0));
  CHECK(raw.at(1, 0).mp == doctest::Approx(63.5));
  CHECK(raw.at(1, 0).md == doctest::Approx(24.0));
  CHECK(raw.at(1, 0).mv == doctest::Approx(64.0));
  CHECK(raw.at(1, 1).empty);
  CHECK_FALSE(raw.at(1, 0).empty);
}

TEST_CASE("feature bins") {
  CHECK(quantize_feature(Feature::ND, 2.0) == 8);
  CHECK(quantize_feature(Feature::MV, 64.0) == 16);
  CHECK(kFeatureVocab == std::array<int, kFeatureCount>{133, 32, 50, 66, 34, 30, 34});
  Lcg r(4);
  for (Feature f : {Feature::DT, Feature::DD, Feature::ND, Feature::MP, Feature::MD, Feature::MV}) {
    CAPTURE(feature_name(f));
    const int n = kFeatureVocab[static_cast<std::size_t>(f)];
    for (int b = 0; b < n; ++b) CHECK(quantize_feature(f, bin_center(f, b)) == b);
    for (int k = 0; k < 500; ++k) {
      const double x = f == Feature::DT ? r.uniform(0, 40) : r.real(0.0, f == Feature::MD ? 500.0 : 140.0);
      CHECK(quantize_feature(f, x) == oracle_bin(f, x));
    }
    CHECK(quantize_feature(f, 1e9) == n - 1);
  }
}

TEST_CASE("expert feature grid sentinels and text round trip") {
  Song s = compress_instruments(quantize_song(synth_song(7)));
  FeatureGrid g = extract_expert_features(s);
  CHECK(g.n_tracks() == s.tracks.size());
  CHECK(g.n_bars == s.n_bars);
  for (std::size_t i = 0; i < g.n_tracks(); ++i) {
    for (int b = 0; b < g.n_bars; ++b) {
      const auto& e = g.at(i, static_cast<std::size_t>(b));
      if (g.instruments[i] == Instrument::Drum) {
        CHECK(e.nd == feature_sentinel(Feature::ND));
        CHECK(e.ct[0] == feature_sentinel(Feature::CT));
      } else {
        CHECK(e.dt == feature_sentinel(Feature::DT));
        CHECK(e.dd == feature_sentinel(Feature::DD));
      }
    }
  }
  CHECK(features_from_text(features_to_text(g)) == g);
  g.vq_entries.assign(g.entries.size(), VqCodes{1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(features_from_text(features_to_text(g)) == g);
  CHECK_THROWS_AS(features_from_text("FGRID n_tracks=1\n"), Error);
}
