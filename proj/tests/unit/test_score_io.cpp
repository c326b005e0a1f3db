#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "../common/fixtures.hpp"
#include "bcn/error.hpp"
#include "bcn/features.hpp"
#include "bcn/io.hpp"
#include "bcn/midi.hpp"
#include "bcn/score_io.hpp"
#include "bcn/synth.hpp"
#include "bcn/text.hpp"

using namespace bcn;
using namespace bcn::test;

namespace {

std::vector<std::uint8_t> smf(int division, std::vector<std::uint8_t> track) {
  std::vector<std::uint8_t> b = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1,
                                 static_cast<std::uint8_t>(division >> 8), static_cast<std::uint8_t>(division)};
  const auto n = static_cast<std::uint32_t>(track.size());
  for (std::uint8_t c : {'M', 'T', 'r', 'k'}) b.push_back(c);
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(n >> s));
  b.insert(b.end(), track.begin(), track.end());
  return b;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::InvalidArgument;
}

const std::filesystem::path kSource = BCN_SOURCE_DIR;

}  // namespace

TEST_CASE("parse_midi reads a hand-assembled one-note file") {
  auto bytes = smf(48, {0x00, 0x90, 60, 80, 0x30, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00});
  CHECK(bytes == read_bytes(kSource / "tests/data/one_note.mid"));
  Song s = parse_midi(bytes);
  REQUIRE(s.tracks.size() == 1);
  REQUIRE(s.tracks[0].notes.size() == 1);
  CHECK(s.tracks[0].notes[0] == Note{60, 0, 48, 80});
  CHECK(s.resolution == 48);
}

TEST_CASE("parse_midi handles empty files, meters and truncation") {
  Song empty = parse_midi(smf(96, {0x00, 0xFF, 0x2F, 0x00}));
  CHECK(empty.n_bars == 0);
  CHECK(empty.note_count() == 0);

  auto waltz = smf(96, {0x00, 0xFF, 0x58, 0x04, 0x03, 0x02, 0x18, 0x08, 0x00, 0xFF, 0x2F, 0x00});
  CHECK(code_of([&] { parse_midi(waltz); }) == Errc::UnsupportedTimeSignature);

  auto common = smf(96, {0x00, 0xFF, 0x58, 0x04, 0x04, 0x02, 0x18, 0x08, 0x00, 0xFF, 0x2F, 0x00});
  CHECK_NOTHROW(parse_midi(common));

  auto bytes = smf(48, {0x00, 0x90, 60, 80, 0x30, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00});
  bytes.resize(bytes.size() - 5);
  CHECK(code_of([&] { parse_midi(bytes); }) == Errc::MalformedMidi);
  CHECK(code_of([&] { parse_midi(std::vector<std::uint8_t>{'R', 'I', 'F', 'F'}); }) == Errc::MalformedMidi);
}

TEST_CASE("parse_midi running status, zero-velocity note-off and channel 10") {
  auto bytes = smf(48, {0x00, 0x99, 36, 100, 0x0C, 36, 0,   // running status, vel 0 = off
                        0x00, 0x91, 64, 70, 0x60, 0x81, 64, 0, 0x00, 0xFF, 0x2F, 0x00});
  Song s = parse_midi(bytes);
  REQUIRE(s.tracks.size() == 2);
  auto drum = std::find_if(s.tracks.begin(), s.tracks.end(), [](const Track& t) { return t.is_drum(); });
  REQUIRE(drum != s.tracks.end());
  CHECK(drum->notes[0] == Note{36, 0, 12, 100});
}

TEST_CASE("parse_midi agrees with the mido fingerprints of the micro-corpus") {
  std::istringstream frozen(read_text(kSource / "tests/data/mido_fingerprints.txt"));
  std::string name;
  long long tpb, count, sp, so, sd, sv;
  int files = 0;
  while (frozen >> name >> tpb >> count >> sp >> so >> sd >> sv) {
    CAPTURE(name);
    Song s = parse_midi(read_bytes(kSource / "data/micro_corpus" / name));
    long long n = 0, p = 0, o = 0, d = 0, v = 0;
    for (const auto& t : s.tracks) {
      for (const auto& x : t.notes) {
        ++n, p += x.pitch, o += x.onset, d += x.duration, v += x.velocity;
      }
    }
    CHECK(s.resolution == tpb);
    CHECK(n == count);
    CHECK(p == sp);
    CHECK(o == so);
    CHECK(d == sd);
    CHECK(v == sv);
    ++files;
  }
  CHECK(files == 30);
}

TEST_CASE("write_midi round trip of a compressed song is the identity") {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    Song s = compress_instruments(quantize_song(synth_song(seed)));
    Song back = compress_instruments(quantize_song(parse_midi(write_midi(s))));
    back.n_bars = s.n_bars;
    CHECK(back == s);
  }
}

TEST_CASE("quantize_song snaps to the 48-tick grid") {
  Song s = song(1, {track(Instrument::Piano, {note(60, 49, 100, 70)})});
  s.resolution = 100;
  Song q = quantize_song(s);
  // round(0.49 * 48) = 24, round(1.0 * 48) = 48
  CHECK(q.tracks[0].notes[0] == Note{60, 24, 48, 70});
  CHECK(q.resolution == 48);

  Song fixed = song(1, {track(Instrument::Piano, {note(60, 24, 12, 70)})});
  CHECK(quantize_song(fixed) == fixed);

  Song drums = song(1, {track(Instrument::Drum, {note(36, 0, 96, 100)})});
  CHECK(quantize_song(drums).tracks[0].notes[0] == Note{36, 0, 24, 64});

  Song tiny = song(1, {track(Instrument::Piano, {note(60, 0, 1, 70)})});
  tiny.resolution = 480;
  CHECK(quantize_song(tiny).tracks[0].notes[0].duration == 1);
}

TEST_CASE("quantize_song is idempotent on synthetic songs") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Song q = quantize_song(synth_song(seed));
    CHECK(quantize_song(q) == q);
  }
}

TEST_CASE("program_class table") {
  CHECK(program_class(0) == Instrument::Piano);
  CHECK(program_class(8) == Instrument::Piano);
  CHECK(program_class(16) == Instrument::Strings);
  CHECK(program_class(25) == Instrument::Guitar);
  CHECK(program_class(33) == Instrument::Bass);
  CHECK(program_class(48) == Instrument::Strings);
  CHECK(program_class(60) == Instrument::Strings);
  CHECK(program_class(80) == Instrument::Strings);
  CHECK_FALSE(program_class(120).has_value());
}

TEST_CASE("compress_instruments keeps drum, melody and the two largest classes") {
  auto pitched = [](int program, int n, bool melody = false) {
    Track t;
    t.instrument = Instrument::Piano;
    t.program = program;
    t.is_melody = melody;
    t.name = melody ? "Melody" : "";
    for (int k = 0; k < n; ++k) t.notes.push_back(note(60 + k % 12, k * 48));
    return t;
  };
  Track drums = track(Instrument::Drum, {note(36, 0, 24, 64)});
  Song s = song(4, {pitched(0, 8), pitched(25, 6), pitched(33, 4), drums, pitched(80, 5, true)});
  Song c = compress_instruments(s);
  std::vector<Instrument> got;
  for (const auto& t : c.tracks) got.push_back(t.instrument);
  CHECK(got == std::vector<Instrument>{Instrument::Drum, Instrument::Piano, Instrument::Guitar,
                                       Instrument::SquareSynth});

  CHECK(compress_instruments(c) == c);

  Song six = song(4, {pitched(0, 3), pitched(25, 9), pitched(33, 7), pitched(48, 2), drums, pitched(80, 5, true)});
  got.clear();
  for (const auto& t : compress_instruments(six).tracks) got.push_back(t.instrument);
  CHECK(got == std::vector<Instrument>{Instrument::Drum, Instrument::Guitar, Instrument::Bass,
                                       Instrument::SquareSynth});

  Song no_drum = song(4, {pitched(0, 8), pitched(80, 5, true)});
  CHECK(code_of([&] { compress_instruments(no_drum); }) == Errc::NoDrumTrack);
}

TEST_CASE("find_melody_track falls back to the highest monophonic track") {
  auto mono = [](int base) {
    Track t;
    for (int k = 0; k < 8; ++k) t.notes.push_back(note(base + k, k * 48, 48));
    return t;
  };
  Track chords;
  for (int k = 0; k < 8; ++k) {
    chords.notes.push_back(note(84, k * 48, 48));
    chords.notes.push_back(note(88, k * 48, 48));
  }
  Song s = song(4, {mono(40), chords, mono(70)});
  CHECK(find_melody_track(s) == 2);
  s.tracks[0].is_melody = true;
  CHECK(find_melody_track(s) == 0);
  CHECK(monophonic_ratio(chords) == doctest::Approx(0.0));
  CHECK(monophonic_ratio(mono(40)) == doctest::Approx(1.0));
}

namespace {

// 4 tracks, `bars` bars, `per_bar` onsets per track per bar except `empty`
// trailing bars.
Song dense_song(int bars, int per_bar, int empty = 0) {
  std::vector<Track> tracks;
  for (Instrument inst : {Instrument::Drum, Instrument::Piano, Instrument::Bass, Instrument::SquareSynth}) {
    std::vector<Note> ns;
    for (int b = 0; b < bars - empty; ++b) {
      for (int k = 0; k < per_bar; ++k) ns.push_back(note(inst == Instrument::Drum ? 36 : 60, b * 192 + k * 24, 24));
    }
    tracks.push_back(track(inst, ns));
  }
  return song(bars, tracks);
}

}  // namespace

TEST_CASE("filter_song verdicts") {
  Song ok = dense_song(20, 8);  // 640 notes
  CHECK(ok.note_count() == 640);
  CHECK(filter_song(ok).accepted);

  Song short_song = dense_song(12, 8);
  auto v = filter_song(short_song);
  CHECK_FALSE(v.accepted);
  CHECK(std::find(v.reasons.begin(), v.reasons.end(), FilterRule::MinBars) != v.reasons.end());

  Song gaps = dense_song(30, 8, 5);
  CHECK(count_empty_bars(gaps) == 5);
  v = filter_song(gaps);
  CHECK_FALSE(v.accepted);
  CHECK(v.reasons == std::vector<FilterRule>{FilterRule::MaxEmptyBars});

  Song sparse = dense_song(20, 1);
  v = filter_song(sparse);
  CHECK(v.reasons == std::vector<FilterRule>{FilterRule::MinNotes});

  Song three = dense_song(20, 8);
  three.tracks.pop_back();
  v = filter_song(three);
  CHECK(std::find(v.reasons.begin(), v.reasons.end(), FilterRule::MinInstruments) != v.reasons.end());
  CHECK(std::find(v.reasons.begin(), v.reasons.end(), FilterRule::MissingMelody) != v.reasons.end());
}

TEST_CASE("accepted songs satisfy every rule when rechecked") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Song s = compress_instruments(quantize_song(synth_song(seed)));
    auto v = filter_song(s);
    CHECK(filter_song(s).reasons == v.reasons);
    if (!v.accepted) continue;
    CHECK(s.tracks.size() >= 4);
    CHECK(s.n_bars > 16);
    CHECK(s.note_count() > 512);
    CHECK(count_empty_bars(s) <= 4);
    CHECK(std::any_of(s.tracks.begin(), s.tracks.end(), [](const Track& t) { return t.is_drum(); }));
    CHECK(std::any_of(s.tracks.begin(), s.tracks.end(), [](const Track& t) { return t.is_melody; }));
  }
}

TEST_CASE("split_windows") {
  Song s = dense_song(40, 2);
  auto w = split_windows(s, 16, 32, 8);
  REQUIRE(w.size() == 3);
  CHECK(w[0].n_bars == 32);
  CHECK(w[1].n_bars == 32);
  CHECK(w[2].n_bars == 24);
  CHECK(w[1] == slice_bars(s, 8, 32));
  CHECK(w[2] == slice_bars(s, 16, 24));

  Song exact = dense_song(32, 2);
  auto one = split_windows(exact, 16, 32, 32);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == exact);

  CHECK(split_windows(dense_song(10, 2), 16, 32, 8).empty());
  CHECK(code_of([&] { split_windows(s, 0, 32, 8); }) == Errc::InvalidArgument);
}

TEST_CASE("windows preserve every note of their bar range") {
  Lcg g(11);
  Song s = random_song(g, 40, 60);
  for (const auto& w : split_windows(s, 16, 32, 8)) {
    std::size_t n = 0;
    for (const auto& t : w.tracks) {
      for (const auto& x : t.notes) {
        CHECK(x.onset >= 0);
        CHECK(x.onset < w.n_bars * kTicksPerBar);
        ++n;
      }
    }
    (void)n;
  }
  std::size_t total = 0;
  for (int b = 0; b < 40; b += 10) total += slice_bars(s, b, 10).note_count();
  CHECK(total == s.note_count());
}

TEST_CASE("dedupe_corpus") {
  Song a = compress_instruments(quantize_song(synth_song(2)));
  CHECK(dedupe_corpus({a, a}).size() == 1);

  Song up = a;
  for (auto& t : up.tracks) {
    if (t.is_drum()) continue;
    for (auto& n : t.notes) n.pitch += 2;
  }
  CHECK(dedupe_corpus({a, up}).size() == 2);

  // Mean velocity bins have width 4: velocity 63 vs 64 in a one-note bar.
  Song lo = dense_song(2, 1), hi = dense_song(2, 1);
  for (auto& n : lo.tracks[1].notes) n.velocity = 63;
  for (auto& n : hi.tracks[1].notes) n.velocity = 64;
  CHECK(dedupe_corpus({lo, hi}).size() == 2);
}

TEST_CASE("song text round trip") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Song s = compress_instruments(quantize_song(synth_song(seed)));
    CHECK(song_from_text(song_to_text(s)) == s);
  }
  Song with_empty = song(3, {track(Instrument::Drum, {}), track(Instrument::Piano, {note(60, 0)})});
  CHECK(song_from_text(song_to_text(with_empty)) == with_empty);
  CHECK(code_of([] { song_from_text("SONG n_bars=2\nT0 Piano 0 60\n"); }) == Errc::BadFormat);
}

TEST_CASE("stable_hash is FNV-1a") {
  CHECK(stable_hash("") == 0xcbf29ce484222325ULL);
  CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cULL);
}
