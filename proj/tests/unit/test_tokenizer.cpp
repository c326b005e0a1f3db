#include <doctest.h>

#include <algorithm>

#include "../common/fixtures.hpp"
#include "bcn/bpe.hpp"
#include "bcn/error.hpp"
#include "bcn/score_io.hpp"
#include "bcn/synth.hpp"
#include "bcn/tokenizer.hpp"

using namespace bcn;
using namespace bcn::test;

namespace {

const Vocab& vocab() {
  static const Vocab v = Vocab::build_default();
  return v;
}

const Vocab& vocab_plus() {
  static const Vocab v = Vocab::build_default(Representation::RemiPlus);
  return v;
}

Song corpus_song(std::uint64_t seed) { return compress_instruments(quantize_song(synth_song(seed))); }

}  // namespace

TEST_CASE("vocabulary sizes") {
  CHECK(vocab().size() == 3 + 6 + 2 + 48 + 128 + 31 + 32 + 32);
  CHECK(vocab().size() == 282);
  CHECK(Vocab::build(192, {48}).size() == 204);
  CHECK(vocab_plus().size() == 281);
  CHECK(vocab().token(kPadId).kind == TokenKind::Pad);
  CHECK(vocab().token(kBosId).kind == TokenKind::Bos);
  CHECK(vocab().token(kEosId).kind == TokenKind::Eos);
  CHECK(drum_keys().size() == 31);
  CHECK(default_duration_mesh().size() == 32);
  CHECK(Vocab::from_text(vocab().to_text()) == vocab());
}

TEST_CASE("quantization helpers") {
  auto mesh = default_duration_mesh();
  CHECK(mesh.front() == 4);
  CHECK(mesh.back() == 384);
  CHECK(std::is_sorted(mesh.begin(), mesh.end()));
  CHECK(snap_duration(48, mesh) == 48);
  CHECK(snap_duration(1, mesh) == 4);
  CHECK(snap_duration(10000, mesh) == 384);
  for (std::size_t i = 0; i + 1 < mesh.size(); ++i) {
    if ((mesh[i] + mesh[i + 1]) % 2 == 0) CHECK(snap_duration((mesh[i] + mesh[i + 1]) / 2, mesh) == mesh[i]);
  }
  CHECK(velocity_bin(64) == 16);
  CHECK(velocity_bin(127) == 31);
  for (int b = 0; b < kVelocityBins; ++b) CHECK(velocity_bin(velocity_from_bin(b)) == b);
  CHECK(map_drum_key(36) == 36);
  CHECK(map_drum_key(30) == 29);
  CHECK(map_drum_key(81) == 59);
}

TEST_CASE("tokenize a single piano note") {
  Song s = song(3, {track(Instrument::Piano, {note(60, 0, 48, 64)})});
  const auto& v = vocab();
  std::vector<int> want = {v.instrument_id(Instrument::Piano), kBosId, v.bar_id(false), v.position_id(0),
                           v.pitch_id(60), v.duration_id(48), v.velocity_id(16), v.bar_id(true), v.bar_id(true),
                           kEosId};
  CHECK(tokenize_track(s.tracks[0], 3, v) == want);
  CHECK(detokenize_track(want, 3, v) == canonicalize_for_vocab(s, v).tracks[0]);
  CHECK(detokenize_track(want, 3, v).notes[0].velocity == velocity_from_bin(16));
}

TEST_CASE("tokenize drums and empty tracks") {
  const auto& v = vocab();
  Track kick = track(Instrument::Drum, {note(36, 0, 24, 64)});
  CHECK(tokenize_track(kick, 1, v) == std::vector<int>{v.instrument_id(Instrument::Drum), kBosId, v.bar_id(false),
                                                       v.position_id(0), v.drum_id(36), kEosId});
  Track empty = make_track(Instrument::Bass);
  CHECK(tokenize_track(empty, 2, v) ==
        std::vector<int>{v.instrument_id(Instrument::Bass), kBosId, v.bar_id(true), v.bar_id(true), kEosId});
  CHECK(detokenize_track(tokenize_track(empty, 2, v), 2, v) == empty);
}

TEST_CASE("detokenize rejects grammar violations with their location") {
  const auto& v = vocab();
  std::vector<int> bad = {v.instrument_id(Instrument::Piano), kBosId, v.bar_id(false), v.pitch_id(60),
                          v.duration_id(48), v.velocity_id(16), kEosId};
  try {
    detokenize_track(bad, 1, v, 2);
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MalformedSequence);
    CHECK(e.index() == 3);
    CHECK(e.track() == 2);
  }
  std::vector<int> two_bars = {v.instrument_id(Instrument::Piano), kBosId, v.bar_id(true), v.bar_id(true), kEosId};
  CHECK_THROWS_AS(detokenize_track(two_bars, 3, v), Error);
  std::vector<int> unknown = {v.instrument_id(Instrument::Piano), kBosId, 9999, kEosId};
  CHECK_THROWS_AS(detokenize_track(unknown, 1, v), Error);
}

TEST_CASE("round trip over synthetic songs") {
  const auto& v = vocab();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Song s = corpus_song(seed);
    TrackTokenSeqs seqs = tokenize_song(s, v);
    CHECK(seqs.n_tracks() == s.tracks.size());
    for (const auto& q : seqs.seqs) CHECK(q.size() == seqs.length());
    CHECK(detokenize(seqs, v) == canonicalize_for_vocab(s, v));
    CHECK(canonicalize_for_vocab(canonicalize_for_vocab(s, v), v) == canonicalize_for_vocab(s, v));
  }
}

TEST_CASE("round trip over random songs") {
  const auto& v = vocab();
  Lcg g(5);
  for (int k = 0; k < 20; ++k) {
    Song s = random_song(g, g.uniform(1, 6), g.uniform(0, 40));
    CHECK(detokenize(tokenize_song(s, v), v) == canonicalize_for_vocab(s, v));
  }
}

TEST_CASE("bar_index and bar_token_positions") {
  const auto& v = vocab();
  Song s = song(2, {track(Instrument::Piano, {note(60, 0), note(62, 192)})});
  auto seq = tokenize_track(s.tracks[0], 2, v);
  // Inst BOS Bar Pos P D V Bar Pos P D V EOS PAD
  seq.push_back(kPadId);
  CHECK(bar_index(seq, v, 2) == std::vector<int>{0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1});
  CHECK(bar_token_positions(seq, v) == std::vector<int>{2, 7});
  CHECK(strip_padding(seq).size() == 13);
}

TEST_CASE("repair_track produces a well-formed sequence") {
  const auto& v = vocab();
  Lcg g(9);
  for (int k = 0; k < 50; ++k) {
    std::vector<int> junk(static_cast<std::size_t>(g.uniform(0, 60)));
    for (int& x : junk) x = g.uniform(0, v.size() - 1);
    const int bars = g.uniform(1, 4);
    const Instrument inst = static_cast<Instrument>(g.uniform(0, 5));
    auto fixed = repair_track(junk, inst, bars, v);
    CHECK(fixed.front() == v.instrument_id(inst));
    CHECK(fixed.back() == kEosId);
    CHECK(bar_token_positions(fixed, v).size() == static_cast<std::size_t>(bars));
    CHECK_NOTHROW(detokenize_track(fixed, bars, v));
  }
  Song s = corpus_song(1);
  auto seq = tokenize_track(s.tracks[1], s.n_bars, v);
  CHECK(repair_track(seq, s.tracks[1].instrument, s.n_bars, v) == seq);
}

TEST_CASE("REMI+ counts") {
  const auto& v = vocab_plus();
  Song one = song(1, {track(Instrument::Piano, {note(60, 0)})});
  auto seq = tokenize_remi_plus(one, v);
  CHECK(seq.size() == 6 + 2);  // Bar Pos Inst Pitch Dur Vel, framed by BOS/EOS
  CHECK(seq.front() == kBosId);
  CHECK(seq.back() == kEosId);
  Song empty = song(1, {make_track(Instrument::Piano)});
  CHECK(tokenize_remi_plus(empty, v).size() == 3);
}

TEST_CASE("five notes on four instruments") {
  Song s = five_note_bar();
  auto plus = tokenize_remi_plus(s, vocab_plus());
  CHECK(plus.size() - 2 == 20);

  const auto& v = vocab();
  TrackTokenSeqs seqs = tokenize_song(s, v);
  // Merge every pitched note into one token: (Pitch, Dur) then (+, Vel).
  std::vector<Merge> merges;
  int next = v.size();
  for (const auto& t : s.tracks) {
    if (t.is_drum()) continue;
    const auto& n = t.notes[0];
    const int d = snap_duration(n.duration, v.duration_mesh());
    merges.push_back({v.pitch_id(n.pitch), v.duration_id(d), next});
    merges.push_back({next, v.velocity_id(velocity_bin(n.velocity)), next + 1});
    next += 2;
  }
  BpeModel bpe(v, merges);
  std::size_t longest = 0;
  for (const auto& q : seqs.seqs) {
    auto enc = bpe.encode(strip_padding(q));
    CHECK(bpe.decode(enc) == strip_padding(q));
    longest = std::max(longest, enc.size() - 3);  // without Instrument, BOS, EOS
  }
  CHECK(longest == 5);
}

TEST_CASE("corpus statistics") {
  std::vector<std::vector<int>> tracks = {std::vector<int>(10, 5), std::vector<int>(8, 5), std::vector<int>(6, 5),
                                          std::vector<int>(6, 5)};
  TrackTokenSeqs seqs = pad_tracks(tracks, {Instrument::Drum, Instrument::Piano, Instrument::Bass,
                                            Instrument::SquareSynth}, 1);
  CHECK(seqs.length() == 10);
  CHECK(remi_track_length(seqs) == 10);

  std::vector<SongTokenCount> one = {{32, 8, 16}};
  TokStats st = corpus_stats(one, 282);
  CHECK(st.tok_per_beat == doctest::Approx(2.0));
  CHECK(st.tok_per_note == doctest::Approx(4.0));
  CHECK(st.avg_len == doctest::Approx(32.0));
  CHECK(st.n_songs == 1);
}

TEST_CASE("token corpus text round trip") {
  std::vector<TokenRecord> recs = {{"a", {{3, 1, 4}, {1, 5}}}, {"b_w0", {{9}, {2, 6}}}};
  CHECK(corpus_from_text(corpus_to_text(recs)) == recs);
  CHECK_THROWS_AS(corpus_from_text("3 1 4\n"), Error);
}
