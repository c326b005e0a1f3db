#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcn/song.hpp"
#include "bcn/vocab.hpp"

namespace bcn {

// One sequence per track, all padded with PAD to the same length.
struct TrackTokenSeqs {
  std::vector<Instrument> instruments;
  std::vector<std::vector<int>> seqs;
  int n_bars = 0;

  std::size_t n_tracks() const { return seqs.size(); }
  std::size_t length() const { return seqs.empty() ? 0 : seqs.front().size(); }
  friend bool operator==(const TrackTokenSeqs&, const TrackTokenSeqs&) = default;
};

// The song as the vocabulary can represent it: onsets snapped to the position
// grid (ties down), durations to the mesh, velocities to bin midpoints, drum
// keys folded onto the 31-key set with the fixed drum duration/velocity, and
// track metadata reset to the class defaults.
// detokenize(tokenize_song(s)) == canonicalize_for_vocab(s).
Song canonicalize_for_vocab(const Song& song, const Vocab& vocab);

// Unpadded sequence for one track: Instrument, BOS, bars, EOS.
std::vector<int> tokenize_track(const Track& track, int n_bars, const Vocab& vocab);
TrackTokenSeqs tokenize_song(const Song& song, const Vocab& vocab);

// Throws MalformedSequence with the offending (track, index).
Track detokenize_track(std::span<const int> seq, int n_bars, const Vocab& vocab, int track_index = 0);
Song detokenize(const TrackTokenSeqs& seqs, const Vocab& vocab);

// Pads every sequence to the longest one (or to `length` when larger).
TrackTokenSeqs pad_tracks(std::vector<std::vector<int>> seqs, std::vector<Instrument> instruments,
                          int n_bars, std::size_t length = 0);
std::vector<int> strip_padding(std::span<const int> seq);

// Bar number of every position: Instrument/BOS map to bar 0, tokens from the
// k-th bar token onward to bar k, EOS/PAD to bar n_bars-1.
std::vector<int> bar_index(std::span<const int> seq, const Vocab& vocab, int n_bars);
// Indices of the bar tokens of a sequence.
std::vector<int> bar_token_positions(std::span<const int> seq, const Vocab& vocab);

// Rebuilds a well-formed track sequence out of an arbitrary id stream over
// the base vocabulary: tokens that break the grammar are dropped, bar labels
// are recomputed from content, missing bars are appended empty and anything
// past n_bars is cut.
std::vector<int> repair_track(std::span<const int> seq, Instrument inst, int n_bars, const Vocab& vocab);

// Single interleaved sequence: BOS, then per bar a Bar token, per onset a
// Position, per note (onset, track, pitch order) Instrument + Pitch/Duration/
// Velocity or Instrument + PitchDrum, then EOS. `vocab` is a RemiPlus vocab.
std::vector<int> tokenize_remi_plus(const Song& song, const Vocab& vocab);

struct SongTokenCount {
  long long tokens = 0;  // REMI_Track: longest unpadded track; REMI+: sequence length
  long long notes = 0;
  long long beats = 0;
};

struct TokStats {
  int vocab_size = 0;
  double tok_per_beat = 0;
  double tok_per_note = 0;
  double avg_len = 0;
  std::size_t n_songs = 0;
};

TokStats corpus_stats(std::span<const SongTokenCount> songs, int vocab_size);
long long remi_track_length(const TrackTokenSeqs& seqs);

// Token corpus file: "#SONG <id>" then one line of ids per track (unpadded).
struct TokenRecord {
  std::string id;
  std::vector<std::vector<int>> tracks;
  friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};
std::string corpus_to_text(std::span<const TokenRecord> records);
std::vector<TokenRecord> corpus_from_text(std::string_view text);

}  // namespace bcn
