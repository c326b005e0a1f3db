#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bcn/song.hpp"

namespace bcn {

enum class TokenKind : std::uint8_t {
  Instrument,
  BarNormal,
  BarEmpty,
  Position,
  Pitch,
  PitchDrum,
  Duration,
  Velocity,
  Pad,
  Bos,
  Eos,
  Merged,
};
inline constexpr int kTokenKindCount = 12;

std::string_view token_kind_name(TokenKind kind);
std::optional<TokenKind> token_kind_from_name(std::string_view name);

// Payload by kind: Instrument enum index, position tick within the bar, MIDI
// pitch, drum key, duration length in ticks, velocity bin, or merge index.
struct Token {
  TokenKind kind = TokenKind::Pad;
  int value = 0;
  friend bool operator==(const Token&, const Token&) = default;
};

// Note-related tokens are the only ones BPE may merge.
inline bool is_note_kind(TokenKind k) {
  return k == TokenKind::Pitch || k == TokenKind::PitchDrum || k == TokenKind::Duration ||
         k == TokenKind::Velocity || k == TokenKind::Merged;
}
inline bool is_bar_kind(TokenKind k) { return k == TokenKind::BarNormal || k == TokenKind::BarEmpty; }

enum class Representation { RemiTrack, RemiPlus };

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kVelocityBins = 32;

// The 31 drum keys: GM 35-59 plus 25, 26, 27, 28, 29, 31.
std::span<const int> drum_keys();
// Nearest listed drum key (ties to the lower key).
int map_drum_key(int key);
// Default hybrid duration mesh in ticks (32 values, 4..384).
std::vector<int> default_duration_mesh();
// Nearest mesh value, ties to the shorter one; clamps to the mesh range.
int snap_duration(int ticks, std::span<const int> mesh);
int velocity_bin(int velocity);      // 32 uniform bins of width 4 over 0-127
int velocity_from_bin(int bin);      // bin midpoint

class Vocab {
 public:
  Vocab() = default;

  // PAD, BOS, EOS, 6 instruments, bar tokens (one for REMI+), 192/grid
  // positions, 128 pitches, 31 drum keys, |mesh| durations, 32 velocities.
  static Vocab build(int position_grid, std::vector<int> duration_mesh,
                     Representation repr = Representation::RemiTrack);
  static Vocab build_default(Representation repr = Representation::RemiTrack);
  // Rebuilds from explicit tokens (vocab file); ids must be dense.
  static Vocab from_tokens(std::vector<Token> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int base_size() const { return base_size_; }
  int position_grid() const { return grid_; }
  const std::vector<int>& duration_mesh() const { return mesh_; }
  Representation representation() const { return repr_; }

  const Token& token(int id) const;
  std::optional<int> find(Token t) const;
  int id(Token t) const;  // UnknownToken when absent
  bool contains(int id) const { return id >= 0 && id < size(); }
  // In REMI+ every note carries its own Instrument token, which then counts as
  // note-related for BPE.
  bool is_note_token(int id) const {
    const TokenKind k = token(id).kind;
    return is_note_kind(k) || (repr_ == Representation::RemiPlus && k == TokenKind::Instrument);
  }
  std::size_t count_kind(TokenKind k) const;

  int instrument_id(Instrument inst) const { return id({TokenKind::Instrument, static_cast<int>(inst)}); }
  int bar_id(bool empty) const { return id({empty ? TokenKind::BarEmpty : TokenKind::BarNormal, 0}); }
  int position_id(int tick) const { return id({TokenKind::Position, tick}); }
  int pitch_id(int pitch) const { return id({TokenKind::Pitch, pitch}); }
  int drum_id(int key) const { return id({TokenKind::PitchDrum, key}); }
  int duration_id(int ticks) const { return id({TokenKind::Duration, ticks}); }
  int velocity_id(int bin) const { return id({TokenKind::Velocity, bin}); }

  // A copy with `n_merges` Merged tokens appended after the base ids.
  Vocab with_merges(int n_merges) const;

  std::string token_name(int id) const;  // "Pitch:60"

  // "<id> <kind>:<value>" per line.
  std::string to_text() const;
  static Vocab from_text(std::string_view text);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  void index();

  std::vector<Token> tokens_;
  std::unordered_map<std::uint64_t, int> lookup_;
  int base_size_ = 0;
  int grid_ = 4;
  std::vector<int> mesh_;
  Representation repr_ = Representation::RemiTrack;
};

}  // namespace bcn
