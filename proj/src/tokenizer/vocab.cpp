#include "bcn/vocab.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <sstream>

#include "bcn/error.hpp"
#include "bcn/text.hpp"

namespace bcn {

namespace {

constexpr std::array<std::string_view, kTokenKindCount> kKindNames = {
    "Instrument", "BarNormal", "BarEmpty", "Position", "Pitch", "PitchDrum",
    "Duration",   "Velocity",  "PAD",      "BOS",      "EOS",   "Merged"};

constexpr std::array<int, 31> kDrumKeys = {25, 26, 27, 28, 29, 31, 35, 36, 37, 38, 39, 40, 41, 42, 43, 44,
                                           45, 46, 47, 48, 49, 50, 51, 52, 53, 54, 55, 56, 57, 58, 59};

std::uint64_t key_of(Token t) {
  return (static_cast<std::uint64_t>(t.kind) << 32) | static_cast<std::uint32_t>(t.value);
}

}  // namespace

std::string_view token_kind_name(TokenKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<TokenKind> token_kind_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<TokenKind>(i);
  }
  return std::nullopt;
}

std::span<const int> drum_keys() { return kDrumKeys; }

int map_drum_key(int key) {
  int best = kDrumKeys[0];
  for (int k : kDrumKeys) {
    if (std::abs(k - key) < std::abs(best - key)) best = k;
  }
  return best;
}

std::vector<int> default_duration_mesh() {
  std::vector<int> mesh;
  for (int d = 4; d <= 48; d += 4) mesh.push_back(d);
  for (int d = 60; d <= 192; d += 12) mesh.push_back(d);
  for (int d = 216; d <= 384; d += 24) mesh.push_back(d);
  return mesh;
}

int snap_duration(int ticks, std::span<const int> mesh) {
  int best = mesh.front();
  for (int m : mesh) {
    if (std::abs(m - ticks) < std::abs(best - ticks)) best = m;
  }
  return best;
}

int velocity_bin(int velocity) { return std::clamp(velocity, 0, 127) / 4; }

int velocity_from_bin(int bin) { return 4 * bin + 2; }

Vocab Vocab::build(int position_grid, std::vector<int> duration_mesh, Representation repr) {
  if (position_grid < 1 || kTicksPerBar % position_grid != 0) {
    throw Error(Errc::InvalidGrid, "position grid must divide " + std::to_string(kTicksPerBar));
  }
  if (duration_mesh.empty() || !std::is_sorted(duration_mesh.begin(), duration_mesh.end()) ||
      std::adjacent_find(duration_mesh.begin(), duration_mesh.end()) != duration_mesh.end() ||
      duration_mesh.front() < 1 || duration_mesh.back() > 2 * kTicksPerBar) {
    throw Error(Errc::InvalidGrid, "duration mesh must be strictly ascending within 1..384");
  }
  Vocab v;
  v.grid_ = position_grid;
  v.mesh_ = std::move(duration_mesh);
  v.repr_ = repr;
  auto& t = v.tokens_;
  t.push_back({TokenKind::Pad, 0});
  t.push_back({TokenKind::Bos, 0});
  t.push_back({TokenKind::Eos, 0});
  for (int i = 0; i < kInstrumentCount; ++i) t.push_back({TokenKind::Instrument, i});
  t.push_back({TokenKind::BarNormal, 0});
  if (repr == Representation::RemiTrack) t.push_back({TokenKind::BarEmpty, 0});
  for (int p = 0; p < kTicksPerBar; p += position_grid) t.push_back({TokenKind::Position, p});
  for (int p = 0; p < 128; ++p) t.push_back({TokenKind::Pitch, p});
  for (int k : kDrumKeys) t.push_back({TokenKind::PitchDrum, k});
  for (int d : v.mesh_) t.push_back({TokenKind::Duration, d});
  for (int b = 0; b < kVelocityBins; ++b) t.push_back({TokenKind::Velocity, b});
  v.base_size_ = v.size();
  v.index();
  return v;
}

Vocab Vocab::build_default(Representation repr) { return build(4, default_duration_mesh(), repr); }

Vocab Vocab::from_tokens(std::vector<Token> tokens) {
  if (tokens.size() < 3 || tokens[0].kind != TokenKind::Pad || tokens[1].kind != TokenKind::Bos ||
      tokens[2].kind != TokenKind::Eos) {
    throw Error(Errc::BadFormat, "vocab must start with PAD, BOS, EOS");
  }
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.repr_ = Representation::RemiPlus;
  std::vector<int> positions;
  v.base_size_ = 0;
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    const Token& tok = v.tokens_[i];
    if (tok.kind == TokenKind::BarEmpty) v.repr_ = Representation::RemiTrack;
    if (tok.kind == TokenKind::Position) positions.push_back(tok.value);
    if (tok.kind == TokenKind::Duration) v.mesh_.push_back(tok.value);
    if (tok.kind == TokenKind::Merged) {
      if (v.base_size_ == 0) v.base_size_ = static_cast<int>(i);
    } else if (v.base_size_ != 0) {
      throw Error(Errc::BadFormat, "merged tokens must follow all base tokens");
    }
  }
  if (v.base_size_ == 0) v.base_size_ = v.size();
  v.grid_ = positions.size() > 1 ? positions[1] - positions[0] : kTicksPerBar;
  v.index();
  return v;
}

void Vocab::index() {
  lookup_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!lookup_.emplace(key_of(tokens_[i]), static_cast<int>(i)).second) {
      throw Error(Errc::BadFormat, "duplicate token " + token_name(static_cast<int>(i)));
    }
  }
}

const Token& Vocab::token(int id) const {
  if (!contains(id)) throw Error(Errc::UnknownToken, "token id " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocab::find(Token t) const {
  auto it = lookup_.find(key_of(t));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

int Vocab::id(Token t) const {
  auto found = find(t);
  if (!found) {
    throw Error(Errc::UnknownToken, std::string(token_kind_name(t.kind)) + ":" + std::to_string(t.value));
  }
  return *found;
}

std::size_t Vocab::count_kind(TokenKind k) const {
  return static_cast<std::size_t>(
      std::count_if(tokens_.begin(), tokens_.end(), [k](const Token& t) { return t.kind == k; }));
}

Vocab Vocab::with_merges(int n_merges) const {
  Vocab v = *this;
  v.tokens_.resize(static_cast<std::size_t>(base_size_));
  for (int m = 0; m < n_merges; ++m) v.tokens_.push_back({TokenKind::Merged, m});
  v.index();
  return v;
}

std::string Vocab::token_name(int id) const {
  const Token& t = tokens_.at(static_cast<std::size_t>(id));
  return std::string(token_kind_name(t.kind)) + ":" + std::to_string(t.value);
}

std::string Vocab::to_text() const {
  std::ostringstream out;
  for (int i = 0; i < size(); ++i) out << i << ' ' << token_name(i) << '\n';
  return out.str();
}

Vocab Vocab::from_text(std::string_view text) {
  std::vector<Token> tokens;
  for (auto line : split_lines(text)) {
    auto f = split_ws(line);
    if (f.empty()) continue;
    if (f.size() != 2) throw Error(Errc::BadFormat, "vocab line needs '<id> <kind>:<value>'");
    if (parse_int(f[0]) != static_cast<int>(tokens.size())) throw Error(Errc::BadFormat, "vocab ids must be dense");
    auto parts = split_char(f[1], ':');
    if (parts.size() != 2) throw Error(Errc::BadFormat, "token needs kind:value");
    auto kind = token_kind_from_name(parts[0]);
    if (!kind) throw Error(Errc::BadFormat, "unknown token kind " + std::string(parts[0]));
    tokens.push_back({*kind, parse_int(parts[1])});
  }
  return from_tokens(std::move(tokens));
}

}  // namespace bcn
