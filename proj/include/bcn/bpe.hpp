#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bcn/vocab.hpp"

namespace bcn {

struct Merge {
  int left = 0;
  int right = 0;
  int id = 0;
  friend bool operator==(const Merge&, const Merge&) = default;
};

// Merges learned over runs of note tokens that share an onset position.
// Metric tokens (Position, Bar, Instrument, BOS, EOS, PAD) are never merged.
class BpeModel {
 public:
  BpeModel() = default;
  BpeModel(const Vocab& base_vocab, std::vector<Merge> merges, int target_size = 0);

  int base_size() const { return static_cast<int>(note_mask_.size()); }
  int target_size() const { return target_size_; }
  int vocab_size() const { return base_size() + static_cast<int>(merges_.size()); }
  const std::vector<Merge>& merges() const { return merges_; }

  bool is_note(int id) const;  // base note token or merged token
  const std::vector<int>& expansion(int merged_id) const;

  std::vector<int> encode(std::span<const int> seq) const;
  std::vector<int> decode(std::span<const int> seq) const;

  // "<left> <right> <new>" per merge, in learned order.
  std::string to_text() const;
  static BpeModel from_text(std::string_view text, const Vocab& base_vocab);

 private:
  void encode_unit(std::vector<int>& unit) const;

  std::vector<bool> note_mask_;  // over base ids
  std::vector<Merge> merges_;
  std::vector<std::vector<int>> expansions_;
  std::unordered_map<std::uint64_t, int> rank_;  // (left, right) -> merge index
  int target_size_ = 0;
};

// Frequency ties go to the lower (left, right) id pair; learning stops at
// target_size or once no pair occurs at least twice. PAD is ignored.
BpeModel learn_bpe(std::span<const std::vector<int>> seqs, const Vocab& base_vocab, int target_size);

}  // namespace bcn
