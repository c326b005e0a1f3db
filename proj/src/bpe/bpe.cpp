#include "bcn/bpe.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "bcn/error.hpp"
#include "bcn/text.hpp"

namespace bcn {

namespace {

std::uint64_t pair_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

std::vector<bool> note_mask_of(const Vocab& vocab) {
  std::vector<bool> mask(static_cast<std::size_t>(vocab.base_size()));
  for (int id = 0; id < vocab.base_size(); ++id) mask[static_cast<std::size_t>(id)] = vocab.is_note_token(id);
  return mask;
}

// Replaces every left-to-right occurrence of (a, b) by `id`.
bool merge_pair(std::vector<int>& syms, int a, int b, int id) {
  bool changed = false;
  std::size_t w = 0;
  for (std::size_t r = 0; r < syms.size(); ++w) {
    if (r + 1 < syms.size() && syms[r] == a && syms[r + 1] == b) {
      syms[w] = id;
      r += 2;
      changed = true;
    } else {
      syms[w] = syms[r++];
    }
  }
  syms.resize(w);
  return changed;
}

class PairTable {
 public:
  void add(int a, int b, long long delta, int word) {
    auto k = pair_key(a, b);
    long long& c = counts_[k];
    if (c > 0) order_.erase({-c, a, b});
    c += delta;
    if (c > 0) order_.insert({-c, a, b});
    if (delta > 0) where_[k].insert(word);
  }
  bool empty() const { return order_.empty(); }
  std::tuple<long long, int, int> best() const { return *order_.begin(); }
  std::vector<int> words_of(int a, int b) const {
    auto it = where_.find(pair_key(a, b));
    if (it == where_.end()) return {};
    return {it->second.begin(), it->second.end()};
  }

 private:
  std::unordered_map<std::uint64_t, long long> counts_;
  std::unordered_map<std::uint64_t, std::set<int>> where_;
  std::set<std::tuple<long long, int, int>> order_;
};

}  // namespace

BpeModel::BpeModel(const Vocab& base_vocab, std::vector<Merge> merges, int target_size)
    : note_mask_(note_mask_of(base_vocab)), merges_(std::move(merges)), target_size_(target_size) {
  const int base = base_size();
  for (std::size_t m = 0; m < merges_.size(); ++m) {
    const Merge& mg = merges_[m];
    const int id = base + static_cast<int>(m);
    if (mg.id != id) throw Error(Errc::BadFormat, "merge ids must be dense from " + std::to_string(base));
    for (int operand : {mg.left, mg.right}) {
      if (operand < 0 || operand >= id || !is_note(operand)) {
        throw Error(Errc::BadFormat, "merge " + std::to_string(id) + " has invalid operand " + std::to_string(operand));
      }
    }
    std::vector<int> ex;
    for (int operand : {mg.left, mg.right}) {
      if (operand < base) {
        ex.push_back(operand);
      } else {
        const auto& sub = expansions_[static_cast<std::size_t>(operand - base)];
        ex.insert(ex.end(), sub.begin(), sub.end());
      }
    }
    expansions_.push_back(std::move(ex));
    rank_.emplace(pair_key(mg.left, mg.right), static_cast<int>(m));
  }
  if (target_size_ == 0) target_size_ = vocab_size();
}

bool BpeModel::is_note(int id) const {
  if (id < 0) return false;
  if (id < base_size()) return note_mask_[static_cast<std::size_t>(id)];
  return id - base_size() < static_cast<int>(expansions_.size());
}

const std::vector<int>& BpeModel::expansion(int merged_id) const {
  const int m = merged_id - base_size();
  if (m < 0 || m >= static_cast<int>(expansions_.size())) {
    throw Error(Errc::UnknownToken, "id " + std::to_string(merged_id) + " is not a merged token");
  }
  return expansions_[static_cast<std::size_t>(m)];
}

void BpeModel::encode_unit(std::vector<int>& unit) const {
  // Repeatedly merging the lowest-ranked adjacent pair reproduces applying the
  // merges in learned order: a merge only creates pairs with its own new id.
  while (unit.size() > 1) {
    int best = -1;
    for (std::size_t i = 0; i + 1 < unit.size(); ++i) {
      auto it = rank_.find(pair_key(unit[i], unit[i + 1]));
      if (it != rank_.end() && (best < 0 || it->second < best)) best = it->second;
    }
    if (best < 0) return;
    const Merge& mg = merges_[static_cast<std::size_t>(best)];
    merge_pair(unit, mg.left, mg.right, mg.id);
  }
}

std::vector<int> BpeModel::encode(std::span<const int> seq) const {
  std::vector<int> out;
  out.reserve(seq.size());
  std::vector<int> unit;
  auto flush = [&] {
    encode_unit(unit);
    out.insert(out.end(), unit.begin(), unit.end());
    unit.clear();
  };
  for (std::size_t t = 0; t < seq.size(); ++t) {
    int id = seq[t];
    if (id < 0 || id >= base_size()) {
      throw Error(Errc::UnknownToken, "id " + std::to_string(id) + " is outside the base vocabulary", -1,
                  static_cast<long>(t));
    }
    if (note_mask_[static_cast<std::size_t>(id)]) {
      unit.push_back(id);
    } else {
      flush();
      out.push_back(id);
    }
  }
  flush();
  return out;
}

std::vector<int> BpeModel::decode(std::span<const int> seq) const {
  std::vector<int> out;
  out.reserve(seq.size() * 2);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    int id = seq[t];
    if (id < 0 || id >= vocab_size()) {
      throw Error(Errc::UnknownToken, "id " + std::to_string(id) + " is outside the vocabulary", -1,
                  static_cast<long>(t));
    }
    if (id < base_size()) {
      out.push_back(id);
    } else {
      const auto& ex = expansions_[static_cast<std::size_t>(id - base_size())];
      out.insert(out.end(), ex.begin(), ex.end());
    }
  }
  return out;
}

std::string BpeModel::to_text() const {
  std::ostringstream out;
  for (const Merge& m : merges_) out << m.left << ' ' << m.right << ' ' << m.id << '\n';
  return out.str();
}

BpeModel BpeModel::from_text(std::string_view text, const Vocab& base_vocab) {
  std::vector<Merge> merges;
  for (auto line : split_lines(text)) {
    auto f = split_ws(line);
    if (f.empty()) continue;
    if (f.size() != 3) throw Error(Errc::BadFormat, "merge line needs '<left> <right> <new>'");
    merges.push_back({parse_int(f[0]), parse_int(f[1]), parse_int(f[2])});
  }
  return BpeModel(base_vocab, std::move(merges));
}

BpeModel learn_bpe(std::span<const std::vector<int>> seqs, const Vocab& base_vocab, int target_size) {
  const int base = base_vocab.base_size();
  if (target_size <= base) {
    throw Error(Errc::TargetTooSmall,
                "target " + std::to_string(target_size) + " must exceed base size " + std::to_string(base));
  }
  // Collapse identical units into weighted words.
  std::map<std::vector<int>, long long> unit_counts;
  std::vector<int> unit;
  auto flush = [&] {
    if (unit.size() >= 2) ++unit_counts[unit];
    unit.clear();
  };
  for (const auto& seq : seqs) {
    for (int id : seq) {
      if (id == kPadId) continue;
      if (id < 0 || id >= base) throw Error(Errc::UnknownToken, "id " + std::to_string(id) + " in BPE corpus");
      if (base_vocab.is_note_token(id)) {
        unit.push_back(id);
      } else {
        flush();
      }
    }
    flush();
  }
  std::vector<std::vector<int>> words;
  std::vector<long long> freq;
  for (auto& [w, c] : unit_counts) {
    words.push_back(w);
    freq.push_back(c);
  }

  PairTable table;
  auto account = [&](int w, long long sign) {
    const auto& s = words[static_cast<std::size_t>(w)];
    for (std::size_t i = 0; i + 1 < s.size(); ++i) table.add(s[i], s[i + 1], sign * freq[static_cast<std::size_t>(w)], w);
  };
  for (int w = 0; w < static_cast<int>(words.size()); ++w) account(w, +1);

  std::vector<Merge> merges;
  while (base + static_cast<int>(merges.size()) < target_size && !table.empty()) {
    auto [neg_count, a, b] = table.best();
    if (-neg_count < 2) break;
    const int id = base + static_cast<int>(merges.size());
    merges.push_back({a, b, id});
    for (int w : table.words_of(a, b)) {
      auto& s = words[static_cast<std::size_t>(w)];
      auto copy = s;
      if (!merge_pair(copy, a, b, id)) continue;
      account(w, -1);
      s = std::move(copy);
      account(w, +1);
    }
  }
  return BpeModel(base_vocab, std::move(merges), target_size);
}

}  // namespace bcn
