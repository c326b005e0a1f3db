#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcn/bpe.hpp"
#include "bcn/metrics.hpp"
#include "bcn/model.hpp"

namespace bcn {

// Parsed MIDI -> quantized, compressed song; throws Rejected (with the rule
// names) when the filter fails and `check_filter` is set.
Song prepare_song(const Song& raw, bool check_filter);

struct TrainOptions {
  ModelConfig config;
  int crop_bars = 0;    // split songs into chunks of this many bars (0 = whole)
  int max_samples = 0;  // 0 = all
  std::function<void(std::string_view phase, int step, double loss)> progress;
};

// Tokenizes (and BPE-encodes) the songs, trains the VQ-VAE, assigns codes
// and trains the model. config.vocab_size is derived from the vocabulary.
Bundle train_bundle(std::span<const Song> songs, const BpeModel* bpe, const TrainOptions& opt);

// Feature grid of a prepared reference, VQ codes included.
FeatureGrid reference_grid(Bundle& bundle, const Song& reference);

struct Cover {
  Song song;
  GenerateResult result;
  int forced = 0;          // audit entries that bypassed sampling
  int outside_top_k = 0;   // sampled ids ranked at or beyond k (must be 0)
};
Cover generate_cover(Bundle& bundle, const Song& reference, std::uint64_t seed);

// Token statistics of one representation over songs; `bpe_target` > 0
// learns a BPE model of that size on the same songs first.
TokStats representation_stats(std::span<const Song> songs, Representation repr, int bpe_target);

}  // namespace bcn
