#include "bcn/pipeline.hpp"

#include "bcn/error.hpp"
#include "bcn/features.hpp"
#include "bcn/score_io.hpp"
#include "bcn/tokenizer.hpp"

namespace bcn {

namespace {

BpeModel bpe_from_merges(const Vocab& base, const std::vector<Merge>& merges) {
  return BpeModel(base, merges, base.size() + static_cast<int>(merges.size()));
}

TrackTokenSeqs encode_tracks(const Song& song, const Vocab& base, const BpeModel* bpe) {
  TrackTokenSeqs tk = tokenize_song(song, base);
  if (!bpe) return tk;
  std::vector<std::vector<int>> seqs;
  for (const auto& s : tk.seqs) seqs.push_back(bpe->encode(strip_padding(s)));
  return pad_tracks(std::move(seqs), tk.instruments, tk.n_bars);
}

}  // namespace

Song prepare_song(const Song& raw, bool check_filter) {
  Song s = compress_instruments(quantize_song(raw));
  if (check_filter) {
    FilterVerdict v = filter_song(s);
    if (!v.accepted) {
      std::string why;
      for (FilterRule r : v.reasons) why += (why.empty() ? "" : ",") + std::string(filter_rule_name(r));
      throw Error(Errc::Rejected, "song rejected: " + why);
    }
  }
  return s;
}

Bundle train_bundle(std::span<const Song> songs, const BpeModel* bpe, const TrainOptions& opt) {
  if (songs.empty()) throw Error(Errc::EmptyCorpus, "no training songs");
  const Vocab base = Vocab::build_default();
  Bundle b;
  b.merges = bpe ? bpe->merges() : std::vector<Merge>{};
  b.vocab = base.with_merges(static_cast<int>(b.merges.size()));
  b.config = opt.config;
  b.config.vocab_size = b.vocab.size();
  validate(b.config);

  std::vector<Song> pieces;
  for (const Song& s : songs) {
    if (opt.crop_bars > 0) {
      for (int first = 0; first + opt.crop_bars <= s.n_bars; first += opt.crop_bars) {
        pieces.push_back(slice_bars(s, first, opt.crop_bars));
      }
    } else {
      pieces.push_back(s);
    }
    if (opt.max_samples > 0 && static_cast<int>(pieces.size()) >= opt.max_samples) break;
  }
  if (opt.max_samples > 0 && static_cast<int>(pieces.size()) > opt.max_samples) pieces.resize(static_cast<std::size_t>(opt.max_samples));
  if (pieces.empty()) throw Error(Errc::EmptyCorpus, "no song has " + std::to_string(opt.crop_bars) + " bars");

  std::vector<TrackTokenSeqs> tokens;
  std::vector<FeatureGrid> grids;
  std::vector<std::vector<int>> bar_seqs;
  for (const Song& s : pieces) {
    if (s.n_bars > b.config.b_max) throw Error(Errc::BarIndexOutOfRange, std::to_string(s.n_bars) + " bars exceed b_max");
    tokens.push_back(encode_tracks(s, base, bpe));
    if (static_cast<int>(tokens.back().length()) > b.config.t_max) {
      throw Error(Errc::InvalidArgument, "sequence of " + std::to_string(tokens.back().length()) + " tokens exceeds t_max");
    }
    grids.push_back(extract_expert_features(s));
    for (const auto& seq : tokens.back().seqs) {
      for (auto& bar : bar_subsequences(strip_padding(seq), b.vocab)) bar_seqs.push_back(std::move(bar));
    }
  }

  VqVae vq(b.config);
  if (b.config.vq_steps > 0) {
    auto log = train_vqvae(vq, bar_seqs, b.config.vq_steps, b.config.lr, b.config.batch_size);
    if (opt.progress) {
      for (std::size_t i = 0; i < log.size(); ++i) opt.progress("vq", static_cast<int>(i), log[i]);
    }
  }
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    assign_vq_codes(vq, grids[i], tokens[i], b.vocab);
    samples.push_back(make_sample(grids[i], tokens[i], b.vocab));
  }

  Model model(b.config);
  train(model, samples, b.config.steps, [&](int step, double loss) {
    if (opt.progress) opt.progress("model", step, loss);
  });
  b.model = std::move(model.params());
  b.vq = std::move(vq.params());
  return b;
}

FeatureGrid reference_grid(Bundle& bundle, const Song& reference) {
  const Vocab base = Vocab::from_tokens([&] {
    std::vector<Token> t;
    for (int id = 0; id < bundle.vocab.base_size(); ++id) t.push_back(bundle.vocab.token(id));
    return t;
  }());
  BpeModel bpe = bpe_from_merges(base, bundle.merges);
  FeatureGrid grid = extract_expert_features(reference);
  VqVae vq(bundle.config, bundle.vq);
  assign_vq_codes(vq, grid, encode_tracks(reference, base, bundle.merges.empty() ? nullptr : &bpe), bundle.vocab);
  return grid;
}

Cover generate_cover(Bundle& bundle, const Song& reference, std::uint64_t seed) {
  FeatureGrid grid = reference_grid(bundle, reference);
  const Vocab base = Vocab::build_default();
  BpeModel bpe = bpe_from_merges(base, bundle.merges);
  Model model(bundle.config, bundle.model);
  Cover c;
  c.result = generate(model, grid, bundle.vocab, bundle.merges.empty() ? nullptr : &bpe, seed);
  // Put the trained parameters back; generation does not modify them.
  bundle.model = std::move(model.params());
  c.song = detokenize(c.result.repaired, base);
  const int k = top_k_size(bundle.vocab.size());
  for (const SampleAudit& a : c.result.audit) {
    if (a.forced) {
      ++c.forced;
    } else if (a.rank >= k) {
      ++c.outside_top_k;
    }
  }
  return c;
}

TokStats representation_stats(std::span<const Song> songs, Representation repr, int bpe_target) {
  if (songs.empty()) throw Error(Errc::MissingInput, "no songs for statistics");
  const Vocab vocab = Vocab::build_default(repr);
  std::vector<std::vector<std::vector<int>>> per_song;  // song -> sequences
  for (const Song& s : songs) {
    if (repr == Representation::RemiPlus) {
      per_song.push_back({tokenize_remi_plus(s, vocab)});
    } else {
      std::vector<std::vector<int>> seqs;
      for (const auto& seq : tokenize_song(s, vocab).seqs) seqs.push_back(strip_padding(seq));
      per_song.push_back(std::move(seqs));
    }
  }
  int vocab_size = vocab.size();
  if (bpe_target > 0) {
    std::vector<std::vector<int>> all;
    for (const auto& seqs : per_song) all.insert(all.end(), seqs.begin(), seqs.end());
    BpeModel bpe = learn_bpe(all, vocab, bpe_target);
    vocab_size = bpe.vocab_size();
    for (auto& seqs : per_song) {
      for (auto& seq : seqs) seq = bpe.encode(seq);
    }
  }
  std::vector<SongTokenCount> counts;
  for (std::size_t i = 0; i < songs.size(); ++i) {
    SongTokenCount c;
    for (const auto& seq : per_song[i]) c.tokens = std::max<long long>(c.tokens, static_cast<long long>(seq.size()));
    c.notes = static_cast<long long>(songs[i].note_count());
    c.beats = static_cast<long long>(songs[i].n_bars) * kBeatsPerBar;
    counts.push_back(c);
  }
  return corpus_stats(counts, vocab_size);
}

}  // namespace bcn
