// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "../common/fixtures.hpp"
#include "../common/oracles.hpp"
#include "../common/toy.hpp"
#include "bcn/bpe.hpp"
#include "bcn/error.hpp"
#include "bcn/io.hpp"
#include "bcn/metrics.hpp"
#include "bcn/midi.hpp"
#include "bcn/model.hpp"
#include "bcn/pipeline.hpp"

using namespace bcn;
using namespace bcn::test;
namespace fs = std::filesystem;

namespace {

// Tolerances and thresholds.
constexpr int kMinRoundTripSongs = 50;
constexpr double kRoundTripSeconds = 10.0;
constexpr int kBpeTarget = 2000;
constexpr double kBpeRatio = 0.8;
constexpr double kReprRatio = 0.5;
constexpr double kSesaTol = 1e-12;
constexpr double kEquivTol = 1e-10;
constexpr double kGradTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr int kToySamples = 8;
constexpr int kToyBars = 4;
constexpr int kToySteps = 200;
constexpr double kToySeconds = 300.0;
constexpr double kInitialLossTol = 0.1;  // |L0 - ln V| / ln V
constexpr int kGenerations = 20;
constexpr int kRandomPairs = 1000;
constexpr int kVqVectors = 1000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Window {
  std::string id;
  Song song;
};

struct Corpus {
  std::vector<Song> songs;  // prepared full songs
  std::vector<Window> windows;
  double load_seconds = 0;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    Corpus c;
    const auto t0 = Clock::now();
    for (const auto& path : list_files(fs::path(BCN_SOURCE_DIR) / "data/micro_corpus", ".mid")) {
      Song s = prepare_song(parse_midi(read_bytes(path)), true);
      c.songs.push_back(s);
      int k = 0;
      for (Song& w : split_windows(s, 16, 32, 8)) {
        c.windows.push_back({path.stem().string() + "_w" + std::to_string(k++), std::move(w)});
      }
    }
    c.load_seconds = seconds_since(t0);
    return c;
  }();
  return c;
}

bool held_out(const std::string& id) { return stable_hash(id) % 10 == 0; }

const Vocab& vocab() {
  static const Vocab v = Vocab::build_default();
  return v;
}

Outcome roundtrip() {
  const auto& c = corpus();
  const auto t0 = Clock::now();
  int ok = 0;
  for (const auto& w : c.windows) {
    ok += detokenize(tokenize_song(w.song, vocab()), vocab()) == canonicalize_for_vocab(w.song, vocab());
  }
  const double secs = seconds_since(t0);
  const int n = static_cast<int>(c.windows.size());
  return {n >= kMinRoundTripSongs && ok == n && secs < kRoundTripSeconds,
          fmt("%d/%d windows exact, %.3f s (corpus load %.2f s)", ok, n, secs, c.load_seconds)};
}

Outcome bpe_compression() {
  const auto& c = corpus();
  std::vector<std::vector<int>> train_seqs;
  std::vector<TrackTokenSeqs> all;
  for (const auto& w : c.windows) {
    all.push_back(tokenize_song(w.song, vocab()));
    if (!held_out(w.id)) {
      for (const auto& q : all.back().seqs) train_seqs.push_back(strip_padding(q));
    }
  }
  BpeModel bpe = learn_bpe(train_seqs, vocab(), kBpeTarget);
  bool identity = true;
  double raw_len = 0, enc_len = 0, raw_tr = 0, enc_tr = 0;
  double raw_held = 0, enc_held = 0;
  for (std::size_t s = 0; s < all.size(); ++s) {
    std::size_t longest_raw = 0, longest_enc = 0;
    for (const auto& q : all[s].seqs) {
      auto raw = strip_padding(q);
      auto enc = bpe.encode(raw);
      identity = identity && bpe.decode(enc) == raw;
      raw_tr += static_cast<double>(raw.size());
      enc_tr += static_cast<double>(enc.size());
      longest_raw = std::max(longest_raw, raw.size());
      longest_enc = std::max(longest_enc, enc.size());
    }
    raw_len += static_cast<double>(longest_raw);
    enc_len += static_cast<double>(longest_enc);
    if (held_out(c.windows[s].id)) {
      raw_held += static_cast<double>(longest_raw);
      enc_held += static_cast<double>(longest_enc);
    }
  }
  const double ratio = enc_len / raw_len;
  return {identity && ratio <= kBpeRatio,
          fmt("vocab %d, identity %s, Avg.Len ratio %.3f (held-out %.3f, all tracks %.3f)", bpe.vocab_size(),
              identity ? "yes" : "no", ratio, raw_held > 0 ? enc_held / raw_held : NAN, enc_tr / raw_tr)};
}

Outcome representation_length() {
  const auto& c = corpus();
  std::vector<Song> songs;
  for (const auto& w : c.windows) songs.push_back(w.song);
  TokStats track = representation_stats(songs, Representation::RemiTrack, 0);
  TokStats plus = representation_stats(songs, Representation::RemiPlus, 0);
  const double ratio = track.avg_len / plus.avg_len;
  return {ratio <= kReprRatio,
          fmt("REMI_Track %.1f vs REMI+ %.1f tokens, ratio %.3f", track.avg_len, plus.avg_len, ratio)};
}

Outcome worked_example() {
  Song s = five_note_bar();
  const Vocab plus_vocab = Vocab::build_default(Representation::RemiPlus);
  const long long plus = static_cast<long long>(tokenize_remi_plus(s, plus_vocab).size()) - 2;
  TrackTokenSeqs seqs = tokenize_song(s, vocab());
  std::vector<Merge> merges;
  int next = vocab().size();
  for (const auto& t : s.tracks) {
    if (t.is_drum()) continue;
    const Note& n = t.notes[0];
    merges.push_back({vocab().pitch_id(n.pitch), vocab().duration_id(snap_duration(n.duration, vocab().duration_mesh())), next});
    merges.push_back({next, vocab().velocity_id(velocity_bin(n.velocity)), next + 1});
    next += 2;
  }
  BpeModel bpe(vocab(), merges);
  std::size_t longest = 0;
  for (const auto& q : seqs.seqs) longest = std::max(longest, bpe.encode(strip_padding(q)).size() - 3);
  return {plus == 20 && longest == 5, fmt("REMI+ %lld tokens, REMI_Track longest track %zu tokens", plus, longest)};
}

Outcome sesa_identity() {
  ModelConfig cfg = toy_config(vocab());
  Model m(cfg);
  Lcg g(101);
  const int T = 64;
  Tensor x = random_tensor(g, T, cfg.d);
  Tape t;
  Var xv = t.constant(x);
  Var ones = m.attention(t, "btm.0.self", xv, xv, Mask::causal(), t.constant(Tensor::matrix(T, T, 1.0)));
  const double err = max_abs_diff(t.value(ones), oracle_attention(m.params(), "btm.0.self", x, cfg.heads));
  return {err < kSesaTol, fmt("d=%d T=%d max |diff| %.2e", cfg.d, T, err)};
}

Outcome expansion() {
  Lcg g(102);
  long long checked = 0, wrong = 0;
  Tape t;
  for (int B = 1; B <= 8; ++B) {
    Var s = t.constant(random_tensor(g, B, B));
    const Tensor& sv = t.value(s);
    for (int T = 1; T <= 64; ++T) {
      // Monotone bar map: Instrument/BOS in bar 0, every bar present when T allows.
      std::vector<int> idx(static_cast<std::size_t>(T));
      for (int i = 0; i < T; ++i) idx[static_cast<std::size_t>(i)] = std::min(B - 1, i * B / T);
      for (const auto& map : {idx, [&] {
                                auto r = idx;
                                for (int& b : r) b = g.uniform(0, B - 1);
                                return r;
                              }()}) {
        const Tensor& out = t.value(t.expand(s, map));
        for (int i = 0; i < T; ++i) {
          for (int j = 0; j < T; ++j) {
            ++checked;
            wrong += out.at(i, j) != sv.at(map[static_cast<std::size_t>(i)], map[static_cast<std::size_t>(j)]);
          }
        }
      }
    }
  }
  return {wrong == 0, fmt("%lld entries over B=1..8, T=1..64, %lld mismatches", checked, wrong)};
}

Outcome cross_track() {
  ModelConfig cfg = toy_config(vocab());
  Model m(cfg);
  Lcg g(103);
  int changed_non_bar = 0;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int I = g.uniform(2, 6), B = g.uniform(1, 8);
    Tape t;
    std::vector<Var> o;
    std::vector<std::vector<int>> pos;
    for (int i = 0; i < I; ++i) {
      const int T = B + g.uniform(2, 30);
      std::vector<int> p(static_cast<std::size_t>(T));
      std::iota(p.begin(), p.end(), 0);
      for (int k = T - 1; k > 0; --k) std::swap(p[static_cast<std::size_t>(k)], p[static_cast<std::size_t>(g.uniform(0, k))]);
      p.resize(static_cast<std::size_t>(B));
      std::sort(p.begin(), p.end());
      pos.push_back(p);
      o.push_back(t.constant(random_tensor(g, T, cfg.d)));
    }
    auto out = m.ctt_forward(t, o, pos);
    for (int i = 0; i < I; ++i) {
      const Tensor& a = t.value(o[static_cast<std::size_t>(i)]);
      const Tensor& b = t.value(out[static_cast<std::size_t>(i)]);
      const auto& p = pos[static_cast<std::size_t>(i)];
      for (int r = 0; r < a.rows(); ++r) {
        if (std::binary_search(p.begin(), p.end(), r)) continue;
        changed_non_bar += !std::equal(a.row(r), a.row(r) + a.cols(), b.row(r));
      }
    }
    std::vector<int> perm(static_cast<std::size_t>(I));
    std::iota(perm.begin(), perm.end(), 0);
    for (int k = I - 1; k > 0; --k) std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(g.uniform(0, k))]);
    std::vector<Var> po;
    std::vector<std::vector<int>> pp;
    for (int k : perm) {
      po.push_back(o[static_cast<std::size_t>(k)]);
      pp.push_back(pos[static_cast<std::size_t>(k)]);
    }
    auto pout = m.ctt_forward(t, po, pp);
    for (int k = 0; k < I; ++k) {
      worst = std::max(worst, max_abs_diff(t.value(pout[static_cast<std::size_t>(k)]),
                                           t.value(out[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])])));
    }
  }
  return {changed_non_bar == 0 && worst < kEquivTol,
          fmt("100 inputs: %d non-bar rows changed, permutation max |diff| %.2e", changed_non_bar, worst)};
}

Outcome gradients() {
  ModelConfig cfg = toy_config(vocab());
  Model m(cfg);
  Sample s = toy_sample(toy_song(104, 2), vocab());
  auto errs = gradient_check(m.params(), [&](Tape& t) { return m.forward(t, s).loss; }, kGradStep, 6);

  VqVae vq(cfg);
  auto bar = bar_subsequences(strip_padding(tokenize_song(toy_song(105, 1), vocab()).seqs[1]), vocab())[0];
  auto vq_errs = gradient_check(vq.params(), [&](Tape& t) { return vq.loss(t, bar); }, kGradStep, 6);
  int skipped = 0;
  for (const auto& [name, e] : vq_errs) {
    const bool upstream = name.rfind("vq.enc", 0) == 0 || name == "vq.tok.emb" || name.rfind("vq.to_latent", 0) == 0 ||
                          name == "vq.codebook";
    if (upstream) {
      ++skipped;
      continue;
    }
    errs[name] = e;
  }
  std::string worst_name;
  double worst = 0;
  for (const auto& [name, e] : errs) {
    if (e >= worst) worst = e, worst_name = name;
  }
  return {worst < kGradTol, fmt("%zu blocks, worst %.2e (%s); %d quantizer-upstream VQ blocks not compared",
                                errs.size(), worst, worst_name.c_str(), skipped)};
}

// ---- toy training shared by the training and generation criteria ----

struct ToyRun {
  Bundle bundle;
  std::vector<Song> pieces;
  std::vector<double> losses;
  double final_loss = 0;
  double seconds = 0;
};

std::vector<Song> toy_pieces() {
  std::vector<Song> out;
  for (const auto& w : corpus().windows) {
    if (held_out(w.id) || w.id.size() < 3 || w.id.substr(w.id.size() - 3) != "_w0") continue;
    out.push_back(slice_bars(w.song, 0, kToyBars));
    if (static_cast<int>(out.size()) == kToySamples) break;
  }
  return out;
}

ToyRun toy_train(int steps) {
  ToyRun r;
  r.pieces = toy_pieces();
  TrainOptions opt;
  opt.config = preset("toy");
  opt.config.steps = steps;
  opt.progress = [&](std::string_view phase, int, double loss) {
    if (phase == "model") r.losses.push_back(loss);
  };
  const auto t0 = Clock::now();
  r.bundle = train_bundle(r.pieces, nullptr, opt);
  r.seconds = seconds_since(t0);
  Model m(r.bundle.config, r.bundle.model);
  double total = 0;
  long long tokens = 0;
  for (const Song& p : r.pieces) {
    Sample s = make_sample(reference_grid(r.bundle, p), tokenize_song(p, vocab()), r.bundle.vocab);
    Tape t;
    ForwardResult f = m.forward(t, s);
    total += t.value(f.loss).data[0];
    tokens += f.tokens;
  }
  r.final_loss = total / static_cast<double>(tokens);
  return r;
}

ToyRun& toy() {
  static ToyRun r = toy_train(kToySteps);
  return r;
}

Outcome training() {
  ToyRun& r = toy();
  const double lnv = std::log(static_cast<double>(r.bundle.config.vocab_size));
  ToyRun again = toy_train(10);
  const bool same = std::equal(again.losses.begin(), again.losses.end(), r.losses.begin());
  const double l0 = r.losses.front();
  const bool ok = static_cast<int>(r.pieces.size()) == kToySamples && std::abs(l0 - lnv) / lnv < kInitialLossTol &&
                  r.final_loss < 0.5 * lnv && same && r.seconds < kToySeconds;
  return {ok, fmt("%zu samples, loss %.3f -> %.3f after %d steps (ln V %.3f), rerun identical %s, %.0f s",
                  r.pieces.size(), l0, r.final_loss, kToySteps, lnv, same ? "yes" : "no", r.seconds)};
}

Outcome generation() {
  const int k = top_k_size(10000);
  ToyRun& r = toy();
  int bars_ok = 0, outside = 0, forced = 0;
  long long sampled = 0;
  int n = 0;
  for (const auto& w : corpus().windows) {
    if (n == kGenerations) break;
    if (w.id.size() < 3 || w.id.substr(w.id.size() - 3) != "_w1") continue;
    Song ref = slice_bars(w.song, 0, kToyBars);
    Cover c = generate_cover(r.bundle, ref, static_cast<std::uint64_t>(n + 1));
    bool bars = c.song.n_bars == ref.n_bars;
    for (const auto& q : c.result.raw.seqs) {
      bars = bars && static_cast<int>(bar_token_positions(q, r.bundle.vocab).size()) == ref.n_bars;
    }
    bars_ok += bars;
    const int kk = top_k_size(r.bundle.config.vocab_size);
    for (const auto& a : c.result.audit) {
      outside += !a.forced && a.rank >= kk;
      forced += a.forced;
      sampled += !a.forced;
    }
    ++n;
  }
  return {k == 200 && n == kGenerations && bars_ok == n && outside == 0,
          fmt("k(10000)=%d; %d/%d generations with B bars per track; %lld sampled ids, %d outside top-k, %d forced",
              k, bars_ok, n, sampled, outside, forced)};
}

Outcome metric_identity() {
  const auto& c = corpus();
  int self_ok = 0;
  for (const Song& s : c.songs) {
    MetricsReport r = evaluate_pair(s, s);
    self_ok += r.nde == 0 && r.oap == 1 && r.oad == 1 && r.oav == 1 && r.ccs == 1 && r.gcs == 1 && r.ca == 1 &&
               r.ssmd == 0;
  }
  Lcg g(106);
  int range_ok = 0;
  for (int k = 0; k < kRandomPairs; ++k) {
    Song a, b;
    if (k % 2 == 0) {
      a = c.windows[static_cast<std::size_t>(g.uniform(0, static_cast<int>(c.windows.size()) - 1))].song;
      b = c.windows[static_cast<std::size_t>(g.uniform(0, static_cast<int>(c.windows.size()) - 1))].song;
    } else {
      a = random_song(g, g.uniform(1, 8), g.uniform(0, 40));
      b = random_song(g, g.uniform(1, 8), g.uniform(0, 40));
    }
    MetricsReport r = evaluate_pair(a, b);
    bool ok = r.nde >= 0 && std::isfinite(r.nde);
    for (double x : {r.oap, r.oad, r.oav, r.ccs, r.gcs, r.ca, r.ssmd}) ok = ok && x >= 0 && x <= 1;
    range_ok += ok;
  }
  return {self_ok == static_cast<int>(c.songs.size()) && range_ok == kRandomPairs,
          fmt("self-identity %d/%zu songs, ranges %d/%d pairs", self_ok, c.songs.size(), range_ok, kRandomPairs)};
}

Outcome vq_nearest() {
  Lcg g(107);
  const int K = 16, latent = 32;
  int agree = 0;
  for (int k = 0; k < kVqVectors; ++k) {
    Tensor book = random_tensor(g, K, latent / kVqGroups);
    Tensor z = random_tensor(g, 1, latent, 1.5);
    agree += vq_quantize(z, book).codes == oracle_vq(z, book);
  }
  return {agree == kVqVectors, fmt("%d/%d vectors match the exhaustive scan (K=%d, 8 groups)", agree, kVqVectors, K)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"tokenizer round trip", roundtrip},
      {"BPE identity and compression", bpe_compression},
      {"REMI_Track vs REMI+ length", representation_length},
      {"five-note worked example", worked_example},
      {"SE-SA with unit similarity", sesa_identity},
      {"similarity expansion", expansion},
      {"cross-track transformer", cross_track},
      {"gradient check", gradients},
      {"toy training", training},
      {"top-k generation audit", generation},
      {"metric identity and ranges", metric_identity},
      {"VQ nearest neighbour", vq_nearest},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s C%-2zu %-30s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
