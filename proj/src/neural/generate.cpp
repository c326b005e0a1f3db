#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "bcn/error.hpp"
#include "bcn/model.hpp"

namespace bcn {

int top_k_size(int vocab_size) {
  return std::max(1, static_cast<int>(std::lround(0.02 * static_cast<double>(vocab_size))));
}

namespace {

// Ids ordered by descending probability, lower id first on ties.
std::vector<int> rank_order(std::span<const double> probs) {
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[a] > probs[b]; });
  return order;
}

void fill_audit(SampleAudit* audit, std::span<const double> probs, const std::vector<int>& order, int k, int id) {
  if (!audit) return;
  audit->id = id;
  audit->prob = probs[static_cast<std::size_t>(id)];
  audit->kth_prob = probs[static_cast<std::size_t>(order[static_cast<std::size_t>(k - 1)])];
  audit->rank = static_cast<int>(std::find(order.begin(), order.end(), id) - order.begin());
}

}  // namespace

int sample_top_k(std::span<const double> probs, int k, const std::vector<char>& valid, std::mt19937_64& rng,
                 SampleAudit* audit) {
  if (probs.empty()) throw Error(Errc::InvalidArgument, "empty distribution");
  if (valid.size() != probs.size()) throw Error(Errc::ShapeMismatch, "valid mask length differs from vocabulary");
  k = std::clamp(k, 1, static_cast<int>(probs.size()));
  std::vector<int> order = rank_order(probs);
  std::vector<int> cand;
  double total = 0.0;
  for (int r = 0; r < k; ++r) {
    const int id = order[static_cast<std::size_t>(r)];
    if (valid[static_cast<std::size_t>(id)]) {
      cand.push_back(id);
      total += probs[static_cast<std::size_t>(id)];
    }
  }
  if (cand.empty()) return -1;
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  int chosen = cand.back();
  if (total > 0.0) {
    double acc = 0.0;
    for (int id : cand) {
      acc += probs[static_cast<std::size_t>(id)] / total;
      if (u < acc) {
        chosen = id;
        break;
      }
    }
  } else {
    chosen = cand.front();
  }
  fill_audit(audit, probs, order, k, chosen);
  return chosen;
}

namespace {

struct LayerCache {
  std::vector<double> k, v;  // self-attention keys/values, one row per position
  Tensor mem_k, mem_v;       // cross-attention keys/values of the memory
};

struct TrackState {
  Instrument inst = Instrument::Piano;
  std::vector<int> seq;     // emitted tokens, starting with Instrument, BOS
  std::vector<int> bar_of;  // bar index of every fed position
  int bars = 0;
  bool done = false;
  Tensor e, s;
  std::vector<LayerCache> btm, top;
  Tensor btm_pending;  // bottom state of a bar token awaiting the cross-track pass
  Tensor probs;
};

class Runner {
 public:
  explicit Runner(Model& m) : cfg_(m.config()), ps_(m.params()) {}

  const Tensor& P(const std::string& name) { return ps_.at(name).value; }

  Tensor linear(const Tensor& x, const std::string& w, const std::string& b) {
    Tensor y = matmul(x, P(w));
    add_bias_inplace(y, P(b));
    return y;
  }

  Tensor norm(const Tensor& x, const std::string& p) {
    return layer_norm_rows(x, &P(p + ".g"), &P(p + ".b"));
  }

  Tensor ffn(const Tensor& x, const std::string& p) {
    return linear(gelu(linear(x, p + ".w1", p + ".b1")), p + ".w2", p + ".b2");
  }

  // One query row against m key/value rows; `s` scales the logits of key j.
  Tensor attend(const std::string& p, const Tensor& q, const double* k, const double* v, int m, const double* s) {
    const int d = cfg_.d;
    const int dh = d / cfg_.heads;
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor o = Tensor::matrix(1, d);
    std::vector<double> logit(static_cast<std::size_t>(m));
    for (int h = 0; h < cfg_.heads; ++h) {
      const int c0 = h * dh;
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < m; ++j) {
        double dot = 0.0;
        const double* kj = k + static_cast<std::size_t>(j) * d + c0;
        for (int c = 0; c < dh; ++c) dot += q.data[static_cast<std::size_t>(c0 + c)] * kj[c];
        if (s) dot *= s[j];
        logit[static_cast<std::size_t>(j)] = dot * inv;
        mx = std::max(mx, logit[static_cast<std::size_t>(j)]);
      }
      if (!std::isfinite(mx)) throw Error(Errc::NonFinite, "attention logits are not finite");
      double sum = 0.0;
      for (double& l : logit) sum += (l = std::exp(l - mx));
      for (int j = 0; j < m; ++j) {
        const double w = logit[static_cast<std::size_t>(j)] / sum;
        const double* vj = v + static_cast<std::size_t>(j) * d + c0;
        for (int c = 0; c < dh; ++c) o.data[static_cast<std::size_t>(c0 + c)] += w * vj[c];
      }
    }
    return linear(o, p + ".wo", p + ".bo");
  }

  std::vector<LayerCache> make_caches(const std::string& stack, int layers, const Tensor& memory) {
    std::vector<LayerCache> out(static_cast<std::size_t>(layers));
    for (int l = 0; l < layers; ++l) {
      const std::string p = stack + "." + std::to_string(l) + ".cross";
      out[static_cast<std::size_t>(l)].mem_k = linear(memory, p + ".wk", p + ".bk");
      out[static_cast<std::size_t>(l)].mem_v = linear(memory, p + ".wv", p + ".bv");
    }
    return out;
  }

  Tensor decoder_row(const std::string& stack, std::vector<LayerCache>& caches, Tensor x, const TrackState& st) {
    const std::size_t t = st.bar_of.size() - 1;
    std::vector<double> srow;
    if (cfg_.use_sesa) {
      const int bt = st.bar_of[t];
      for (std::size_t j = 0; j <= t; ++j) srow.push_back(st.s.at(bt, st.bar_of[j]));
    }
    for (std::size_t l = 0; l < caches.size(); ++l) {
      const std::string p = stack + "." + std::to_string(l);
      LayerCache& c = caches[l];
      Tensor q = linear(x, p + ".self.wq", p + ".self.bq");
      Tensor k = linear(x, p + ".self.wk", p + ".self.bk");
      Tensor v = linear(x, p + ".self.wv", p + ".self.bv");
      c.k.insert(c.k.end(), k.data.begin(), k.data.end());
      c.v.insert(c.v.end(), v.data.begin(), v.data.end());
      const int m = static_cast<int>(c.k.size()) / cfg_.d;
      Tensor a = attend(p + ".self", q, c.k.data(), c.v.data(), m, srow.empty() ? nullptr : srow.data());
      add_inplace(x, a);
      x = norm(x, p + ".ln1");
      q = linear(x, p + ".cross.wq", p + ".cross.bq");
      a = attend(p + ".cross", q, c.mem_k.data.data(), c.mem_v.data.data(), c.mem_k.rows(), nullptr);
      add_inplace(x, a);
      x = norm(x, p + ".ln2");
      add_inplace(x, ffn(x, p + ".ff"));
      x = norm(x, p + ".ln3");
    }
    return x;
  }

  // Full self-attention over the rows of x, no mask.
  Tensor encoder(const std::string& p, const Tensor& x) {
    Tensor k = linear(x, p + ".att.wk", p + ".att.bk");
    Tensor v = linear(x, p + ".att.wv", p + ".att.bv");
    Tensor q = linear(x, p + ".att.wq", p + ".att.bq");
    Tensor a = Tensor::matrix(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) {
      Tensor qi = Tensor::from(1, x.cols(), std::vector<double>(q.row(i), q.row(i) + x.cols()));
      Tensor ai = attend(p + ".att", qi, k.data.data(), v.data.data(), x.rows(), nullptr);
      std::copy(ai.data.begin(), ai.data.end(), a.row(i));
    }
    Tensor y = x;
    add_inplace(y, a);
    y = norm(y, p + ".ln1");
    add_inplace(y, ffn(y, p + ".ff"));
    return norm(y, p + ".ln2");
  }

  Tensor embed(const TrackState& st, int id) {
    const int t = static_cast<int>(st.bar_of.size()) - 1;
    const int d = cfg_.d;
    Tensor x = Tensor::matrix(1, d);
    const Tensor pe = sinusoidal(t, 1, d);
    const double* tok = P("tok.emb").row(id);
    const double* bar = P("bar.emb").row(st.bar_of.back());
    const double* ins = P("inst.emb").row(static_cast<int>(st.inst));
    for (int c = 0; c < d; ++c) x.data[static_cast<std::size_t>(c)] = tok[c] + pe.data[static_cast<std::size_t>(c)] + bar[c] + ins[c];
    return x;
  }

  void feed(TrackState& st, int id, int bar) {
    st.bar_of.push_back(bar);
    Tensor x = decoder_row("btm", st.btm, embed(st, id), st);
    st.btm_pending = x;
  }

  void finish(TrackState& st, const Tensor& mid) {
    Tensor top = decoder_row("top", st.top, mid, st);
    const std::string p = "head." + std::string(instrument_name(st.inst));
    st.probs = softmax_rows(linear(top, p + ".w", p + ".b"));
  }

 private:
  const ModelConfig& cfg_;
  ParamStore& ps_;
};

}  // namespace

GenerateResult generate(Model& model, const FeatureGrid& grid, const Vocab& vocab, const BpeModel* bpe,
                        std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig& cfg = model.config();
  const int B = grid.n_bars;
  const std::size_t I = grid.n_tracks();
  if (I == 0) throw Error(Errc::ShapeMismatch, "feature grid has no tracks");
  if (B < 1 || B > cfg.b_max) throw Error(Errc::BarIndexOutOfRange, std::to_string(B) + " bars outside 1.." + std::to_string(cfg.b_max));
  if (vocab.size() != cfg.vocab_size) {
    throw Error(Errc::ShapeMismatch, "vocabulary has " + std::to_string(vocab.size()) + " ids, model expects " +
                                         std::to_string(cfg.vocab_size));
  }
  if (bpe && bpe->vocab_size() != vocab.size()) throw Error(Errc::ShapeMismatch, "BPE model does not match the vocabulary");
  if (cfg.t_max < B + 3) throw Error(Errc::InvalidArgument, "t_max too small for " + std::to_string(B) + " bars");

  const int V = vocab.size();
  std::vector<char> is_bar(static_cast<std::size_t>(V)), never(static_cast<std::size_t>(V));
  int eos = -1;
  for (int id = 0; id < V; ++id) {
    const TokenKind k = vocab.token(id).kind;
    is_bar[static_cast<std::size_t>(id)] = is_bar_kind(k);
    never[static_cast<std::size_t>(id)] = k == TokenKind::Pad || k == TokenKind::Bos || k == TokenKind::Instrument;
    if (k == TokenKind::Eos) eos = id;
  }
  if (eos < 0 || std::find(is_bar.begin(), is_bar.end(), 1) == is_bar.end()) {
    throw Error(Errc::DegenerateVocab, "vocabulary lacks EOS or bar tokens");
  }

  Runner run(model);
  std::vector<TrackState> tracks(I);
  for (std::size_t i = 0; i < I; ++i) {
    TrackState& st = tracks[i];
    st.inst = grid.instruments[i];
    Tape tape;
    Var e = model.encode_features(tape, model.embed_conditions(tape, grid, i));
    st.e = tape.value(e);
    if (cfg.use_sesa) st.s = tape.value(model.bar_similarity(tape, e));
    st.btm = run.make_caches("btm", cfg.layers_bottom, st.e);
    st.top = run.make_caches("top", cfg.layers_top, st.e);
    for (int id : {vocab.instrument_id(st.inst), kBosId}) {
      st.seq.push_back(id);
      run.feed(st, id, 0);
      run.finish(st, st.btm_pending);
    }
  }

  GenerateResult res;
  std::mt19937_64 rng(seed);
  const int k = top_k_size(V);
  auto step = [&](std::size_t i) -> int {
    TrackState& st = tracks[i];
    std::span<const double> probs(st.probs.data);
    SampleAudit a;
    a.track = static_cast<int>(i);
    a.position = static_cast<int>(st.seq.size());
    const int remaining = cfg.t_max - static_cast<int>(st.seq.size());
    const bool force = remaining <= (B - st.bars) + 1;
    std::vector<char> valid(static_cast<std::size_t>(V));
    for (int id = 0; id < V; ++id) {
      const auto u = static_cast<std::size_t>(id);
      bool ok = !never[u];
      if (is_bar[u]) ok = ok && st.bars < B;
      else if (id == eos) ok = ok && st.bars == B;
      else ok = ok && st.bars > 0 && !force;
      valid[u] = ok;
    }
    int id = force ? -1 : sample_top_k(probs, k, valid, rng, &a);
    if (id < 0) {
      for (int c = 0; c < V; ++c) {
        if (valid[static_cast<std::size_t>(c)] && (id < 0 || probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(id)])) id = c;
      }
      std::vector<int> order = rank_order(probs);
      a.id = id;
      a.prob = probs[static_cast<std::size_t>(id)];
      a.kth_prob = probs[static_cast<std::size_t>(order[static_cast<std::size_t>(std::min(k, V) - 1)])];
      a.rank = static_cast<int>(std::find(order.begin(), order.end(), id) - order.begin());
      a.forced = true;
    }
    res.audit.push_back(a);
    st.seq.push_back(id);
    ++res.tokens;
    return id;
  };

  while (true) {
    bool any_waiting = false;
    for (std::size_t i = 0; i < I; ++i) {
      TrackState& st = tracks[i];
      while (!st.done) {
        const int id = step(i);
        if (id == eos) {
          st.done = true;
        } else if (is_bar[static_cast<std::size_t>(id)]) {
          ++st.bars;
          any_waiting = true;
          break;
        } else {
          run.feed(st, id, st.bars - 1);
          run.finish(st, st.btm_pending);
        }
      }
    }
    if (!any_waiting) break;
    // Every live track has just emitted the same bar number.
    Tensor x = Tensor::matrix(static_cast<int>(I), cfg.d);
    for (std::size_t i = 0; i < I; ++i) {
      TrackState& st = tracks[i];
      if (st.done) throw Error(Errc::BarCountMismatch, "track " + std::to_string(i) + " ended before the others");
      run.feed(st, st.seq.back(), st.bars - 1);
      std::copy(st.btm_pending.data.begin(), st.btm_pending.data.end(), x.row(static_cast<int>(i)));
    }
    if (cfg.use_ctt) {
      for (int l = 0; l < cfg.layers_ctt; ++l) x = run.encoder("ctt." + std::to_string(l), x);
    }
    for (std::size_t i = 0; i < I; ++i) {
      run.finish(tracks[i], Tensor::from(1, cfg.d, std::vector<double>(x.row(static_cast<int>(i)), x.row(static_cast<int>(i)) + cfg.d)));
    }
  }

  std::vector<std::vector<int>> raw, fixed;
  for (const TrackState& st : tracks) {
    raw.push_back(st.seq);
    std::vector<int> base = bpe ? bpe->decode(st.seq) : st.seq;
    fixed.push_back(repair_track(base, st.inst, B, vocab));
  }
  res.raw = pad_tracks(raw, grid.instruments, B);
  res.repaired = pad_tracks(fixed, grid.instruments, B);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace bcn
