#include <algorithm>
#include <cmath>

#include "bcn/error.hpp"
#include "bcn/model.hpp"
#include "layers.hpp"

namespace bcn {

namespace {

constexpr std::array<const char*, kFeatureCount> kFeatTables = {"feat.ct", "feat.dt", "feat.dd", "feat.nd",
                                                               "feat.mp", "feat.md", "feat.mv"};
// Embedding widths relative to a 256-wide model.
constexpr std::array<int, kFeatureCount> kFeatWidth256 = {256, 64, 128, 128, 64, 64, 64};

int feat_width(const ModelConfig& c, int f) { return std::max(1, kFeatWidth256[static_cast<std::size_t>(f)] * c.d / 256); }
int vq_width(const ModelConfig& c) { return std::max(1, c.d / 8); }

}  // namespace

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  init();
}

Model::Model(ModelConfig cfg, ParamStore params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  validate(cfg_);
  if (!params_.has("tok.emb") || params_.at("tok.emb").value.rows() != cfg_.vocab_size) {
    throw Error(Errc::ShapeMismatch, "token table does not match vocab_size");
  }
}

void Model::init() {
  Init in{std::mt19937_64(cfg_.seed)};
  const int d = cfg_.d;
  auto& ps = params_;
  int width = 0;
  for (int f = 0; f < kFeatureCount; ++f) {
    const int w = feat_width(cfg_, f);
    ps.add(kFeatTables[static_cast<std::size_t>(f)], in.normal(kFeatureVocab[static_cast<std::size_t>(f)] + 1, w, 1.0));
    width += f == 0 ? 4 * w : w;
  }
  ps.add("feat.vq", in.normal(cfg_.codebook + 1, vq_width(cfg_), 1.0));
  width += kVqGroups * vq_width(cfg_);
  add_linear(ps, in, "feat.proj.w", "feat.proj.b", width, d);
  for (int l = 0; l < cfg_.layers_enc; ++l) add_encoder_layer(ps, in, "enc." + std::to_string(l), d, cfg_.ffn);
  ps.add("sim.wq", in.uniform(d, d, 1.0 / std::sqrt(static_cast<double>(d))));
  ps.add("sim.wk", in.uniform(d, d, 1.0 / std::sqrt(static_cast<double>(d))));
  ps.add("tok.emb", in.normal(cfg_.vocab_size, d, 1.0));
  ps.add("bar.emb", in.normal(cfg_.b_max, d, 1.0));
  ps.add("inst.emb", in.normal(kInstrumentCount, d, 1.0));
  for (int l = 0; l < cfg_.layers_bottom; ++l) add_decoder_layer(ps, in, "btm." + std::to_string(l), d, cfg_.ffn);
  for (int l = 0; l < cfg_.layers_ctt; ++l) add_encoder_layer(ps, in, "ctt." + std::to_string(l), d, cfg_.ffn);
  for (int l = 0; l < cfg_.layers_top; ++l) add_decoder_layer(ps, in, "top." + std::to_string(l), d, cfg_.ffn);
  for (int i = 0; i < kInstrumentCount; ++i) {
    const std::string p = "head." + std::string(instrument_name(static_cast<Instrument>(i)));
    ps.add(p + ".w", in.normal(d, cfg_.vocab_size, 0.01));
    ps.add(p + ".b", Tensor::matrix(1, cfg_.vocab_size));
  }
}

Var Model::embed_conditions(Tape& tape, const FeatureGrid& grid, std::size_t track) {
  const int B = grid.n_bars;
  if (B < 1 || B > cfg_.b_max) {
    throw Error(Errc::BarIndexOutOfRange, std::to_string(B) + " bars outside 1.." + std::to_string(cfg_.b_max));
  }
  if (track >= grid.n_tracks()) throw Error(Errc::ShapeMismatch, "track outside the feature grid");
  std::array<std::vector<int>, kFeatureCount + 3> ids;  // ct0..ct3, dt, dd, nd, mp, md, mv
  std::array<std::vector<int>, kVqGroups> vq;
  auto check = [](Feature f, int v) {
    if (v < 0 || v > feature_sentinel(f)) {
      throw Error(Errc::BinOutOfVocab, std::string(feature_name(f)) + " bin " + std::to_string(v));
    }
    return v;
  };
  for (int b = 0; b < B; ++b) {
    const ExpertFeatures& e = grid.at(track, static_cast<std::size_t>(b));
    for (int c = 0; c < 4; ++c) ids[static_cast<std::size_t>(c)].push_back(check(Feature::CT, e.ct[static_cast<std::size_t>(c)]));
    ids[4].push_back(check(Feature::DT, e.dt));
    ids[5].push_back(check(Feature::DD, e.dd));
    ids[6].push_back(check(Feature::ND, e.nd));
    ids[7].push_back(check(Feature::MP, e.mp));
    ids[8].push_back(check(Feature::MD, e.md));
    ids[9].push_back(check(Feature::MV, e.mv));
    for (int n = 0; n < kVqGroups; ++n) {
      int code = cfg_.codebook;
      if (grid.has_vq()) {
        code = grid.vq_entries[track * static_cast<std::size_t>(B) + static_cast<std::size_t>(b)][static_cast<std::size_t>(n)];
        if (code < 0 || code >= cfg_.codebook) throw Error(Errc::BinOutOfVocab, "VQ code " + std::to_string(code));
      }
      vq[static_cast<std::size_t>(n)].push_back(code);
    }
  }
  std::vector<Var> parts;
  Var ct = params_.var(tape, "feat.ct");
  for (int c = 0; c < 4; ++c) parts.push_back(tape.embedding(ct, ids[static_cast<std::size_t>(c)]));
  for (int f = 1; f < kFeatureCount; ++f) {
    parts.push_back(tape.embedding(params_.var(tape, kFeatTables[static_cast<std::size_t>(f)]), ids[static_cast<std::size_t>(f + 3)]));
  }
  Var table = params_.var(tape, "feat.vq");
  for (int n = 0; n < kVqGroups; ++n) parts.push_back(tape.embedding(table, vq[static_cast<std::size_t>(n)]));
  Var cat = tape.concat_cols(parts);
  return tape.add_bias(tape.matmul(cat, params_.var(tape, "feat.proj.w")), params_.var(tape, "feat.proj.b"));
}

Var Model::encode_features(Tape& tape, Var c) {
  const int B = tape.value(c).rows();
  Var x = tape.add(c, tape.constant(sinusoidal(0, B, cfg_.d)));
  for (int l = 0; l < cfg_.layers_enc; ++l) x = encoder_layer(tape, "enc." + std::to_string(l), x, Mask{});
  return x;
}

Var Model::bar_similarity(Tape& tape, Var e) {
  Var q = tape.matmul(e, params_.var(tape, "sim.wq"));
  Var k = tape.matmul(e, params_.var(tape, "sim.wk"));
  Var s = tape.softmax_rows(tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(cfg_.d))), Mask{});
  return tape.layer_norm_plain(s);
}

Var Model::embed_tokens(Tape& tape, const TrackInput& in) {
  const int T = static_cast<int>(in.ids.size());
  if (in.bar_index.size() != in.ids.size()) throw Error(Errc::ShapeMismatch, "bar index length differs from ids");
  for (int id : in.ids) {
    if (id < 0 || id >= cfg_.vocab_size) throw Error(Errc::IdOutOfVocab, "token id " + std::to_string(id));
  }
  for (int b : in.bar_index) {
    if (b < 0 || b >= cfg_.b_max) throw Error(Errc::BarIndexOutOfRange, "bar " + std::to_string(b));
  }
  Var x = tape.embedding(params_.var(tape, "tok.emb"), in.ids);
  x = tape.add(x, tape.constant(sinusoidal(0, T, cfg_.d)));
  x = tape.add(x, tape.embedding(params_.var(tape, "bar.emb"), in.bar_index));
  x = tape.add(x, tape.embedding(params_.var(tape, "inst.emb"),
                                 std::vector<int>(static_cast<std::size_t>(T), static_cast<int>(in.instrument))));
  return x;
}

Var Model::attention(Tape& tape, const std::string& prefix, Var xq, Var xkv, const Mask& mask,
                     std::optional<Var> s_tilde) {
  return multi_head_attention(tape, params_, cfg_.heads, prefix, xq, xkv, mask, s_tilde);
}

Var Model::encoder_layer(Tape& tape, const std::string& p, Var x, const Mask& mask) {
  x = norm_block(tape, params_, p + ".ln1", tape.add(x, attention(tape, p + ".att", x, x, mask)));
  return norm_block(tape, params_, p + ".ln2", tape.add(x, ffn_block(tape, params_, p + ".ff", x)));
}

Var Model::decoder_layer(Tape& tape, const std::string& p, Var x, Var memory, std::optional<Var> s_tilde) {
  x = norm_block(tape, params_, p + ".ln1", tape.add(x, attention(tape, p + ".self", x, x, Mask::causal(), s_tilde)));
  x = norm_block(tape, params_, p + ".ln2", tape.add(x, attention(tape, p + ".cross", x, memory, Mask{})));
  return norm_block(tape, params_, p + ".ln3", tape.add(x, ffn_block(tape, params_, p + ".ff", x)));
}

Var Model::decoder_stack(Tape& tape, const std::string& stack, int layers, Var x, Var memory,
                         std::optional<Var> s_tilde) {
  for (int l = 0; l < layers; ++l) x = decoder_layer(tape, stack + "." + std::to_string(l), x, memory, s_tilde);
  return x;
}

std::vector<Var> Model::ctt_forward(Tape& tape, const std::vector<Var>& o_btm,
                                    const std::vector<std::vector<int>>& bar_positions) {
  const std::size_t I = o_btm.size();
  if (bar_positions.size() != I || I == 0) throw Error(Errc::BarCountMismatch, "one bar-position list per track");
  const std::size_t B = bar_positions[0].size();
  for (std::size_t i = 0; i < I; ++i) {
    if (bar_positions[i].size() != B) {
      throw Error(Errc::BarCountMismatch, "track " + std::to_string(i) + " has " +
                                              std::to_string(bar_positions[i].size()) + " bar tokens, track 0 has " +
                                              std::to_string(B));
    }
  }
  if (B == 0 || cfg_.layers_ctt == 0) return o_btm;
  std::vector<Var> grouped;
  for (std::size_t i = 0; i < I; ++i) grouped.push_back(tape.gather_rows(o_btm[i], bar_positions[i]));
  // Bar-major rows: row k*I + i holds track i's k-th bar token.
  std::vector<int> order(I * B);
  for (std::size_t k = 0; k < B; ++k) {
    for (std::size_t i = 0; i < I; ++i) order[k * I + i] = static_cast<int>(i * B + k);
  }
  Var x = tape.gather_rows(tape.concat_rows(grouped), order);
  for (int l = 0; l < cfg_.layers_ctt; ++l) {
    x = encoder_layer(tape, "ctt." + std::to_string(l), x, Mask::block(static_cast<int>(I)));
  }
  std::vector<Var> out;
  for (std::size_t i = 0; i < I; ++i) {
    std::vector<int> rows(B);
    for (std::size_t k = 0; k < B; ++k) rows[k] = static_cast<int>(k * I + i);
    out.push_back(tape.scatter_rows(o_btm[i], bar_positions[i], tape.gather_rows(x, rows)));
  }
  return out;
}

Var Model::project_logits(Tape& tape, Var o_top, Instrument inst) {
  const std::string p = "head." + std::string(instrument_name(inst));
  return tape.add_bias(tape.matmul(o_top, params_.var(tape, p + ".w")), params_.var(tape, p + ".b"));
}

ForwardResult Model::forward(Tape& tape, const Sample& s) {
  const std::size_t I = s.tracks.size();
  if (I == 0) throw Error(Errc::ShapeMismatch, "sample has no tracks");
  if (s.grid.n_tracks() != I || s.grid.n_bars != s.n_bars) {
    throw Error(Errc::ShapeMismatch, "feature grid is " + std::to_string(s.grid.n_tracks()) + "x" +
                                         std::to_string(s.grid.n_bars) + ", tokens are " + std::to_string(I) + "x" +
                                         std::to_string(s.n_bars));
  }
  std::vector<Var> e(I), o(I);
  std::vector<std::optional<Var>> st(I);
  std::vector<std::vector<int>> bars(I);
  for (std::size_t i = 0; i < I; ++i) {
    const TrackInput& in = s.tracks[i];
    if (s.grid.instruments[i] != in.instrument) throw Error(Errc::ShapeMismatch, "grid and token instruments differ");
    e[i] = encode_features(tape, embed_conditions(tape, s.grid, i));
    if (cfg_.use_sesa) st[i] = tape.expand(bar_similarity(tape, e[i]), in.bar_index);
    o[i] = decoder_stack(tape, "btm", cfg_.layers_bottom, embed_tokens(tape, in), e[i], st[i]);
    bars[i] = in.bar_positions;
  }
  std::vector<Var> mid = cfg_.use_ctt ? ctt_forward(tape, o, bars) : o;
  ForwardResult r;
  for (std::size_t i = 0; i < I; ++i) {
    Var top = decoder_stack(tape, "top", cfg_.layers_top, mid[i], e[i], st[i]);
    Var logits = project_logits(tape, top, s.tracks[i].instrument);
    r.logits.push_back(logits);
    Var ce = tape.cross_entropy_sum(logits, s.tracks[i].targets);
    r.loss = i == 0 ? ce : tape.add(r.loss, ce);
    for (int t : s.tracks[i].targets) r.tokens += t >= 0;
  }
  tape.value(r.loss).check_finite("loss");
  return r;
}

Sample make_sample(const FeatureGrid& grid, const TrackTokenSeqs& seqs, const Vocab& vocab) {
  Sample s;
  s.grid = grid;
  s.n_bars = seqs.n_bars;
  const std::size_t T = seqs.length();
  if (T < 2) throw Error(Errc::InvalidArgument, "sequences too short to train on");
  for (std::size_t i = 0; i < seqs.n_tracks(); ++i) {
    const auto& seq = seqs.seqs[i];
    TrackInput in;
    in.instrument = i < seqs.instruments.size() ? seqs.instruments[i] : static_cast<Instrument>(vocab.token(seq[0]).value);
    in.ids.assign(seq.begin(), seq.end() - 1);
    for (std::size_t t = 1; t < T; ++t) in.targets.push_back(seq[t] == kPadId ? -1 : seq[t]);
    in.bar_index = bar_index(in.ids, vocab, seqs.n_bars);
    in.bar_positions = bar_token_positions(in.ids, vocab);
    s.tracks.push_back(std::move(in));
  }
  return s;
}

double train_step(Model& model, Adam& opt, std::span<const Sample> batch, double lr) {
  long long tokens = 0;
  for (const Sample& s : batch) {
    for (const auto& t : s.tracks) {
      for (int y : t.targets) tokens += y >= 0;
    }
  }
  if (tokens == 0) throw Error(Errc::InvalidArgument, "batch has no targets");
  model.params().zero_grad();
  double total = 0.0;
  for (const Sample& s : batch) {
    Tape tape;
    ForwardResult r = model.forward(tape, s);
    total += tape.value(r.loss).data[0];
    tape.backward(tape.scale(r.loss, 1.0 / static_cast<double>(tokens)));
  }
  opt.step(model.params(), lr);
  return total / static_cast<double>(tokens);
}

TrainLog train(Model& model, std::span<const Sample> samples, int steps, const std::function<void(int, double)>& on_step) {
  if (samples.empty()) throw Error(Errc::EmptyCorpus, "no training samples");
  TrainLog log;
  Adam opt;
  const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(model.config().batch_size), samples.size());
  std::size_t cursor = 0;
  for (int step = 0; step < steps; ++step) {
    std::vector<Sample> batch;
    for (std::size_t j = 0; j < bs; ++j) batch.push_back(samples[(cursor + j) % samples.size()]);
    cursor = (cursor + bs) % samples.size();
    const double loss = train_step(model, opt, batch, learning_rate(model.config(), step));
    log.losses.push_back(loss);
    if (on_step) on_step(step, loss);
  }
  return log;
}

}  // namespace bcn
