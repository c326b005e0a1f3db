#include <algorithm>
#include <cmath>
#include <set>

#include "bcn/error.hpp"
#include "bcn/model.hpp"
#include "layers.hpp"

namespace bcn {

VqResult vq_quantize(const Tensor& z_e, const Tensor& codebook) {
  if (codebook.rows() == 0) throw Error(Errc::EmptyCodebook, "codebook has no rows");
  const int latent = static_cast<int>(z_e.size());
  const int g = codebook.cols();
  if (latent % kVqGroups != 0 || g * kVqGroups != latent) {
    throw Error(Errc::ShapeMismatch, "latent of " + std::to_string(latent) + " needs codebook rows of " +
                                         std::to_string(latent / kVqGroups));
  }
  VqResult r;
  r.z_q = Tensor::matrix(1, latent);
  for (int n = 0; n < kVqGroups; ++n) {
    const double* z = z_e.data.data() + static_cast<std::size_t>(n) * g;
    int best = 0;
    double best_d = 0.0;
    for (int k = 0; k < codebook.rows(); ++k) {
      const double* c = codebook.row(k);
      double dist = 0.0;
      for (int j = 0; j < g; ++j) dist += (z[j] - c[j]) * (z[j] - c[j]);
      if (k == 0 || dist < best_d) {
        best = k;
        best_d = dist;
      }
    }
    r.codes[static_cast<std::size_t>(n)] = best;
    std::copy(codebook.row(best), codebook.row(best) + g, r.z_q.data.begin() + static_cast<std::ptrdiff_t>(n) * g);
  }
  return r;
}

std::vector<std::vector<int>> bar_subsequences(std::span<const int> seq, const Vocab& vocab) {
  std::vector<std::vector<int>> out;
  if (seq.empty()) return out;
  const int inst = seq[0];
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const TokenKind k = vocab.token(seq[t]).kind;
    if (k == TokenKind::Eos || k == TokenKind::Pad) break;
    if (is_bar_kind(k)) {
      out.push_back({inst, seq[t]});
    } else if (!out.empty()) {
      out.back().push_back(seq[t]);
    }
  }
  return out;
}

VqVae::VqVae(const ModelConfig& cfg) : cfg_(cfg) {
  validate(cfg_);
  init();
}

VqVae::VqVae(const ModelConfig& cfg, ParamStore params) : cfg_(cfg), params_(std::move(params)) {
  validate(cfg_);
  if (!params_.has("vq.codebook")) throw Error(Errc::MissingInput, "VQ-VAE parameters missing");
}

void VqVae::init() {
  Init in{std::mt19937_64(cfg_.seed ^ 0x5eedf00dULL)};
  const int d = cfg_.d;
  const int g = cfg_.latent / kVqGroups;
  auto& ps = params_;
  ps.add("vq.tok.emb", in.normal(cfg_.vocab_size, d, 1.0));
  add_encoder_layer(ps, in, "vq.enc.0", d, cfg_.ffn);
  add_linear(ps, in, "vq.to_latent.w", "vq.to_latent.b", d, cfg_.latent);
  ps.add("vq.codebook", in.normal(cfg_.codebook, g, 1.0 / std::sqrt(static_cast<double>(d))));
  add_linear(ps, in, "vq.from_latent.w", "vq.from_latent.b", g, d);
  add_decoder_layer(ps, in, "vq.dec.0", d, cfg_.ffn);
  ps.add("vq.head.w", in.normal(d, cfg_.vocab_size, 0.01));
  ps.add("vq.head.b", Tensor::matrix(1, cfg_.vocab_size));
}

Var VqVae::attention(Tape& tape, const std::string& prefix, Var xq, Var xkv, const Mask& mask) {
  return multi_head_attention(tape, params_, cfg_.heads, prefix, xq, xkv, mask, std::nullopt);
}

Var VqVae::encode(Tape& tape, const std::vector<int>& bar_seq) {
  if (bar_seq.empty()) throw Error(Errc::InvalidArgument, "empty bar sequence");
  const int n = static_cast<int>(bar_seq.size());
  Var x = tape.add(tape.embedding(params_.var(tape, "vq.tok.emb"), bar_seq), tape.constant(sinusoidal(0, n, cfg_.d)));
  x = norm_block(tape, params_, "vq.enc.0.ln1", tape.add(x, attention(tape, "vq.enc.0.att", x, x, Mask{})));
  x = norm_block(tape, params_, "vq.enc.0.ln2", tape.add(x, ffn_block(tape, params_, "vq.enc.0.ff", x)));
  Var pooled = tape.mean_rows(x);
  return tape.add_bias(tape.matmul(pooled, params_.var(tape, "vq.to_latent.w")), params_.var(tape, "vq.to_latent.b"));
}

Var VqVae::loss(Tape& tape, const std::vector<int>& bar_seq, VqCodes* codes, double* recon) {
  if (bar_seq.size() < 2) throw Error(Errc::InvalidArgument, "bar sequence needs at least two tokens");
  const int g = cfg_.latent / kVqGroups;
  Var z_e = encode(tape, bar_seq);
  Var book = params_.var(tape, "vq.codebook");
  VqResult q = vq_quantize(tape.value(z_e), tape.value(book));
  if (codes) *codes = q.codes;
  Var e = tape.reshape(tape.gather_rows(book, std::vector<int>(q.codes.begin(), q.codes.end())), 1, cfg_.latent);
  Var z = tape.straight_through(z_e, e);
  Var memory = tape.add_bias(tape.matmul(tape.reshape(z, kVqGroups, g), params_.var(tape, "vq.from_latent.w")),
                             params_.var(tape, "vq.from_latent.b"));

  std::vector<int> in(bar_seq.begin(), bar_seq.end() - 1);
  std::vector<int> target(bar_seq.begin() + 1, bar_seq.end());
  const int n = static_cast<int>(in.size());
  Var x = tape.add(tape.embedding(params_.var(tape, "vq.tok.emb"), in), tape.constant(sinusoidal(0, n, cfg_.d)));
  x = norm_block(tape, params_, "vq.dec.0.ln1", tape.add(x, attention(tape, "vq.dec.0.self", x, x, Mask::causal())));
  x = norm_block(tape, params_, "vq.dec.0.ln2", tape.add(x, attention(tape, "vq.dec.0.cross", x, memory, Mask{})));
  x = norm_block(tape, params_, "vq.dec.0.ln3", tape.add(x, ffn_block(tape, params_, "vq.dec.0.ff", x)));
  Var logits = tape.add_bias(tape.matmul(x, params_.var(tape, "vq.head.w")), params_.var(tape, "vq.head.b"));
  Var rec = tape.scale(tape.cross_entropy_sum(logits, target), 1.0 / n);
  if (recon) *recon = tape.value(rec).data[0];

  Var codebook_loss = tape.mean_square(tape.sub(tape.stop_gradient(z_e), e));
  Var commit = tape.mean_square(tape.sub(z_e, tape.stop_gradient(e)));
  Var total = tape.add(rec, tape.add(codebook_loss, tape.scale(commit, cfg_.commitment)));
  tape.value(total).check_finite("VQ-VAE loss");
  return total;
}

VqCodes VqVae::codes(const std::vector<int>& bar_seq) {
  Tape tape;
  Var z_e = encode(tape, bar_seq);
  return vq_quantize(tape.value(z_e), params_.at("vq.codebook").value).codes;
}

std::vector<double> train_vqvae(VqVae& vq, std::span<const std::vector<int>> bar_seqs, int steps, double lr,
                                int batch_size) {
  std::vector<std::vector<int>> unique;
  std::set<std::vector<int>> seen;
  for (const auto& s : bar_seqs) {
    if (s.size() >= 2 && seen.insert(s).second) unique.push_back(s);
  }
  if (unique.empty()) throw Error(Errc::EmptyCorpus, "no bar sequences for the VQ-VAE");
  Adam opt;
  std::vector<double> recon_log;
  std::size_t cursor = 0;
  const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, batch_size)), unique.size());
  for (int step = 0; step < steps; ++step) {
    vq.params().zero_grad();
    double recon_sum = 0.0;
    for (std::size_t j = 0; j < bs; ++j) {
      const auto& s = unique[(cursor + j) % unique.size()];
      Tape tape;
      double recon = 0.0;
      Var l = vq.loss(tape, s, nullptr, &recon);
      tape.backward(tape.scale(l, 1.0 / static_cast<double>(bs)));
      recon_sum += recon;
    }
    cursor = (cursor + bs) % unique.size();
    opt.step(vq.params(), lr);
    recon_log.push_back(recon_sum / static_cast<double>(bs));
  }
  return recon_log;
}

void assign_vq_codes(VqVae& vq, FeatureGrid& grid, const TrackTokenSeqs& seqs, const Vocab& vocab) {
  if (seqs.n_tracks() != grid.n_tracks() || seqs.n_bars != grid.n_bars) {
    throw Error(Errc::ShapeMismatch, "token sequences do not match the feature grid");
  }
  grid.vq_entries.assign(grid.entries.size(), VqCodes{});
  for (std::size_t i = 0; i < seqs.n_tracks(); ++i) {
    auto bars = bar_subsequences(strip_padding(seqs.seqs[i]), vocab);
    if (static_cast<int>(bars.size()) != grid.n_bars) {
      throw Error(Errc::BarCountMismatch, "track " + std::to_string(i) + " has " + std::to_string(bars.size()) +
                                              " bars, grid has " + std::to_string(grid.n_bars));
    }
    for (std::size_t b = 0; b < bars.size(); ++b) {
      grid.vq_entries[i * static_cast<std::size_t>(grid.n_bars) + b] = vq.codes(bars[b]);
    }
  }
}

}  // namespace bcn
