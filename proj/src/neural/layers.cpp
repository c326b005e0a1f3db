#include "layers.hpp"

#include <cmath>

namespace bcn {

Tensor Init::uniform(int rows, int cols, double bound) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data) v = u(rng);
  return t;
}

Tensor Init::normal(int rows, int cols, double sd) {
  std::normal_distribution<double> n(0.0, sd);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data) v = n(rng);
  return t;
}

void add_linear(ParamStore& ps, Init& in, const std::string& w, const std::string& b, int fan_in, int fan_out) {
  ps.add(w, in.uniform(fan_in, fan_out, 1.0 / std::sqrt(static_cast<double>(fan_in))));
  ps.add(b, Tensor::matrix(1, fan_out));
}

void add_norm(ParamStore& ps, const std::string& p, int d) {
  ps.add(p + ".g", Tensor::matrix(1, d, 1.0));
  ps.add(p + ".b", Tensor::matrix(1, d));
}

void add_attention_params(ParamStore& ps, Init& in, const std::string& p, int d) {
  for (const char* m : {"q", "k", "v", "o"}) add_linear(ps, in, p + ".w" + m, p + ".b" + m, d, d);
}

void add_ffn_params(ParamStore& ps, Init& in, const std::string& p, int d, int ffn) {
  add_linear(ps, in, p + ".w1", p + ".b1", d, ffn);
  add_linear(ps, in, p + ".w2", p + ".b2", ffn, d);
}

void add_encoder_layer(ParamStore& ps, Init& in, const std::string& p, int d, int ffn) {
  add_attention_params(ps, in, p + ".att", d);
  add_norm(ps, p + ".ln1", d);
  add_ffn_params(ps, in, p + ".ff", d, ffn);
  add_norm(ps, p + ".ln2", d);
}

void add_decoder_layer(ParamStore& ps, Init& in, const std::string& p, int d, int ffn) {
  add_attention_params(ps, in, p + ".self", d);
  add_norm(ps, p + ".ln1", d);
  add_attention_params(ps, in, p + ".cross", d);
  add_norm(ps, p + ".ln2", d);
  add_ffn_params(ps, in, p + ".ff", d, ffn);
  add_norm(ps, p + ".ln3", d);
}

Var multi_head_attention(Tape& tape, ParamStore& ps, int heads, const std::string& p, Var xq, Var xkv,
                         const Mask& mask, std::optional<Var> s_tilde) {
  Var q = tape.add_bias(tape.matmul(xq, ps.var(tape, p + ".wq")), ps.var(tape, p + ".bq"));
  Var k = tape.add_bias(tape.matmul(xkv, ps.var(tape, p + ".wk")), ps.var(tape, p + ".bk"));
  Var v = tape.add_bias(tape.matmul(xkv, ps.var(tape, p + ".wv")), ps.var(tape, p + ".bv"));
  const int d = tape.value(q).cols();
  const int dh = d / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  for (int h = 0; h < heads; ++h) {
    Var qh = heads == 1 ? q : tape.slice_cols(q, h * dh, (h + 1) * dh);
    Var kh = heads == 1 ? k : tape.slice_cols(k, h * dh, (h + 1) * dh);
    Var vh = heads == 1 ? v : tape.slice_cols(v, h * dh, (h + 1) * dh);
    Var logits = tape.matmul_nt(qh, kh);
    if (s_tilde) logits = tape.mul(logits, *s_tilde);
    Var probs = tape.softmax_rows(tape.scale(logits, inv), mask);
    outs.push_back(tape.matmul(probs, vh));
  }
  Var o = heads == 1 ? outs[0] : tape.concat_cols(outs);
  return tape.add_bias(tape.matmul(o, ps.var(tape, p + ".wo")), ps.var(tape, p + ".bo"));
}

Var ffn_block(Tape& tape, ParamStore& ps, const std::string& p, Var x) {
  Var h = tape.gelu(tape.add_bias(tape.matmul(x, ps.var(tape, p + ".w1")), ps.var(tape, p + ".b1")));
  return tape.add_bias(tape.matmul(h, ps.var(tape, p + ".w2")), ps.var(tape, p + ".b2"));
}

Var norm_block(Tape& tape, ParamStore& ps, const std::string& p, Var x) {
  return tape.layer_norm(x, ps.var(tape, p + ".g"), ps.var(tape, p + ".b"));
}

}  // namespace bcn
