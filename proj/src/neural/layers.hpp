#pragma once

#include <optional>
#include <random>
#include <string>

#include "bcn/autograd.hpp"
#include "bcn/model.hpp"

namespace bcn {

struct Init {
  std::mt19937_64 rng;
  Tensor uniform(int rows, int cols, double bound);
  Tensor normal(int rows, int cols, double sd);
};

void add_linear(ParamStore& ps, Init& in, const std::string& w, const std::string& b, int fan_in, int fan_out);
void add_norm(ParamStore& ps, const std::string& p, int d);
void add_attention_params(ParamStore& ps, Init& in, const std::string& p, int d);
void add_ffn_params(ParamStore& ps, Init& in, const std::string& p, int d, int ffn);
// Post-norm layers: attention, norm, (cross-attention, norm,) FFN, norm.
void add_encoder_layer(ParamStore& ps, Init& in, const std::string& p, int d, int ffn);
void add_decoder_layer(ParamStore& ps, Init& in, const std::string& p, int d, int ffn);

Var multi_head_attention(Tape& tape, ParamStore& ps, int heads, const std::string& p, Var xq, Var xkv,
                         const Mask& mask, std::optional<Var> s_tilde);
Var ffn_block(Tape& tape, ParamStore& ps, const std::string& p, Var x);
Var norm_block(Tape& tape, ParamStore& ps, const std::string& p, Var x);

}  // namespace bcn
