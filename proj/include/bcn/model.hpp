#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcn/autograd.hpp"
#include "bcn/bpe.hpp"
#include "bcn/features.hpp"
#include "bcn/song.hpp"
#include "bcn/tensor.hpp"
#include "bcn/tokenizer.hpp"
#include "bcn/vocab.hpp"

namespace bcn {

struct ModelConfig {
  int d = 32;
  int heads = 2;
  int ffn = 64;
  int layers_enc = 1;
  int layers_bottom = 1;
  int layers_top = 1;
  int layers_ctt = 1;
  int tracks = 4;
  int b_max = 64;
  int t_max = 4096;
  int vocab_size = 282;
  int codebook = 16;
  int latent = 32;
  std::uint64_t seed = 1;
  bool use_ctt = true;
  bool use_sesa = true;
  // Training.
  std::string schedule = "constant";  // or "warmup_linear"
  double lr = 1e-3;                   // constant rate, or warmup peak
  double lr_final = 4e-5;
  int warmup_steps = 0;
  int steps = 200;
  int batch_size = 8;
  int vq_steps = 200;
  double commitment = 0.25;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// "toy" or "paper"; InvalidArgument otherwise.
ModelConfig preset(std::string_view name);
void validate(const ModelConfig& cfg);
std::string config_to_text(const ModelConfig& cfg);
// Keys override `base`; unknown keys are BadFormat.
ModelConfig config_from_text(std::string_view text, ModelConfig base = {});
double learning_rate(const ModelConfig& cfg, int step);

struct Param {
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
};

class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) != 0; }
  Var var(Tape& tape, const std::string& name);
  void zero_grad();
  std::map<std::string, Param>& all() { return params_; }
  const std::map<std::string, Param>& all() const { return params_; }
  std::size_t scalar_count() const;

 private:
  std::map<std::string, Param> params_;
};

// Adam with beta1 0.9, beta2 0.99.
class Adam {
 public:
  void step(ParamStore& params, double lr);
  int steps_taken() const { return t_; }

 private:
  int t_ = 0;
};

// Model inputs of one track: ids[t] predicts targets[t] (-1 = ignored).
struct TrackInput {
  Instrument instrument = Instrument::Piano;
  std::vector<int> ids;
  std::vector<int> targets;
  std::vector<int> bar_index;
  std::vector<int> bar_positions;
};

struct Sample {
  FeatureGrid grid;
  std::vector<TrackInput> tracks;
  int n_bars = 0;
};

// Splits padded sequences into shifted inputs/targets with bar metadata.
// `vocab` must cover every id (base vocab extended with merges).
Sample make_sample(const FeatureGrid& grid, const TrackTokenSeqs& seqs, const Vocab& vocab);

struct ForwardResult {
  std::vector<Var> logits;  // per track, [T, V]
  Var loss;                 // summed cross-entropy
  long long tokens = 0;     // targets counted in the loss
};

class Model {
 public:
  explicit Model(ModelConfig cfg);  // random init from cfg.seed
  Model(ModelConfig cfg, ParamStore params);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Feature embedding for one track: [B, d].
  Var embed_conditions(Tape& tape, const FeatureGrid& grid, std::size_t track);
  Var encode_features(Tape& tape, Var c);
  // LayerNorm(softmax(Q K^T / sqrt(d))) over the bars: [B, B].
  Var bar_similarity(Tape& tape, Var e);
  Var embed_tokens(Tape& tape, const TrackInput& in);
  // Multi-head attention; when `s_tilde` is given the per-head logits are
  // multiplied element-wise by it before masking and scaling.
  Var attention(Tape& tape, const std::string& prefix, Var xq, Var xkv, const Mask& mask,
                std::optional<Var> s_tilde = std::nullopt);
  Var encoder_layer(Tape& tape, const std::string& prefix, Var x, const Mask& mask);
  Var decoder_layer(Tape& tape, const std::string& prefix, Var x, Var memory, std::optional<Var> s_tilde);
  Var decoder_stack(Tape& tape, const std::string& stack, int layers, Var x, Var memory, std::optional<Var> s_tilde);
  // Cross-track exchange of bar-token states; other rows copied through.
  std::vector<Var> ctt_forward(Tape& tape, const std::vector<Var>& o_btm,
                               const std::vector<std::vector<int>>& bar_positions);
  Var project_logits(Tape& tape, Var o_top, Instrument inst);

  ForwardResult forward(Tape& tape, const Sample& sample);

 private:
  void init();

  ModelConfig cfg_;
  ParamStore params_;
};

// Mean per-token loss of a batch; one Adam update.
double train_step(Model& model, Adam& opt, std::span<const Sample> batch, double lr);

struct TrainLog {
  std::vector<double> losses;  // mean per-token loss before each step
};
// Cycles through `samples` in order, cfg.batch_size per step.
TrainLog train(Model& model, std::span<const Sample> samples, int steps,
               const std::function<void(int, double)>& on_step = {});

// Central finite differences on up to `per_block` entries of every parameter
// block. Returns the worst relative error per block.
std::map<std::string, double> gradient_check(ParamStore& params, const std::function<Var(Tape&)>& loss_fn,
                                             double h = 1e-5, int per_block = 6, std::uint64_t seed = 7);

// ---- learned features ----

struct VqResult {
  VqCodes codes{};
  Tensor z_q;
};
// Nearest codebook row per group of latent/8 values (squared distance, ties
// to the lower index).
VqResult vq_quantize(const Tensor& z_e, const Tensor& codebook);

// [Instrument, bar token, bar content...] for every bar of an unpadded track.
std::vector<std::vector<int>> bar_subsequences(std::span<const int> seq, const Vocab& vocab);

class VqVae {
 public:
  explicit VqVae(const ModelConfig& cfg);  // parameters named "vq.*"
  VqVae(const ModelConfig& cfg, ParamStore params);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Var encode(Tape& tape, const std::vector<int>& bar_seq);  // z_e [1, latent]
  // Reconstruction cross-entropy (mean per token) + codebook + commitment.
  Var loss(Tape& tape, const std::vector<int>& bar_seq, VqCodes* codes = nullptr, double* recon = nullptr);
  VqCodes codes(const std::vector<int>& bar_seq);

 private:
  void init();
  Var attention(Tape& tape, const std::string& prefix, Var xq, Var xkv, const Mask& mask);

  ModelConfig cfg_;
  ParamStore params_;
};

// Returns the mean reconstruction loss per step.
std::vector<double> train_vqvae(VqVae& vq, std::span<const std::vector<int>> bar_seqs, int steps, double lr,
                                int batch_size);
// Fills grid.vq_entries from the track sequences (unpadded or padded).
void assign_vq_codes(VqVae& vq, FeatureGrid& grid, const TrackTokenSeqs& seqs, const Vocab& vocab);

// ---- generation ----

int top_k_size(int vocab_size);  // max(1, round(0.02 V))

struct SampleAudit {
  int track = 0;
  int position = 0;   // index of the emitted token in its track
  int id = 0;
  double prob = 0;    // model probability of the emitted id
  double kth_prob = 0;
  int rank = 0;       // rank of id by probability (0 = best)
  bool forced = false;
};

// Draws from the k most probable ids of `probs` restricted to `valid` ids,
// renormalized. Ties in probability rank the lower id first. Returns -1 if
// no valid id is among the top k.
int sample_top_k(std::span<const double> probs, int k, const std::vector<char>& valid, std::mt19937_64& rng,
                 SampleAudit* audit = nullptr);

struct GenerateResult {
  TrackTokenSeqs raw;       // emitted ids (may hold merged tokens), padded
  TrackTokenSeqs repaired;  // base vocabulary, grammar-repaired, padded
  std::vector<SampleAudit> audit;
  long long tokens = 0;
  double seconds = 0;
};

// Bar-synchronous decoding: every track runs until its next bar token, the
// bar tokens of all tracks pass the cross-track encoder together, then all
// tracks continue. `vocab` covers the model's ids; `bpe` (optional) expands
// merged tokens before repair.
GenerateResult generate(Model& model, const FeatureGrid& grid, const Vocab& vocab, const BpeModel* bpe,
                        std::uint64_t seed);

// ---- persistence ----

struct Bundle {
  ModelConfig config;
  ParamStore model;
  ParamStore vq;
  Vocab vocab;               // model vocabulary (with merges)
  std::vector<Merge> merges;
};

std::vector<std::uint8_t> save_bundle(const Bundle& b);
Bundle load_bundle(std::span<const std::uint8_t> bytes);

}  // namespace bcn
