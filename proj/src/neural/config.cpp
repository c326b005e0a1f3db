#include <cmath>
#include <sstream>

#include "bcn/error.hpp"
#include "bcn/model.hpp"
#include "bcn/text.hpp"

namespace bcn {

ModelConfig preset(std::string_view name) {
  ModelConfig c;
  if (name == "toy") return c;
  if (name == "paper") {
    c.d = 256;
    c.heads = 8;
    c.ffn = 1024;
    c.layers_enc = 4;
    c.layers_bottom = 3;
    c.layers_top = 3;
    c.layers_ctt = 2;
    c.vocab_size = 10000;
    c.codebook = 1024;
    c.latent = 1024;
    c.schedule = "warmup_linear";
    c.lr = 4e-4;
    c.lr_final = 4e-5;
    c.steps = 100000;
    c.warmup_steps = 20000;
    c.batch_size = 4;
    c.vq_steps = 20000;
    return c;
  }
  throw Error(Errc::InvalidArgument, "unknown preset '" + std::string(name) + "' (toy, paper)");
}

void validate(const ModelConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw Error(Errc::InvalidArgument, "config: " + what);
  };
  need(c.d > 0 && c.heads > 0 && c.d % c.heads == 0, "d must be a positive multiple of heads");
  need(c.ffn > 0, "ffn must be positive");
  need(c.layers_enc >= 0 && c.layers_bottom >= 0 && c.layers_top >= 0 && c.layers_ctt >= 0, "layer counts >= 0");
  need(c.tracks > 0 && c.b_max > 0 && c.t_max > 2, "tracks, b_max, t_max must be positive");
  need(c.vocab_size > 2, "vocab_size must exceed 2");
  need(c.codebook > 0, "codebook must be positive");
  need(c.latent > 0 && c.latent % kVqGroups == 0, "latent must be a positive multiple of 8");
  need(c.schedule == "constant" || c.schedule == "warmup_linear", "schedule is constant or warmup_linear");
  need(c.lr > 0 && c.lr_final >= 0 && c.warmup_steps >= 0 && c.steps >= 0 && c.batch_size > 0, "training values");
  need(c.vq_steps >= 0 && c.commitment >= 0, "vq training values");
}

std::string config_to_text(const ModelConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "d = " << c.d << "\nheads = " << c.heads << "\nffn = " << c.ffn << "\nlayers_enc = " << c.layers_enc
      << "\nlayers_bottom = " << c.layers_bottom << "\nlayers_top = " << c.layers_top
      << "\nlayers_ctt = " << c.layers_ctt << "\ntracks = " << c.tracks << "\nb_max = " << c.b_max
      << "\nt_max = " << c.t_max << "\nvocab_size = " << c.vocab_size << "\ncodebook = " << c.codebook
      << "\nlatent = " << c.latent << "\nseed = " << c.seed << "\nuse_ctt = " << (c.use_ctt ? 1 : 0)
      << "\nuse_sesa = " << (c.use_sesa ? 1 : 0) << "\nschedule = " << c.schedule << "\nlr = " << c.lr
      << "\nlr_final = " << c.lr_final << "\nwarmup_steps = " << c.warmup_steps << "\nsteps = " << c.steps
      << "\nbatch_size = " << c.batch_size << "\nvq_steps = " << c.vq_steps << "\ncommitment = " << c.commitment
      << '\n';
  return out.str();
}

ModelConfig config_from_text(std::string_view text, ModelConfig c) {
  for (auto raw : split_lines(text)) {
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(Errc::BadFormat, "config line needs 'key = value'");
    auto key = trim(line.substr(0, eq));
    auto val = trim(line.substr(eq + 1));
    if (key == "d") c.d = parse_int(val);
    else if (key == "heads") c.heads = parse_int(val);
    else if (key == "ffn") c.ffn = parse_int(val);
    else if (key == "layers_enc") c.layers_enc = parse_int(val);
    else if (key == "layers_bottom") c.layers_bottom = parse_int(val);
    else if (key == "layers_top") c.layers_top = parse_int(val);
    else if (key == "layers_ctt") c.layers_ctt = parse_int(val);
    else if (key == "tracks") c.tracks = parse_int(val);
    else if (key == "b_max") c.b_max = parse_int(val);
    else if (key == "t_max") c.t_max = parse_int(val);
    else if (key == "vocab_size") c.vocab_size = parse_int(val);
    else if (key == "codebook") c.codebook = parse_int(val);
    else if (key == "latent") c.latent = parse_int(val);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_i64(val));
    else if (key == "use_ctt") c.use_ctt = parse_int(val) != 0;
    else if (key == "use_sesa") c.use_sesa = parse_int(val) != 0;
    else if (key == "schedule") c.schedule = std::string(val);
    else if (key == "lr") c.lr = parse_double(val);
    else if (key == "lr_final") c.lr_final = parse_double(val);
    else if (key == "warmup_steps") c.warmup_steps = parse_int(val);
    else if (key == "steps") c.steps = parse_int(val);
    else if (key == "batch_size") c.batch_size = parse_int(val);
    else if (key == "vq_steps") c.vq_steps = parse_int(val);
    else if (key == "commitment") c.commitment = parse_double(val);
    else throw Error(Errc::BadFormat, "unknown config key '" + std::string(key) + "'");
  }
  validate(c);
  return c;
}

double learning_rate(const ModelConfig& c, int step) {
  if (c.schedule == "constant") return c.lr;
  if (step < c.warmup_steps) return c.lr * static_cast<double>(step + 1) / c.warmup_steps;
  const int span = std::max(1, c.steps - c.warmup_steps);
  const double frac = std::min(1.0, static_cast<double>(step - c.warmup_steps) / span);
  return c.lr + (c.lr_final - c.lr) * frac;
}

}  // namespace bcn
