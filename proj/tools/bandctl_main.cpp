// bandctl: command-line front end over the C API.
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bandctl/bandctl.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Failure {
  bcn_status status;
  std::string message;
};

int exit_code(bcn_status s) {
  switch (s) {
    case BCN_OK: return kExitOk;
    case BCN_E_INVALID_ARGUMENT: return kExitUsage;
    case BCN_E_NON_FINITE:
    case BCN_E_EMPTY_CODEBOOK: return kExitNumeric;
    default: return kExitData;
  }
}

void check(bcn_status s, const std::string& context) {
  if (s != BCN_OK) throw Failure{s, context + ": " + bcn_last_error()};
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& o) noexcept : p(o.p) { o.p = nullptr; }
  Handle& operator=(Handle&& o) noexcept {
    std::swap(p, o.p);
    return *this;
  }
  ~Handle() {
    if (p) Free(p);
  }
  T** out() { return &p; }
  T* get() const { return p; }
};
using Song = Handle<bcn_song, bcn_song_free>;
using Vocab = Handle<bcn_vocab, bcn_vocab_free>;
using Corpus = Handle<bcn_corpus, bcn_corpus_free>;
using Bpe = Handle<bcn_bpe, bcn_bpe_free>;
using Grid = Handle<bcn_grid, bcn_grid_free>;
using Model = Handle<bcn_model, bcn_model_free>;

void write_atomic(const fs::path& path, const std::string& data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    f << data;
    if (!f) throw Failure{BCN_E_IO, "cannot write " + tmp.string()};
  }
  fs::rename(tmp, path);
}

std::vector<fs::path> files_with(const fs::path& dir, std::initializer_list<const char*> exts) {
  if (!fs::is_directory(dir)) throw Failure{BCN_E_MISSING_INPUT, "not a directory: " + dir.string()};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    for (const char* x : exts) {
      if (e.path().extension() == x) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Runs f(i) for i in [0, n) on up to `jobs` threads; the first failure wins.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::optional<Failure> failure;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        f(i);
      } catch (const Failure& e) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = e;
      }
    }
  };
  const int t = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int k = 1; k < t; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) throw *failure;
}

struct Manifest {
  std::string command;
  json args = json::object();
  json inputs = json::array();
  json outputs = json::array();
  json extra = json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const fs::path& path) const {
    json j;
    j["command"] = command;
    j["tool_version"] = bcn_version();
    j["args"] = args;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    for (const auto& [k, v] : extra.items()) j[k] = v;
    j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_atomic(path, j.dump(2) + "\n");
  }
};

fs::path manifest_for_file(const fs::path& p) {
  fs::path m = p;
  m += ".manifest.json";
  return m;
}

Song load_song(const fs::path& path, bool prepare_midi, bool check_filter) {
  Song s;
  if (path.extension() == ".song") {
    check(bcn_song_read_text(path.string().c_str(), s.out()), path.string());
    return s;
  }
  check(bcn_song_read_midi(path.string().c_str(), s.out()), path.string());
  if (!prepare_midi) return s;
  Song p;
  check(bcn_song_prepare(s.get(), check_filter ? 1 : 0, p.out()), path.string());
  return p;
}

std::vector<Song> load_song_dir(const fs::path& dir, std::vector<std::string>* ids = nullptr) {
  std::vector<Song> songs;
  for (const auto& p : files_with(dir, {".song"})) {
    songs.push_back(load_song(p, false, false));
    if (ids) ids->push_back(p.stem().string());
  }
  if (songs.empty()) throw Failure{BCN_E_MISSING_INPUT, "no .song files in " + dir.string()};
  return songs;
}

std::vector<bcn_song*> raw(const std::vector<Song>& songs) {
  std::vector<bcn_song*> v;
  for (const auto& s : songs) v.push_back(s.get());
  return v;
}

// ---- commands ----

struct MakeCorpusArgs {
  std::string out;
  int songs = 30;
  std::uint64_t seed = 1;
};

void cmd_make_corpus(const MakeCorpusArgs& a) {
  Manifest m{"make-corpus"};
  m.args = {{"out", a.out}, {"songs", a.songs}, {"seed", a.seed}};
  fs::create_directories(a.out);
  for (int i = 0; i < a.songs; ++i) {
    Song s;
    check(bcn_song_synth(a.seed * 1000 + static_cast<std::uint64_t>(i), s.out()), "synth");
    char name[32];
    std::snprintf(name, sizeof name, "song_%03d.mid", i);
    const fs::path p = fs::path(a.out) / name;
    check(bcn_song_write_midi(s.get(), p.string().c_str()), p.string());
    m.outputs.push_back(p.filename().string());
  }
  m.write(fs::path(a.out) / "manifest.json");
  std::cout << "wrote " << a.songs << " songs to " << a.out << "\n";
}

struct PreprocessArgs {
  std::string in, out;
  int min_bars = 16, max_bars = 32, stride = 8, jobs = 1;
};

void cmd_preprocess(const PreprocessArgs& a) {
  if (a.min_bars < 1 || a.max_bars < a.min_bars || a.stride < 1) {
    throw Failure{BCN_E_INVALID_ARGUMENT, "need 1 <= --min-bars <= --max-bars and --stride >= 1"};
  }
  Manifest m{"preprocess"};
  m.args = {{"in", a.in}, {"out", a.out}, {"min_bars", a.min_bars}, {"max_bars", a.max_bars}, {"stride", a.stride}};
  const auto files = files_with(a.in, {".mid", ".midi"});
  if (files.empty()) throw Failure{BCN_E_MISSING_INPUT, "no MIDI files in " + a.in};
  struct Result {
    std::vector<Song> windows;
    std::string rejected;
  };
  std::vector<Result> results(files.size());
  parallel_for(files.size(), a.jobs, [&](std::size_t i) {
    Song rawsong, prepared;
    bcn_status s = bcn_song_read_midi(files[i].string().c_str(), rawsong.out());
    if (s == BCN_OK) s = bcn_song_prepare(rawsong.get(), 1, prepared.out());
    if (s != BCN_OK) {
      results[i].rejected = std::string(bcn_status_name(s)) + ": " + bcn_last_error();
      return;
    }
    bcn_song** arr = nullptr;
    std::size_t n = 0;
    check(bcn_song_windows(prepared.get(), a.min_bars, a.max_bars, a.stride, &arr, &n), files[i].string());
    for (std::size_t k = 0; k < n; ++k) {
      Song w;
      *w.out() = arr[k];
      arr[k] = nullptr;
      results[i].windows.push_back(std::move(w));
    }
    bcn_song_array_free(arr, n);
  });

  std::vector<std::pair<std::string, bcn_song*>> all;
  std::ostringstream log;
  for (std::size_t i = 0; i < files.size(); ++i) {
    m.inputs.push_back(files[i].filename().string());
    if (!results[i].rejected.empty()) {
      log << "reject " << files[i].filename().string() << " " << results[i].rejected << "\n";
      continue;
    }
    for (std::size_t k = 0; k < results[i].windows.size(); ++k) {
      all.emplace_back(files[i].stem().string() + "_w" + std::to_string(k), results[i].windows[k].get());
    }
  }
  std::vector<bcn_song*> ptrs;
  for (auto& [id, s] : all) ptrs.push_back(s);
  std::vector<unsigned char> keep(ptrs.size());
  check(bcn_song_dedupe(ptrs.data(), ptrs.size(), keep.data()), "dedupe");
  std::size_t written = 0;
  std::ostringstream split;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!keep[i]) {
      log << "duplicate " << all[i].first << "\n";
      continue;
    }
    const fs::path p = fs::path(a.out) / (all[i].first + ".song");
    fs::create_directories(a.out);
    check(bcn_song_write_text(all[i].second, p.string().c_str()), p.string());
    split << all[i].first << " " << (bcn_is_test_song(all[i].first.c_str()) ? "test" : "train") << "\n";
    m.outputs.push_back(p.filename().string());
    ++written;
  }
  if (written == 0) throw Failure{BCN_E_EMPTY_CORPUS, "no song survived preprocessing"};
  write_atomic(fs::path(a.out) / "preprocess.log", log.str());
  write_atomic(fs::path(a.out) / "split.txt", split.str());
  m.extra["windows"] = written;
  m.write(fs::path(a.out) / "manifest.json");
  std::cout << "kept " << written << " windows from " << files.size() << " files\n" << log.str();
}

struct TokenizeArgs {
  std::string in, out, vocab_out, repr = "remi_track";
};

bcn_representation parse_repr(const std::string& r) {
  if (r == "remi_track") return BCN_REMI_TRACK;
  if (r == "remi_plus") return BCN_REMI_PLUS;
  throw Failure{BCN_E_INVALID_ARGUMENT, "unknown representation " + r};
}

void cmd_tokenize(const TokenizeArgs& a) {
  Manifest m{"tokenize"};
  m.args = {{"in", a.in}, {"out", a.out}, {"vocab_out", a.vocab_out}, {"repr", a.repr}};
  std::vector<std::string> ids;
  auto songs = load_song_dir(a.in, &ids);
  Vocab v;
  check(bcn_vocab_default(parse_repr(a.repr), v.out()), "vocab");
  Corpus c;
  check(bcn_corpus_new(c.out()), "corpus");
  for (std::size_t i = 0; i < songs.size(); ++i) {
    check(bcn_corpus_add_song(c.get(), ids[i].c_str(), songs[i].get(), v.get()), ids[i]);
    m.inputs.push_back(ids[i] + ".song");
  }
  check(bcn_corpus_write(c.get(), a.out.c_str()), a.out);
  m.outputs.push_back(a.out);
  if (!a.vocab_out.empty()) {
    check(bcn_vocab_write(v.get(), a.vocab_out.c_str()), a.vocab_out);
    m.outputs.push_back(a.vocab_out);
  }
  m.write(manifest_for_file(a.out));
  std::cout << "tokenized " << songs.size() << " songs, vocabulary " << bcn_vocab_size(v.get()) << "\n";
}

struct BpeArgs {
  std::string corpus, vocab, out, encoded_out;
  int vocab_size = 10000;
};

void cmd_bpe_train(const BpeArgs& a) {
  Manifest m{"bpe-train"};
  m.args = {{"corpus", a.corpus}, {"vocab", a.vocab}, {"vocab_size", a.vocab_size}, {"out", a.out}};
  Vocab v;
  check(bcn_vocab_read(a.vocab.c_str(), v.out()), a.vocab);
  Corpus c;
  check(bcn_corpus_read(a.corpus.c_str(), c.out()), a.corpus);
  Bpe b;
  check(bcn_bpe_train(c.get(), v.get(), a.vocab_size, b.out()), "bpe-train");
  check(bcn_bpe_write(b.get(), a.out.c_str()), a.out);
  m.inputs = {a.corpus, a.vocab};
  m.outputs.push_back(a.out);
  if (!a.encoded_out.empty()) {
    Corpus enc;
    check(bcn_bpe_encode_corpus(b.get(), c.get(), enc.out()), "encode");
    check(bcn_corpus_write(enc.get(), a.encoded_out.c_str()), a.encoded_out);
    m.outputs.push_back(a.encoded_out);
  }
  m.extra["learned_vocab_size"] = bcn_bpe_vocab_size(b.get());
  m.write(manifest_for_file(a.out));
  std::cout << "learned vocabulary of " << bcn_bpe_vocab_size(b.get()) << " tokens\n";
}

struct FeaturesArgs {
  std::string in, out;
  int jobs = 1;
};

void cmd_features(const FeaturesArgs& a) {
  Manifest m{"features"};
  m.args = {{"in", a.in}, {"out", a.out}};
  std::vector<std::string> ids;
  auto songs = load_song_dir(a.in, &ids);
  std::vector<Grid> grids(songs.size());
  parallel_for(songs.size(), a.jobs, [&](std::size_t i) { check(bcn_grid_extract(songs[i].get(), grids[i].out()), ids[i]); });
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < songs.size(); ++i) {
    const fs::path p = fs::path(a.out) / (ids[i] + ".feat");
    check(bcn_grid_write(grids[i].get(), p.string().c_str()), p.string());
    m.inputs.push_back(ids[i] + ".song");
    m.outputs.push_back(p.filename().string());
  }
  m.write(fs::path(a.out) / "manifest.json");
  std::cout << "wrote features for " << songs.size() << " songs\n";
}

struct TrainArgs {
  std::string songs, bpe, out, preset = "toy", config, log;
  int steps = -1, vq_steps = -1, crop_bars = 0, max_samples = 0;
  bool all_songs = false;
};

void cmd_train(const TrainArgs& a) {
  Manifest m{"train"};
  m.args = {{"songs", a.songs}, {"bpe", a.bpe}, {"preset", a.preset}, {"config", a.config}, {"steps", a.steps},
            {"vq_steps", a.vq_steps}, {"crop_bars", a.crop_bars}, {"max_samples", a.max_samples},
            {"all_songs", a.all_songs}, {"out", a.out}};
  std::vector<std::string> ids;
  auto all = load_song_dir(a.songs, &ids);
  std::vector<Song> train;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (a.all_songs || !bcn_is_test_song(ids[i].c_str())) {
      m.inputs.push_back(ids[i] + ".song");
      train.push_back(std::move(all[i]));
    }
  }
  if (train.empty()) throw Failure{BCN_E_EMPTY_CORPUS, "no training songs after the split"};
  std::string overrides;
  if (!a.config.empty()) {
    std::ifstream f(a.config);
    if (!f) throw Failure{BCN_E_IO, "cannot read " + a.config};
    overrides.assign(std::istreambuf_iterator<char>(f), {});
    overrides += "\n";
  }
  if (a.steps >= 0) overrides += "steps = " + std::to_string(a.steps) + "\n";
  if (a.vq_steps >= 0) overrides += "vq_steps = " + std::to_string(a.vq_steps) + "\n";
  Bpe bpe;
  if (!a.bpe.empty()) {
    Vocab v;
    check(bcn_vocab_default(BCN_REMI_TRACK, v.out()), "vocab");
    check(bcn_bpe_read(a.bpe.c_str(), v.get(), bpe.out()), a.bpe);
  }
  std::ostringstream log;
  struct Ctx {
    std::ostringstream* log;
  } ctx{&log};
  bcn_train_options opt{a.preset.c_str(), overrides.empty() ? nullptr : overrides.c_str(), a.crop_bars,
                        a.max_samples,
                        [](void* user, const char* phase, int step, double loss) {
                          auto* c = static_cast<Ctx*>(user);
                          *c->log << phase << " " << step << " " << loss << "\n";
                          if (step % 50 == 0) std::cerr << phase << " step " << step << " loss " << loss << "\n";
                        },
                        &ctx};
  auto songs = raw(train);
  Model model;
  check(bcn_model_train(songs.data(), songs.size(), bpe.get(), &opt, model.out()), "train");
  check(bcn_model_write(model.get(), a.out.c_str()), a.out);
  m.outputs.push_back(a.out);
  if (!a.log.empty()) {
    write_atomic(a.log, log.str());
    m.outputs.push_back(a.log);
  }
  m.extra["config"] = bcn_model_config(model.get());
  m.write(manifest_for_file(a.out));
  std::cout << "trained on " << train.size() << " songs, wrote " << a.out << "\n";
}

struct GenerateArgs {
  std::string checkpoint, reference, out, tokens_out, song_out;
  std::uint64_t seed = 1;
};

void cmd_generate(const GenerateArgs& a) {
  Manifest m{"generate"};
  m.args = {{"checkpoint", a.checkpoint}, {"reference", a.reference}, {"out", a.out}, {"seed", a.seed}};
  Model model;
  check(bcn_model_read(a.checkpoint.c_str(), model.out()), a.checkpoint);
  Song ref = load_song(a.reference, true, true);
  Corpus tokens;
  check(bcn_corpus_new(tokens.out()), "corpus");
  Song cover;
  bcn_generation_info info{};
  check(bcn_generate(model.get(), ref.get(), a.seed, cover.out(), tokens.get(), fs::path(a.out).stem().string().c_str(), &info),
        "generate");
  check(bcn_song_write_midi(cover.get(), a.out.c_str()), a.out);
  m.inputs = {a.checkpoint, a.reference};
  m.outputs.push_back(a.out);
  if (!a.song_out.empty()) {
    check(bcn_song_write_text(cover.get(), a.song_out.c_str()), a.song_out);
    m.outputs.push_back(a.song_out);
  }
  if (!a.tokens_out.empty()) {
    check(bcn_corpus_write(tokens.get(), a.tokens_out.c_str()), a.tokens_out);
    m.outputs.push_back(a.tokens_out);
  }
  m.extra["generation"] = {{"tokens", info.tokens}, {"notes", info.notes},       {"seconds", info.seconds},
                           {"bars", info.n_bars},   {"forced", info.forced}, {"outside_top_k", info.outside_top_k}};
  m.write(manifest_for_file(a.out));
  std::cout << "generated " << info.n_bars << " bars, " << info.notes << " notes, " << info.tokens << " tokens in "
            << info.seconds << " s\n";
}

struct EvaluateArgs {
  std::string ref, cov, out;
  int jobs = 1;
};

void cmd_evaluate(const EvaluateArgs& a) {
  Manifest m{"evaluate"};
  m.args = {{"ref", a.ref}, {"cov", a.cov}, {"out", a.out}};
  auto pick = [](const fs::path& dir) {
    std::map<std::string, fs::path> by_stem;
    for (const auto& p : files_with(dir, {".mid", ".song"})) {
      auto [it, fresh] = by_stem.emplace(p.stem().string(), p);
      if (!fresh && p.extension() == ".song") it->second = p;
    }
    return by_stem;
  };
  auto refs = pick(a.ref);
  auto covs = pick(a.cov);
  if (refs.empty()) throw Failure{BCN_E_MISSING_INPUT, "no songs in " + a.ref};
  for (const auto& [stem, p] : refs) {
    if (!covs.count(stem)) throw Failure{BCN_E_PAIR_MISMATCH, "no cover for " + p.filename().string()};
  }
  for (const auto& [stem, p] : covs) {
    if (!refs.count(stem)) throw Failure{BCN_E_PAIR_MISMATCH, "no reference for " + p.filename().string()};
  }
  std::vector<std::string> stems;
  for (const auto& [stem, p] : refs) stems.push_back(stem);
  std::vector<bcn_report> reports(stems.size());
  parallel_for(stems.size(), a.jobs, [&](std::size_t i) {
    Song r = load_song(refs[stems[i]], true, false);
    Song c = load_song(covs[stems[i]], true, false);
    long long tokens = 0, notes = 0;
    double seconds = 0;
    const fs::path cov_dir = covs[stems[i]].parent_path();
    std::ifstream mf(fs::exists(cov_dir / (stems[i] + ".mid.manifest.json")) ? cov_dir / (stems[i] + ".mid.manifest.json")
                                                                            : manifest_for_file(covs[stems[i]]));
    if (mf) {
      json j = json::parse(mf, nullptr, false);
      if (j.is_object() && j.contains("generation")) {
        tokens = j["generation"].value("tokens", 0LL);
        notes = j["generation"].value("notes", 0LL);
        seconds = j["generation"].value("seconds", 0.0);
      }
    }
    check(bcn_evaluate(r.get(), c.get(), tokens, notes, seconds, &reports[i]), stems[i]);
  });
  auto line = [](std::string s) {
    if (s.empty() || s.back() != '\n') s += '\n';
    return s;
  };
  std::string csv = line(bcn_report_csv_header());
  for (std::size_t i = 0; i < stems.size(); ++i) {
    csv += line(bcn_report_csv_row(stems[i].c_str(), &reports[i]));
    m.inputs.push_back(stems[i]);
  }
  bcn_report mean{};
  check(bcn_report_mean(reports.data(), reports.size(), &mean), "mean");
  csv += line(bcn_report_csv_row("MEAN", &mean));
  write_atomic(a.out, csv);
  m.outputs.push_back(a.out);
  m.write(manifest_for_file(a.out));
  std::cout << bcn_report_text(&mean);
}

struct StatsArgs {
  std::string songs, out;
  int bpe_size = 10000;
};

void cmd_stats(const StatsArgs& a) {
  Manifest m{"stats"};
  m.args = {{"songs", a.songs}, {"bpe_size", a.bpe_size}};
  auto songs = load_song_dir(a.songs);
  auto ptrs = raw(songs);
  std::ostringstream t;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %8s %10s %10s %10s\n", "Representation", "Vocab", "Tok/B", "Tok/N", "Avg.Len");
  t << line;
  const std::pair<const char*, bcn_representation> reprs[] = {{"REMI_Track", BCN_REMI_TRACK}, {"REMI+", BCN_REMI_PLUS}};
  for (const auto& [name, repr] : reprs) {
    for (int target : {0, a.bpe_size}) {
      bcn_tok_stats s{};
      check(bcn_stats(ptrs.data(), ptrs.size(), repr, target, &s), name);
      std::string label = std::string(name) + (target ? "+BPE" : "");
      std::snprintf(line, sizeof line, "%-16s %8d %10.2f %10.2f %10.2f\n", label.c_str(), s.vocab_size, s.tok_per_beat,
                    s.tok_per_note, s.avg_len);
      t << line;
    }
  }
  std::cout << t.str();
  if (!a.out.empty()) {
    write_atomic(a.out, t.str());
    m.outputs.push_back(a.out);
    m.write(manifest_for_file(a.out));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bandctl: multitrack music tokenization, modelling and evaluation"};
  app.require_subcommand(1);

  MakeCorpusArgs mk;
  auto* c_mk = app.add_subcommand("make-corpus", "Write deterministic synthetic MIDI songs");
  c_mk->add_option("--out", mk.out, "Output directory")->required();
  c_mk->add_option("--songs", mk.songs, "Number of songs")->check(CLI::Range(1, 10000));
  c_mk->add_option("--seed", mk.seed, "Seed");

  PreprocessArgs pp;
  auto* c_pp = app.add_subcommand("preprocess", "Quantize, compress, filter, window and dedupe MIDI files");
  c_pp->add_option("--in", pp.in, "Directory of MIDI files")->required();
  c_pp->add_option("--out", pp.out, "Directory for .song windows")->required();
  c_pp->add_option("--min-bars", pp.min_bars, "Shortest trailing window");
  c_pp->add_option("--max-bars", pp.max_bars, "Window length");
  c_pp->add_option("--stride", pp.stride, "Window stride");
  c_pp->add_option("--jobs", pp.jobs, "Worker threads")->check(CLI::Range(1, 256));

  TokenizeArgs tk;
  auto* c_tk = app.add_subcommand("tokenize", "Tokenize a directory of songs into a token corpus");
  c_tk->add_option("--in", tk.in, "Directory of .song files")->required();
  c_tk->add_option("--out", tk.out, "Token corpus file")->required();
  c_tk->add_option("--vocab-out", tk.vocab_out, "Vocabulary file");
  c_tk->add_option("--repr", tk.repr, "remi_track or remi_plus");

  BpeArgs bp;
  auto* c_bp = app.add_subcommand("bpe-train", "Learn position-constrained BPE merges");
  c_bp->add_option("--corpus", bp.corpus, "Token corpus")->required();
  c_bp->add_option("--vocab", bp.vocab, "Vocabulary file")->required();
  c_bp->add_option("--vocab-size", bp.vocab_size, "Target vocabulary size");
  c_bp->add_option("--out", bp.out, "Merge file")->required();
  c_bp->add_option("--encoded-out", bp.encoded_out, "Also write the encoded corpus");

  FeaturesArgs ft;
  auto* c_ft = app.add_subcommand("features", "Extract binned expert features");
  c_ft->add_option("--in", ft.in, "Directory of .song files")->required();
  c_ft->add_option("--out", ft.out, "Directory for .feat files")->required();
  c_ft->add_option("--jobs", ft.jobs, "Worker threads")->check(CLI::Range(1, 256));

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train the VQ-VAE and the generation model");
  c_tr->add_option("--songs", tr.songs, "Directory of .song files")->required();
  c_tr->add_option("--out", tr.out, "Checkpoint file")->required();
  c_tr->add_option("--preset", tr.preset, "toy or paper")->check(CLI::IsMember({"toy", "paper"}));
  c_tr->add_option("--config", tr.config, "key = value overrides");
  c_tr->add_option("--bpe", tr.bpe, "Merge file");
  c_tr->add_option("--steps", tr.steps, "Training steps");
  c_tr->add_option("--vq-steps", tr.vq_steps, "VQ-VAE training steps");
  c_tr->add_option("--crop-bars", tr.crop_bars, "Split songs into chunks of this many bars");
  c_tr->add_option("--max-samples", tr.max_samples, "Cap on training samples");
  c_tr->add_flag("--all-songs", tr.all_songs, "Also train on the held-out split");
  c_tr->add_option("--log", tr.log, "Loss log file");

  GenerateArgs gn;
  auto* c_gn = app.add_subcommand("generate", "Generate a cover conditioned on a reference song");
  c_gn->add_option("--checkpoint", gn.checkpoint, "Checkpoint file")->required();
  c_gn->add_option("--reference", gn.reference, "Reference .mid or .song")->required();
  c_gn->add_option("--out", gn.out, "Output MIDI file")->required();
  c_gn->add_option("--seed", gn.seed, "Sampling seed");
  c_gn->add_option("--tokens-out", gn.tokens_out, "Emitted token ids");
  c_gn->add_option("--song-out", gn.song_out, "Cover in song text form");

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Compare covers against references");
  c_ev->add_option("--ref", ev.ref, "Reference directory")->required();
  c_ev->add_option("--cov", ev.cov, "Cover directory")->required();
  c_ev->add_option("--out", ev.out, "CSV report")->required();
  c_ev->add_option("--jobs", ev.jobs, "Worker threads")->check(CLI::Range(1, 256));

  StatsArgs st;
  auto* c_st = app.add_subcommand("stats", "Token statistics per representation");
  c_st->add_option("--songs", st.songs, "Directory of .song files")->required();
  c_st->add_option("--bpe-size", st.bpe_size, "BPE target vocabulary size");
  c_st->add_option("--out", st.out, "Table file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_mk) cmd_make_corpus(mk);
    if (*c_pp) cmd_preprocess(pp);
    if (*c_tk) cmd_tokenize(tk);
    if (*c_bp) cmd_bpe_train(bp);
    if (*c_ft) cmd_features(ft);
    if (*c_tr) cmd_train(tr);
    if (*c_gn) cmd_generate(gn);
    if (*c_ev) cmd_evaluate(ev);
    if (*c_st) cmd_stats(st);
  } catch (const Failure& f) {
    std::cerr << "error (" << bcn_status_name(f.status) << "): " << f.message << "\n";
    return exit_code(f.status);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
