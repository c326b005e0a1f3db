#include "bcn/synth.hpp"

#include <algorithm>
#include <array>
#include <random>

#include "bcn/score_io.hpp"

namespace bcn {

namespace {

constexpr std::array<int, 7> kMajorScale = {0, 2, 4, 5, 7, 9, 11};
constexpr std::array<std::array<int, 4>, 6> kProgressions = {{
    {0, 4, 5, 3},  // I V vi IV
    {5, 3, 0, 4},  // vi IV I V
    {0, 5, 3, 4},  // I vi IV V
    {1, 4, 0, 5},  // ii V I vi
    {3, 4, 2, 5},  // IV V iii vi
    {0, 3, 4, 3},  // I IV V IV
}};

struct Builder {
  std::mt19937_64 rng;
  int q = 480;  // ticks per quarter
  bool jitter = true;

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng); }

  void add(Track& t, int pitch, long onset, long duration, int velocity) {
    long on = onset;
    if (jitter && !t.is_drum() && onset > 0) on += uniform(-q / 160, q / 160);
    t.notes.push_back({std::clamp(pitch, 0, 127), static_cast<int>(on), static_cast<int>(std::max(1L, duration)),
                       std::clamp(velocity, 1, 127)});
  }
};

// Scale-degree triad as pitch classes above the key root.
std::array<int, 3> triad(int key, int degree) {
  std::array<int, 3> pcs{};
  for (int k = 0; k < 3; ++k) {
    const int step = degree + 2 * k;
    pcs[static_cast<std::size_t>(k)] = key + kMajorScale[static_cast<std::size_t>(step % 7)] + 12 * (step / 7);
  }
  return pcs;
}

Track pitched(int program, std::string name) {
  Track t;
  t.instrument = program_class(program).value_or(Instrument::Piano);
  t.program = program;
  t.name = std::move(name);
  return t;
}

}  // namespace

Song synth_song(std::uint64_t seed, const SynthOptions& opt) {
  Builder b{std::mt19937_64(seed * 0x9E3779B97F4A7C15ULL + 1), opt.resolution, opt.jitter};
  const int q = opt.resolution;
  const long bar_len = 4L * q;
  const int n_bars = 24 + 8 * b.uniform(0, 2);
  const int key = b.uniform(0, 11);
  const auto prog_a = kProgressions[static_cast<std::size_t>(b.uniform(0, 5))];
  const auto prog_b = kProgressions[static_cast<std::size_t>(b.uniform(0, 5))];
  const bool has_strings = b.chance(0.7);
  const bool has_guitar = !has_strings || b.chance(0.4);
  const int base_vel = b.uniform(64, 96);

  // Melody rhythm and contour per section, reused whenever the section recurs.
  struct Phrase {
    std::vector<std::pair<int, int>> rhythm;  // (onset, length) in eighths within a bar
    std::vector<int> steps;                   // chord-tone choice per note
  };
  auto make_phrase = [&]() {
    std::array<Phrase, 4> p;
    for (auto& bar : p) {
      int pos = 0;
      while (pos < 8) {
        const int len = std::min(8 - pos, b.chance(0.6) ? 1 : 2 + b.uniform(0, 1));
        if (!b.chance(0.15) || pos == 0) {
          bar.rhythm.emplace_back(pos, len);
          bar.steps.push_back(b.uniform(0, 5));
        }
        pos += len;
      }
    }
    return p;
  };
  const auto phrase_a = make_phrase();
  const auto phrase_b = make_phrase();

  Song song;
  song.resolution = q;
  song.n_bars = n_bars;
  Track drums;
  drums.instrument = Instrument::Drum;
  drums.name = "Drums";
  Track bass = pitched(33, "Bass");
  Track piano = pitched(0, "Piano");
  Track strings = pitched(48, "Strings");
  Track guitar = pitched(25, "Guitar");
  Track melody = pitched(80, "Melody");
  melody.is_melody = true;
  melody.instrument = Instrument::SquareSynth;

  const long eighth = q / 2;
  const long sixteenth = q / 4;
  for (int bar = 0; bar < n_bars; ++bar) {
    const long t0 = bar * bar_len;
    const bool section_b = (bar / 8) % 3 == 1;
    const auto& prog = section_b ? prog_b : prog_a;
    const auto& phrase = section_b ? phrase_b : phrase_a;
    const int degree = prog[static_cast<std::size_t>(bar % 4)];
    const auto chord = triad(key, degree);
    const int vel = base_vel + (section_b ? 10 : 0);

    // Drums.
    for (int e = 0; e < 8; ++e) {
      const bool open = section_b && e % 2 == 1;
      b.add(drums, open ? 46 : 42, t0 + e * eighth, sixteenth, vel - 10 + b.uniform(-6, 6));
    }
    for (int beat : {0, 2}) b.add(drums, 36, t0 + beat * q, sixteenth, vel + 8);
    for (int beat : {1, 3}) b.add(drums, 38, t0 + beat * q, sixteenth, vel + 4);
    if (bar % 8 == 0) b.add(drums, 49, t0, sixteenth, vel + 12);
    if (bar % 8 == 7) {
      const std::array<int, 4> toms = {50, 47, 45, 43};
      for (int s = 0; s < 4; ++s) b.add(drums, toms[static_cast<std::size_t>(s)], t0 + 3 * q + s * sixteenth, sixteenth, vel);
    }

    // Bass: root on every beat, eighth pulse in section B.
    const int root = 36 + (chord[0] % 12);
    if (section_b) {
      for (int e = 0; e < 8; ++e) b.add(bass, root + (e == 7 ? 7 : 0), t0 + e * eighth, eighth - q / 24, vel + b.uniform(-8, 4));
    } else {
      for (int beat = 0; beat < 4; ++beat) b.add(bass, root + (beat == 2 ? 7 : 0), t0 + beat * q, q - q / 12, vel);
    }

    // Piano: block chords on beats 1 and 3.
    for (int half = 0; half < 2; ++half) {
      for (int pc : chord) b.add(piano, 60 + pc % 12 - (pc % 12 > 7 ? 12 : 0), t0 + half * 2 * q, 2 * q - q / 8, vel - 12 + b.uniform(-6, 6));
    }

    if (has_strings) {
      for (int pc : chord) b.add(strings, 48 + pc % 12, t0, bar_len - q / 8, vel - 20);
    }
    if (has_guitar) {
      for (int e = 1; e < 8; e += 2) {
        for (int pc : chord) b.add(guitar, 55 + pc % 12, t0 + e * eighth, eighth - q / 16, vel - 16 + b.uniform(-4, 4));
      }
    }

    // Melody over chord tones and passing scale tones.
    const auto& mb = phrase[static_cast<std::size_t>(bar % 4)];
    for (std::size_t n = 0; n < mb.rhythm.size(); ++n) {
      const auto [pos, len] = mb.rhythm[n];
      const int step = mb.steps[n];
      int pitch = 72 + (step < 3 ? chord[static_cast<std::size_t>(step)] % 12 : key + kMajorScale[static_cast<std::size_t>((degree + step) % 7)]);
      if (pitch > 86) pitch -= 12;
      b.add(melody, pitch, t0 + pos * eighth, len * eighth - q / 16, vel + 6 + b.uniform(-10, 10));
    }
  }

  song.tracks.push_back(std::move(drums));
  song.tracks.push_back(std::move(bass));
  song.tracks.push_back(std::move(piano));
  if (has_strings) song.tracks.push_back(std::move(strings));
  if (has_guitar) song.tracks.push_back(std::move(guitar));
  song.tracks.push_back(std::move(melody));
  for (auto& t : song.tracks) normalize_notes(t);
  return song;
}

}  // namespace bcn
