#pragma once

#include <cstdint>

#include "bcn/song.hpp"

namespace bcn {

struct SynthOptions {
  int resolution = 480;  // ticks per quarter of the generated note data
  bool jitter = true;    // small onset offsets that quantization removes
};

// Deterministic pop-style multitrack song: drums, bass, piano, a pad or
// strum track (sometimes both) and a monophonic "Melody" track over a
// repeating section form of 24, 32 or 40 bars.
Song synth_song(std::uint64_t seed, const SynthOptions& opt = {});

}  // namespace bcn
