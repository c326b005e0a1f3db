#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bcn/song.hpp"

namespace bcn {

// Reads a format 0/1 Standard MIDI File at its native resolution. Notes are
// grouped per (track chunk, channel); channel 10 becomes a Drum track. Tempo
// is discarded. Throws MalformedMidi or UnsupportedTimeSignature.
Song parse_midi(std::span<const std::uint8_t> bytes);

// Writes a format 1 file: a conductor track (120 BPM, 4/4) followed by one
// chunk per song track. Melody tracks are named "Melody".
std::vector<std::uint8_t> write_midi(const Song& song);

}  // namespace bcn
