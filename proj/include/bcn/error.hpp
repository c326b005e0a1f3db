#pragma once

#include <stdexcept>
#include <string>

namespace bcn {

enum class Errc {
  InvalidArgument,
  Io,
  BadFormat,
  MalformedMidi,
  UnsupportedTimeSignature,
  NoMelodyTrack,
  NoDrumTrack,
  Rejected,
  InvalidGrid,
  NoteOutOfRange,
  MalformedSequence,
  UnknownToken,
  TargetTooSmall,
  EmptyCorpus,
  BinOutOfVocab,
  IdOutOfVocab,
  NonFinite,
  ShapeMismatch,
  BarIndexOutOfRange,
  BarCountMismatch,
  EmptyCodebook,
  DegenerateVocab,
  ZeroBars,
  ZeroDuration,
  PairMismatch,
  MissingInput,
};

const char* errc_name(Errc code);

// Exception carried through the C++ core. The C API maps `code()` onto
// bcn_status values. `track()`/`index()` locate sequence errors (-1 otherwise).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, int track = -1, long index = -1)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code),
        track_(track),
        index_(index) {}

  Errc code() const noexcept { return code_; }
  int track() const noexcept { return track_; }
  long index() const noexcept { return index_; }

 private:
  Errc code_;
  int track_;
  long index_;
};

}  // namespace bcn
