#include "bcn/error.hpp"

namespace bcn {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::BadFormat: return "BadFormat";
    case Errc::MalformedMidi: return "MalformedMidi";
    case Errc::UnsupportedTimeSignature: return "UnsupportedTimeSignature";
    case Errc::NoMelodyTrack: return "NoMelodyTrack";
    case Errc::NoDrumTrack: return "NoDrumTrack";
    case Errc::Rejected: return "Rejected";
    case Errc::InvalidGrid: return "InvalidGrid";
    case Errc::NoteOutOfRange: return "NoteOutOfRange";
    case Errc::MalformedSequence: return "MalformedSequence";
    case Errc::UnknownToken: return "UnknownToken";
    case Errc::TargetTooSmall: return "TargetTooSmall";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::BinOutOfVocab: return "BinOutOfVocab";
    case Errc::IdOutOfVocab: return "IdOutOfVocab";
    case Errc::NonFinite: return "NonFinite";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::BarIndexOutOfRange: return "BarIndexOutOfRange";
    case Errc::BarCountMismatch: return "BarCountMismatch";
    case Errc::EmptyCodebook: return "EmptyCodebook";
    case Errc::DegenerateVocab: return "DegenerateVocab";
    case Errc::ZeroBars: return "ZeroBars";
    case Errc::ZeroDuration: return "ZeroDuration";
    case Errc::PairMismatch: return "PairMismatch";
    case Errc::MissingInput: return "MissingInput";
  }
  return "Unknown";
}

}  // namespace bcn
