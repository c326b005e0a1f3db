#include <charconv>
#include <map>
#include <sstream>

#include "bcn/error.hpp"
#include "bcn/score_io.hpp"
#include "bcn/text.hpp"

namespace bcn {

std::string song_to_text(const Song& song) {
  std::ostringstream out;
  out << "SONG n_bars=" << song.n_bars << '\n';
  for (std::size_t i = 0; i < song.tracks.size(); ++i) {
    const Track& t = song.tracks[i];
    if (t.notes.empty()) {
      out << 'T' << i << ' ' << instrument_name(t.instrument) << '\n';
      continue;
    }
    for (const auto& n : t.notes) {
      out << 'T' << i << ' ' << instrument_name(t.instrument) << ' ' << n.onset << ' ' << n.pitch << ' '
          << n.duration << ' ' << n.velocity << '\n';
    }
  }
  return out.str();
}

Song song_from_text(std::string_view text) {
  auto lines = split_lines(text);
  if (lines.empty()) throw Error(Errc::BadFormat, "empty song text");
  auto header = split_ws(lines[0]);
  if (header.size() != 2 || header[0] != "SONG" || header[1].substr(0, 7) != "n_bars=") {
    throw Error(Errc::BadFormat, "expected 'SONG n_bars=<int>' header");
  }
  Song song;
  song.n_bars = parse_int(header[1].substr(7));
  std::map<int, Track> tracks;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    auto f = split_ws(lines[ln]);
    if (f.empty()) continue;
    if (f[0].size() < 2 || f[0][0] != 'T' || (f.size() != 2 && f.size() != 6)) {
      throw Error(Errc::BadFormat, "bad note line " + std::to_string(ln + 1));
    }
    int idx = parse_int(f[0].substr(1));
    auto inst = instrument_from_name(f[1]);
    if (!inst) throw Error(Errc::BadFormat, "unknown instrument '" + std::string(f[1]) + "'");
    auto it = tracks.find(idx);
    if (it == tracks.end()) {
      it = tracks.emplace(idx, make_track(*inst)).first;
    } else if (it->second.instrument != *inst) {
      throw Error(Errc::BadFormat, "track " + std::to_string(idx) + " changes instrument");
    }
    if (f.size() == 6) {
      it->second.notes.push_back(Note{parse_int(f[3]), parse_int(f[2]), parse_int(f[4]), parse_int(f[5])});
    }
  }
  int expect = 0;
  for (auto& [idx, t] : tracks) {
    if (idx != expect++) throw Error(Errc::BadFormat, "track indices must be dense");
    song.tracks.push_back(std::move(t));
  }
  return song;
}

}  // namespace bcn
