#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "bcn/error.hpp"
#include "bcn/features.hpp"
#include "bcn/text.hpp"

namespace bcn {

namespace {

constexpr double kDensityStep = 0.25;
constexpr double kMinDuration = 4.0;
constexpr double kMaxDuration = 384.0;

int floor_clamped(double x, int hi) {
  return static_cast<int>(std::clamp(std::floor(x), 0.0, static_cast<double>(hi)));
}

}  // namespace

std::string_view feature_name(Feature f) {
  switch (f) {
    case Feature::CT: return "ct";
    case Feature::DT: return "dt";
    case Feature::DD: return "dd";
    case Feature::ND: return "nd";
    case Feature::MP: return "mp";
    case Feature::MD: return "md";
    case Feature::MV: return "mv";
  }
  return "?";
}

RawFeatureGrid extract_raw_features(const Song& song) {
  RawFeatureGrid grid;
  grid.n_bars = song.n_bars;
  for (const auto& t : song.tracks) grid.instruments.push_back(t.instrument);
  grid.cells.resize(song.tracks.size() * static_cast<std::size_t>(std::max(0, song.n_bars)));

  const auto chords = beat_chords(song);
  const int bar_ticks = song.ticks_per_bar();
  for (std::size_t i = 0; i < song.tracks.size(); ++i) {
    const Track& t = song.tracks[i];
    std::vector<std::vector<const Note*>> per_bar(static_cast<std::size_t>(std::max(0, song.n_bars)));
    for (const auto& n : t.notes) {
      int bar = n.onset / bar_ticks;
      if (bar >= 0 && bar < song.n_bars) per_bar[static_cast<std::size_t>(bar)].push_back(&n);
    }
    for (int b = 0; b < song.n_bars; ++b) {
      RawBarFeatures& cell = grid.cells[i * song.n_bars + b];
      const auto& notes = per_bar[static_cast<std::size_t>(b)];
      cell.empty = notes.empty();
      const double count = static_cast<double>(notes.size());
      if (t.is_drum()) {
        std::set<int> keys;
        for (const Note* n : notes) keys.insert(n->pitch);
        cell.dt = static_cast<int>(keys.size());
        cell.dd = count / kBeatsPerBar;
        continue;
      }
      for (int k = 0; k < kBeatsPerBar; ++k) cell.ct[k] = chords[static_cast<std::size_t>(b * kBeatsPerBar + k)];
      cell.nd = count / kBeatsPerBar;
      if (!notes.empty()) {
        double sp = 0, sd = 0, sv = 0;
        for (const Note* n : notes) {
          sp += n->pitch;
          sd += n->duration;
          sv += n->velocity;
        }
        cell.mp = sp / count;
        cell.md = sd / count;
        cell.mv = sv / count;
      }
    }
  }
  return grid;
}

int quantize_feature(Feature f, double raw) {
  switch (f) {
    case Feature::DT: return std::clamp(static_cast<int>(raw), 0, 31);
    case Feature::DD: return floor_clamped(raw / kDensityStep, 49);
    case Feature::ND: return floor_clamped(raw / kDensityStep, 65);
    case Feature::MP: return floor_clamped((std::clamp(raw, 32.0, 99.0) - 32.0) / 2.0, 33);
    case Feature::MD: {
      double d = std::clamp(raw, kMinDuration, kMaxDuration);
      return floor_clamped(30.0 * std::log(d / kMinDuration) / std::log(kMaxDuration / kMinDuration), 29);
    }
    case Feature::MV: return floor_clamped(std::clamp(raw, 0.0, 135.0) / 4.0, 33);
    case Feature::CT: break;
  }
  throw Error(Errc::InvalidArgument, "chord types are not scalar features");
}

double bin_center(Feature f, int bin) {
  switch (f) {
    case Feature::DT: return bin;
    case Feature::DD:
    case Feature::ND: return (bin + 0.5) * kDensityStep;
    case Feature::MP: return 33.0 + 2.0 * bin;
    case Feature::MD: return kMinDuration * std::pow(kMaxDuration / kMinDuration, (bin + 0.5) / 30.0);
    case Feature::MV: return 4.0 * bin + 2.0;
    case Feature::CT: break;
  }
  throw Error(Errc::InvalidArgument, "chord types are not scalar features");
}

FeatureGrid quantize_features(const RawFeatureGrid& raw) {
  FeatureGrid grid;
  grid.instruments = raw.instruments;
  grid.n_bars = raw.n_bars;
  grid.entries.resize(raw.cells.size());
  for (std::size_t i = 0; i < raw.instruments.size(); ++i) {
    const bool drum = raw.instruments[i] == Instrument::Drum;
    for (int b = 0; b < raw.n_bars; ++b) {
      const RawBarFeatures& c = raw.at(i, static_cast<std::size_t>(b));
      ExpertFeatures e;
      e.dt = feature_sentinel(Feature::DT);
      e.dd = feature_sentinel(Feature::DD);
      e.nd = feature_sentinel(Feature::ND);
      e.mp = feature_sentinel(Feature::MP);
      e.md = feature_sentinel(Feature::MD);
      e.mv = feature_sentinel(Feature::MV);
      e.ct.fill(feature_sentinel(Feature::CT));
      if (drum) {
        if (!c.empty) {
          e.dt = quantize_feature(Feature::DT, c.dt);
          e.dd = quantize_feature(Feature::DD, c.dd);
        }
      } else {
        for (int k = 0; k < kBeatsPerBar; ++k) e.ct[k] = c.ct[k].index();
        if (!c.empty) {
          e.nd = quantize_feature(Feature::ND, c.nd);
          e.mp = quantize_feature(Feature::MP, c.mp);
          e.md = quantize_feature(Feature::MD, c.md);
          e.mv = quantize_feature(Feature::MV, c.mv);
        }
      }
      grid.entries[i * raw.n_bars + b] = e;
    }
  }
  return grid;
}

FeatureGrid extract_expert_features(const Song& song) { return quantize_features(extract_raw_features(song)); }

std::string features_to_text(const FeatureGrid& grid) {
  std::ostringstream out;
  out << "FGRID n_tracks=" << grid.n_tracks() << " n_bars=" << grid.n_bars << " instruments=";
  for (std::size_t i = 0; i < grid.instruments.size(); ++i) {
    out << (i ? "," : "") << instrument_name(grid.instruments[i]);
  }
  out << '\n';
  for (std::size_t i = 0; i < grid.n_tracks(); ++i) {
    for (int b = 0; b < grid.n_bars; ++b) {
      const ExpertFeatures& e = grid.at(i, static_cast<std::size_t>(b));
      out << "F " << i << ' ' << b << " dt=" << e.dt << " dd=" << e.dd << " nd=" << e.nd << " mp=" << e.mp
          << " md=" << e.md << " mv=" << e.mv << " ct=" << e.ct[0] << ',' << e.ct[1] << ',' << e.ct[2] << ','
          << e.ct[3];
      if (grid.has_vq()) {
        const VqCodes& v = grid.vq_entries[i * grid.n_bars + b];
        out << " vq=";
        for (int g = 0; g < kVqGroups; ++g) out << (g ? "," : "") << v[g];
      }
      out << '\n';
    }
  }
  return out.str();
}

FeatureGrid features_from_text(std::string_view text) {
  auto lines = split_lines(text);
  if (lines.empty()) throw Error(Errc::BadFormat, "empty feature text");
  auto head = split_ws(lines[0]);
  if (head.size() != 4 || head[0] != "FGRID") throw Error(Errc::BadFormat, "expected FGRID header");
  auto value_of = [](std::string_view kv, std::string_view key) {
    if (kv.substr(0, key.size()) != key || kv.size() <= key.size() || kv[key.size()] != '=') {
      throw Error(Errc::BadFormat, "expected key '" + std::string(key) + "'");
    }
    return kv.substr(key.size() + 1);
  };
  FeatureGrid grid;
  const int n_tracks = parse_int(value_of(head[1], "n_tracks"));
  grid.n_bars = parse_int(value_of(head[2], "n_bars"));
  auto inst_field = value_of(head[3], "instruments");
  if (n_tracks > 0) {
    for (auto name : split_char(inst_field, ',')) {
      auto inst = instrument_from_name(name);
      if (!inst) throw Error(Errc::BadFormat, "unknown instrument '" + std::string(name) + "'");
      grid.instruments.push_back(*inst);
    }
  }
  if (static_cast<int>(grid.instruments.size()) != n_tracks) throw Error(Errc::BadFormat, "instrument count");
  const std::size_t cells = static_cast<std::size_t>(n_tracks) * static_cast<std::size_t>(grid.n_bars);
  grid.entries.resize(cells);
  std::vector<char> seen(cells, 0);
  bool any_vq = false;
  std::vector<VqCodes> vq(cells);
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    auto f = split_ws(lines[ln]);
    if (f.empty()) continue;
    if (f[0] != "F" || (f.size() != 10 && f.size() != 11)) throw Error(Errc::BadFormat, "bad feature line");
    int i = parse_int(f[1]);
    int b = parse_int(f[2]);
    if (i < 0 || i >= n_tracks || b < 0 || b >= grid.n_bars) throw Error(Errc::BadFormat, "cell out of range");
    ExpertFeatures& e = grid.at(static_cast<std::size_t>(i), static_cast<std::size_t>(b));
    e.dt = parse_int(value_of(f[3], "dt"));
    e.dd = parse_int(value_of(f[4], "dd"));
    e.nd = parse_int(value_of(f[5], "nd"));
    e.mp = parse_int(value_of(f[6], "mp"));
    e.md = parse_int(value_of(f[7], "md"));
    e.mv = parse_int(value_of(f[8], "mv"));
    auto cts = split_char(value_of(f[9], "ct"), ',');
    if (cts.size() != 4) throw Error(Errc::BadFormat, "ct needs 4 values");
    for (int k = 0; k < 4; ++k) e.ct[k] = parse_int(cts[k]);
    const std::size_t cell = static_cast<std::size_t>(i) * grid.n_bars + b;
    if (f.size() == 11) {
      auto codes = split_char(value_of(f[10], "vq"), ',');
      if (codes.size() != kVqGroups) throw Error(Errc::BadFormat, "vq needs 8 values");
      for (int g = 0; g < kVqGroups; ++g) vq[cell][g] = parse_int(codes[g]);
      any_vq = true;
    }
    seen[cell] = 1;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw Error(Errc::BadFormat, "missing feature cells");
  if (any_vq) grid.vq_entries = std::move(vq);
  return grid;
}

}  // namespace bcn
