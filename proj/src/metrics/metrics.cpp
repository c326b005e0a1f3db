#include "bcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "bcn/error.hpp"
#include "bcn/features.hpp"
#include "bcn/score_io.hpp"
#include "bcn/vocab.hpp"

namespace bcn {

namespace {

constexpr int kGrooveSlots = 16;
constexpr int kGrooveStep = kTicksPerBar / kGrooveSlots;

struct Pair {
  Song ref;
  Song cov;
  int n_bars;
};

Pair align(const Song& ref, const Song& cov) {
  if (ref.resolution != kTicksPerQuarter || cov.resolution != kTicksPerQuarter) {
    throw Error(Errc::InvalidArgument, "metrics need songs at 48 ticks per quarter");
  }
  const int n = std::min(ref.n_bars, cov.n_bars);
  if (n <= 0) throw Error(Errc::ZeroBars, "no bars to compare");
  return {slice_bars(ref, 0, n), slice_bars(cov, 0, n), n};
}

template <class F>
void for_each_note(const Song& s, bool skip_drums, F&& f) {
  for (const auto& t : s.tracks) {
    if (skip_drums && t.is_drum()) continue;
    for (const auto& n : t.notes) f(n.onset / kTicksPerBar, n, t);
  }
}

// Per-bar histograms of `dims` bins.
std::vector<std::vector<double>> bar_hist(const Song& s, int n_bars, int dims, bool skip_drums,
                                          int (*bin)(const Note&)) {
  std::vector<std::vector<double>> h(static_cast<std::size_t>(n_bars), std::vector<double>(dims, 0.0));
  for_each_note(s, skip_drums, [&](int bar, const Note& n, const Track&) {
    h[static_cast<std::size_t>(bar)][static_cast<std::size_t>(bin(n))] += 1.0;
  });
  return h;
}

int pitch_bin(const Note& n) { return std::clamp(n.pitch, 0, 127); }
int velocity_bin_of(const Note& n) { return velocity_bin(n.velocity); }
int duration_bin(const Note& n) {
  static const std::vector<int> mesh = default_duration_mesh();
  int snapped = snap_duration(n.duration, mesh);
  return static_cast<int>(std::lower_bound(mesh.begin(), mesh.end(), snapped) - mesh.begin());
}
int chroma_bin(const Note& n) { return n.pitch % 12; }
int groove_bin(const Note& n) { return (n.onset % kTicksPerBar) / kGrooveStep; }

double overlap(const std::vector<double>& p, const std::vector<double>& q) {
  double sp = 0, sq = 0;
  for (double v : p) sp += v;
  for (double v : q) sq += v;
  if (sp == 0 && sq == 0) return 1.0;
  if (sp == 0 || sq == 0) return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::min(p[i] * sq, q[i] * sp);
  return std::min(1.0, s / (sp * sq));
}

double mean_cosine(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += safe_cosine(a[i], b[i]);
  return s / static_cast<double>(a.size());
}

std::vector<std::vector<double>> ssm(const std::vector<std::vector<double>>& chroma) {
  const std::size_t n = chroma.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i][j] = safe_cosine(chroma[i], chroma[j]);
  }
  return m;
}

}  // namespace

double safe_cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 && bb == 0) return 1.0;
  if (aa == 0 || bb == 0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

double note_density_error(const Song& ref, const Song& cov) {
  Pair p = align(ref, cov);
  std::vector<double> dr(static_cast<std::size_t>(p.n_bars)), dc(dr.size());
  for_each_note(p.ref, false, [&](int bar, const Note&, const Track&) { dr[static_cast<std::size_t>(bar)] += 1; });
  for_each_note(p.cov, false, [&](int bar, const Note&, const Track&) { dc[static_cast<std::size_t>(bar)] += 1; });
  double se = 0, mx = 1;
  for (std::size_t b = 0; b < dr.size(); ++b) {
    se += (dr[b] - dc[b]) * (dr[b] - dc[b]);
    mx = std::max(mx, dr[b]);
  }
  return std::sqrt(se / static_cast<double>(dr.size())) / mx;
}

double overlap_area(const Song& ref, const Song& cov, OverlapElement element) {
  Pair p = align(ref, cov);
  int dims = 0;
  bool skip = true;
  int (*bin)(const Note&) = nullptr;
  switch (element) {
    case OverlapElement::Pitch: dims = 128; bin = pitch_bin; break;
    case OverlapElement::Duration: dims = static_cast<int>(default_duration_mesh().size()); bin = duration_bin; skip = false; break;
    case OverlapElement::Velocity: dims = kVelocityBins; bin = velocity_bin_of; break;
  }
  auto hr = bar_hist(p.ref, p.n_bars, dims, skip, bin);
  auto hc = bar_hist(p.cov, p.n_bars, dims, skip, bin);
  double s = 0;
  for (std::size_t b = 0; b < hr.size(); ++b) s += overlap(hr[b], hc[b]);
  return s / static_cast<double>(hr.size());
}

double chroma_similarity(const Song& ref, const Song& cov) {
  Pair p = align(ref, cov);
  return mean_cosine(bar_hist(p.ref, p.n_bars, 12, true, chroma_bin), bar_hist(p.cov, p.n_bars, 12, true, chroma_bin));
}

double grooving_similarity(const Song& ref, const Song& cov) {
  Pair p = align(ref, cov);
  auto binarize = [](std::vector<std::vector<double>> h) {
    for (auto& row : h) {
      for (double& v : row) v = v > 0 ? 1.0 : 0.0;
    }
    return h;
  };
  return mean_cosine(binarize(bar_hist(p.ref, p.n_bars, kGrooveSlots, false, groove_bin)),
                     binarize(bar_hist(p.cov, p.n_bars, kGrooveSlots, false, groove_bin)));
}

double chord_accuracy(const Song& ref, const Song& cov) {
  Pair p = align(ref, cov);
  auto cr = beat_chords(p.ref);
  auto cc = beat_chords(p.cov);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < cr.size(); ++i) hit += cr[i] == cc[i];
  return static_cast<double>(hit) / static_cast<double>(cr.size());
}

double ssm_distance(const Song& ref, const Song& cov) {
  Pair p = align(ref, cov);
  auto sr = ssm(bar_hist(p.ref, p.n_bars, 12, true, chroma_bin));
  auto sc = ssm(bar_hist(p.cov, p.n_bars, 12, true, chroma_bin));
  double s = 0;
  for (std::size_t i = 0; i < sr.size(); ++i) {
    for (std::size_t j = 0; j < sr.size(); ++j) s += std::abs(sr[i][j] - sc[i][j]);
  }
  return s / static_cast<double>(sr.size() * sr.size());
}

SpeedReport speed_report(long long token_count, long long note_count, double wall_seconds) {
  if (!(wall_seconds > 0)) throw Error(Errc::ZeroDuration, "wall time must be positive");
  return {static_cast<double>(token_count) / wall_seconds, static_cast<double>(note_count) / wall_seconds};
}

MetricsReport evaluate_pair(const Song& ref, const Song& cov, std::optional<SpeedReport> timing) {
  MetricsReport r;
  r.nde = note_density_error(ref, cov);
  r.oap = overlap_area(ref, cov, OverlapElement::Pitch);
  r.oad = overlap_area(ref, cov, OverlapElement::Duration);
  r.oav = overlap_area(ref, cov, OverlapElement::Velocity);
  r.ccs = chroma_similarity(ref, cov);
  r.gcs = grooving_similarity(ref, cov);
  r.ca = chord_accuracy(ref, cov);
  r.ssmd = ssm_distance(ref, cov);
  r.n_bars_compared = std::min(ref.n_bars, cov.n_bars);
  r.truncated = ref.n_bars != cov.n_bars;
  if (timing) {
    r.tok_per_sec = timing->tok_per_sec;
    r.note_per_sec = timing->note_per_sec;
  }
  return r;
}

MetricsReport mean_report(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw Error(Errc::EmptyCorpus, "no reports to average");
  MetricsReport m{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, false};
  for (const auto& r : reports) {
    m.nde += r.nde;
    m.oap += r.oap;
    m.oad += r.oad;
    m.oav += r.oav;
    m.ccs += r.ccs;
    m.gcs += r.gcs;
    m.ca += r.ca;
    m.ssmd += r.ssmd;
    m.tok_per_sec += r.tok_per_sec;
    m.note_per_sec += r.note_per_sec;
    m.n_bars_compared += r.n_bars_compared;
    m.truncated = m.truncated || r.truncated;
  }
  const double n = static_cast<double>(reports.size());
  for (double* v : {&m.nde, &m.oap, &m.oad, &m.oav, &m.ccs, &m.gcs, &m.ca, &m.ssmd, &m.tok_per_sec, &m.note_per_sec}) {
    *v /= n;
  }
  return m;
}

std::string report_to_text(const MetricsReport& r) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "nde = " << r.nde << "\noap = " << r.oap << "\noad = " << r.oad << "\noav = " << r.oav << "\nccs = " << r.ccs
      << "\ngcs = " << r.gcs << "\nca = " << r.ca << "\nssmd = " << r.ssmd << "\ntok_per_sec = " << r.tok_per_sec
      << "\nnote_per_sec = " << r.note_per_sec << "\nn_bars_compared = " << r.n_bars_compared
      << "\ntruncated = " << (r.truncated ? 1 : 0) << '\n';
  return out.str();
}

std::string report_csv_header() {
  return "name,nde,oap,oad,oav,ccs,gcs,ca,ssmd,tok_per_sec,note_per_sec,n_bars_compared,truncated\n";
}

std::string report_csv_row(const std::string& name, const MetricsReport& r) {
  std::ostringstream out;
  out << std::setprecision(10) << name << ',' << r.nde << ',' << r.oap << ',' << r.oad << ',' << r.oav << ',' << r.ccs
      << ',' << r.gcs << ',' << r.ca << ',' << r.ssmd << ',' << r.tok_per_sec << ',' << r.note_per_sec << ','
      << r.n_bars_compared << ',' << (r.truncated ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace bcn
