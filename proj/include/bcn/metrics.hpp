#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcn/song.hpp"

namespace bcn {

// Songs are compared bar by bar over the first min(ref.n_bars, cov.n_bars)
// bars; both must be at 48 ticks per quarter. ZeroBars when nothing overlaps.

// RMSE of per-bar onset counts (all tracks) over max(1, max reference count).
double note_density_error(const Song& ref, const Song& cov);

enum class OverlapElement { Pitch, Duration, Velocity };
// Mean over bars of sum(min(p, q)) for normalized per-bar histograms. Pitch
// and velocity skip drum tracks. Both bars empty -> 1, one empty -> 0.
double overlap_area(const Song& ref, const Song& cov, OverlapElement element);

// Mean per-bar cosine of 12-d pitch-class onset counts (no drums).
double chroma_similarity(const Song& ref, const Song& cov);
// Mean per-bar cosine of 16-d binary onset grids (all tracks).
double grooving_similarity(const Song& ref, const Song& cov);
// Fraction of beats whose detected chords are equal.
double chord_accuracy(const Song& ref, const Song& cov);
// Mean |SSM_ref - SSM_cov| over bar self-similarity matrices of chroma vectors.
double ssm_distance(const Song& ref, const Song& cov);

// Cosine with both-zero -> 1 and one-zero -> 0.
double safe_cosine(std::span<const double> a, std::span<const double> b);

struct SpeedReport {
  double tok_per_sec = 0;
  double note_per_sec = 0;
};
SpeedReport speed_report(long long token_count, long long note_count, double wall_seconds);

struct MetricsReport {
  double nde = 0, oap = 1, oad = 1, oav = 1, ccs = 1, gcs = 1, ca = 1, ssmd = 0;
  double tok_per_sec = 0, note_per_sec = 0;
  int n_bars_compared = 0;
  bool truncated = false;  // bar counts differed
};

MetricsReport evaluate_pair(const Song& ref, const Song& cov, std::optional<SpeedReport> timing = std::nullopt);
// Field-wise mean; n_bars_compared is summed. EmptyCorpus on no reports.
MetricsReport mean_report(std::span<const MetricsReport> reports);

// "key = value" lines.
std::string report_to_text(const MetricsReport& r);
std::string report_csv_header();
std::string report_csv_row(const std::string& name, const MetricsReport& r);

}  // namespace bcn
