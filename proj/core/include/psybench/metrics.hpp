#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psybench/schema.hpp"

namespace psybench {

/// Mean absolute error over the five traits, in percentile points.
double mae5(const TraitVector& p, const TraitVector& t);

/// Root mean squared error over the five traits, in percentile points.
double rmse5(const TraitVector& p, const TraitVector& t);

/// Directional agreement p.t / (|p| |t|). Throws ZeroVectorError if either norm is 0.
double cosine(std::span<const double, kTraitCount> p, std::span<const double, kTraitCount> t);
double cosine(const TraitVector& p, const TraitVector& t);

/// 100 - mae5(p, t).
double profile_acc(const TraitVector& p, const TraitVector& t);

enum class DeltaConvention { ImprovementVsBaseline, DropVsFull };

/// Improvement: variant - reference. Drop: reference - variant, so a bigger
/// positive value means a bigger loss relative to the full system.
double delta_profile_acc(double variant, double reference, DeltaConvention convention);

struct MetricReport {
  double mae5 = 0.0;
  double rmse5 = 0.0;
  double profile_acc = 0.0;
  double cosine = 0.0;
  std::size_t n_scored = 0;
  std::size_t n_omitted = 0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Metrics for one (p, t) pair. Throws ZeroVectorError when cosine is undefined.
MetricReport score_pair(const TraitVector& p, const TraitVector& t);

/// One evaluation item; `prediction` is empty when the output was unparsable.
struct ScoredItem {
  std::optional<TraitVector> prediction;
  TraitVector target;
};

/// Averages per-sample metrics over scorable items. Items with no prediction,
/// or a zero vector on either side, are omitted from all four metrics.
MetricReport evaluate(std::span<const ScoredItem> items);

enum class StdKind { Sample, Population };

struct MetricStat {
  double mean = 0.0;
  double std = 0.0;
};

struct RunSummary {
  MetricStat mae5;
  MetricStat rmse5;
  MetricStat profile_acc;
  MetricStat cosine;
  std::size_t runs = 0;
  std::size_t n_scored = 0;
  std::size_t n_omitted = 0;
  StdKind std_kind = StdKind::Sample;
};

/// Mean and standard deviation per metric. With StdKind::Sample a single run
/// reports std 0. Throws EmptyInputError on an empty sequence.
RunSummary aggregate_runs(std::span<const MetricReport> reports, StdKind kind = StdKind::Sample);

std::string to_json_line(const MetricReport& r);
std::string to_json_line(const RunSummary& s);
MetricReport parse_metric_report(std::string_view json_line);

/// Aligned text table: label, RMSE5, MAE5, ProfileAcc, cos; two decimals.
std::string format_metric_table(std::span<const std::pair<std::string, MetricReport>> rows);
std::string format_run_summary(const RunSummary& s);

}  // namespace psybench
