#include "psybench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "psybench/errors.hpp"
#include "psybench/util.hpp"

namespace psybench {

double mae5(const TraitVector& p, const TraitVector& t) {
  double s = 0.0;
  for (std::size_t k = 0; k < kTraitCount; ++k) s += std::abs(p[k] - t[k]);
  return s / 5.0;
}

double rmse5(const TraitVector& p, const TraitVector& t) {
  double s = 0.0;
  for (std::size_t k = 0; k < kTraitCount; ++k) {
    const double d = p[k] - t[k];
    s += d * d;
  }
  return std::sqrt(s / 5.0);
}

double cosine(std::span<const double, kTraitCount> p, std::span<const double, kTraitCount> t) {
  double dot = 0.0, pp = 0.0, tt = 0.0;
  for (std::size_t k = 0; k < kTraitCount; ++k) {
    dot += p[k] * t[k];
    pp += p[k] * p[k];
    tt += t[k] * t[k];
  }
  if (pp == 0.0 || tt == 0.0) throw ZeroVectorError();
  const double c = dot / (std::sqrt(pp) * std::sqrt(tt));
  return std::clamp(c, -1.0, 1.0);
}

double cosine(const TraitVector& p, const TraitVector& t) {
  return cosine(std::span<const double, kTraitCount>(p.values()),
                std::span<const double, kTraitCount>(t.values()));
}

double profile_acc(const TraitVector& p, const TraitVector& t) { return 100.0 - mae5(p, t); }

double delta_profile_acc(double variant, double reference, DeltaConvention convention) {
  for (double v : {variant, reference}) {
    if (!(v >= 0.0 && v <= 100.0)) {
      throw std::domain_error("ProfileAcc outside [0,100]: " + format_number(v));
    }
  }
  return convention == DeltaConvention::ImprovementVsBaseline ? variant - reference
                                                              : reference - variant;
}

MetricReport score_pair(const TraitVector& p, const TraitVector& t) {
  MetricReport r;
  r.cosine = cosine(p, t);
  r.mae5 = mae5(p, t);
  r.rmse5 = rmse5(p, t);
  r.profile_acc = 100.0 - r.mae5;
  r.n_scored = 1;
  return r;
}

MetricReport evaluate(std::span<const ScoredItem> items) {
  MetricReport r;
  double mae = 0.0, rmse = 0.0, cos = 0.0;
  for (const auto& item : items) {
    if (!item.prediction) {
      ++r.n_omitted;
      continue;
    }
    MetricReport one;
    try {
      one = score_pair(*item.prediction, item.target);
    } catch (const ZeroVectorError&) {
      ++r.n_omitted;
      continue;
    }
    mae += one.mae5;
    rmse += one.rmse5;
    cos += one.cosine;
    ++r.n_scored;
  }
  if (r.n_scored > 0) {
    const double n = static_cast<double>(r.n_scored);
    r.mae5 = mae / n;
    r.rmse5 = rmse / n;
    r.cosine = cos / n;
    r.profile_acc = 100.0 - r.mae5;
  }
  return r;
}

namespace {

MetricStat stat_of(std::span<const MetricReport> reports, double MetricReport::*field,
                   StdKind kind) {
  const double n = static_cast<double>(reports.size());
  double mean = 0.0;
  for (const auto& r : reports) mean += r.*field;
  mean /= n;
  double ss = 0.0;
  for (const auto& r : reports) {
    const double d = r.*field - mean;
    ss += d * d;
  }
  double var = 0.0;
  if (kind == StdKind::Population) {
    var = ss / n;
  } else if (reports.size() > 1) {
    var = ss / (n - 1.0);
  }
  return {mean, std::sqrt(var)};
}

const char* std_kind_name(StdKind k) { return k == StdKind::Sample ? "sample" : "population"; }

}  // namespace

RunSummary aggregate_runs(std::span<const MetricReport> reports, StdKind kind) {
  if (reports.empty()) throw EmptyInputError("aggregate_runs needs at least one report");
  RunSummary s;
  s.runs = reports.size();
  s.std_kind = kind;
  s.mae5 = stat_of(reports, &MetricReport::mae5, kind);
  s.rmse5 = stat_of(reports, &MetricReport::rmse5, kind);
  s.profile_acc = stat_of(reports, &MetricReport::profile_acc, kind);
  s.cosine = stat_of(reports, &MetricReport::cosine, kind);
  for (const auto& r : reports) {
    s.n_scored += r.n_scored;
    s.n_omitted += r.n_omitted;
  }
  return s;
}

std::string to_json_line(const MetricReport& r) {
  nlohmann::json j = {{"rmse5", r.rmse5},       {"mae5", r.mae5},
                      {"profile_acc", r.profile_acc}, {"cosine", r.cosine},
                      {"n_scored", r.n_scored}, {"n_omitted", r.n_omitted}};
  return j.dump();
}

MetricReport parse_metric_report(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  MetricReport r;
  r.rmse5 = j.at("rmse5").get<double>();
  r.mae5 = j.at("mae5").get<double>();
  r.profile_acc = j.at("profile_acc").get<double>();
  r.cosine = j.at("cosine").get<double>();
  r.n_scored = j.value("n_scored", std::size_t{0});
  r.n_omitted = j.value("n_omitted", std::size_t{0});
  return r;
}

std::string to_json_line(const RunSummary& s) {
  auto stat = [](const MetricStat& m) { return nlohmann::json{{"mean", m.mean}, {"std", m.std}}; };
  nlohmann::json j = {{"rmse5", stat(s.rmse5)},
                      {"mae5", stat(s.mae5)},
                      {"profile_acc", stat(s.profile_acc)},
                      {"cosine", stat(s.cosine)},
                      {"runs", s.runs},
                      {"n_scored", s.n_scored},
                      {"n_omitted", s.n_omitted},
                      {"std_kind", std_kind_name(s.std_kind)}};
  return j.dump();
}

namespace {

std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}
std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace

std::string format_metric_table(std::span<const std::pair<std::string, MetricReport>> rows) {
  std::size_t label_w = 5;
  for (const auto& [label, _] : rows) label_w = std::max(label_w, label.size());
  std::ostringstream out;
  out << pad_right("Label", label_w) << "  " << pad_left("RMSE5", 8) << "  " << pad_left("MAE5", 8)
      << "  " << pad_left("ProfileAcc", 10) << "  " << pad_left("cos", 6) << '\n';
  for (const auto& [label, r] : rows) {
    out << pad_right(label, label_w) << "  " << pad_left(format_fixed(r.rmse5, 2), 8) << "  "
        << pad_left(format_fixed(r.mae5, 2), 8) << "  "
        << pad_left(format_fixed(r.profile_acc, 2), 10) << "  "
        << pad_left(format_fixed(r.cosine, 2), 6) << '\n';
  }
  return out.str();
}

std::string format_run_summary(const RunSummary& s) {
  auto pm = [](const MetricStat& m) { return format_fixed(m.mean, 2) + " ± " + format_fixed(m.std, 2); };
  std::ostringstream out;
  out << "runs=" << s.runs << " (std: " << std_kind_name(s.std_kind) << ")\n"
      << "RMSE5       " << pm(s.rmse5) << '\n'
      << "MAE5        " << pm(s.mae5) << '\n'
      << "ProfileAcc  " << pm(s.profile_acc) << '\n'
      << "cos         " << pm(s.cosine) << '\n';
  return out.str();
}

}  // namespace psybench
