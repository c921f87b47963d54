#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psybench/metrics.hpp"
#include "psybench/pipeline.hpp"

namespace psybench {

// ---------------------------------------------------------------------------
// Ablations
// ---------------------------------------------------------------------------

enum class AblationBlock { Full, IS, MSC };

struct AblationSpec {
  AblationBlock block = AblationBlock::Full;
  std::optional<IsDomain> domain;  // set iff block == IS
  std::optional<Arena> arena;      // set iff block == MSC

  static AblationSpec full() { return {}; }
  static AblationSpec remove(IsDomain d) { return {AblationBlock::IS, d, std::nullopt}; }
  static AblationSpec remove(Arena a) { return {AblationBlock::MSC, std::nullopt, a}; }

  /// Accepts "full"/"none", an IS key or label ("socctx", "Socioeconomic
  /// Context") or an arena name or label, case-insensitively. Throws
  /// UnknownComponentError otherwise.
  static AblationSpec parse(std::string_view name);

  /// "Full", the IS domain label, or the arena label.
  std::string label() const;
  std::string_view block_name() const noexcept;  // "Full", "IS", "MSC"
};

/// The pipeline config with the spec's component removed.
PipelineConfig ablated_config(const AblationSpec& spec, const PipelineConfig& base);

/// Runs the whole pipeline under the ablation; Full is the unmodified run.
PipelineResult run_ablation_pipeline(const AblationSpec& spec, const PipelineInputs& inputs,
                                     const PipelineConfig& base, Generator& generator,
                                     TraitScorer& scorer);

MetricReport run_ablation(const AblationSpec& spec, const PipelineInputs& inputs,
                          const PipelineConfig& base, Generator& generator, TraitScorer& scorer);

struct AblationSeries {
  std::vector<std::uint64_t> seeds;
  std::vector<MetricReport> reports;
  RunSummary summary;
};

/// One ablation run per seed (each seed also draws its own config subset).
AblationSeries run_ablation_seeds(const AblationSpec& spec, const PipelineInputs& inputs,
                                  const PipelineConfig& base, std::span<const std::uint64_t> seeds,
                                  Generator& generator, TraitScorer& scorer);

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

enum class TableShape { ModelCompare, SftDpo, Ablation };

std::string_view table_shape_name(TableShape s) noexcept;  // "model_compare", ...
std::optional<TableShape> parse_table_shape(std::string_view name);

/// One labeled result. `group` is the model group for model_compare, the base
/// model for sft_dpo, and "Full", "IS" or "MSC" for ablation.
struct TableRow {
  std::string group;
  std::string label;
  MetricReport metrics;
};

struct TableLine {
  std::string group;
  std::string label;
  MetricReport metrics;
  std::optional<double> delta;
};

struct BlockStat {
  std::string block;
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
};

struct Table {
  TableShape shape = TableShape::ModelCompare;
  std::vector<TableLine> lines;
  std::vector<BlockStat> blocks;  // ablation only: drop statistics per block

  /// Aligned plain text, two decimals, fixed column order.
  std::string text() const;
  /// One JSON object per line, then one per block statistic.
  std::string jsonl() const;
};

/// sft_dpo needs a "Baseline" row per group; ablation needs a "Full" row.
/// Throws MissingRowError otherwise.
Table emit_table(std::span<const TableRow> rows, TableShape shape);

double median(std::vector<double> values);

/// Reads rows written by Table::jsonl or by MetricReport lines carrying
/// "group"/"label" fields.
std::vector<TableRow> parse_table_rows(std::string_view jsonl);

// ---------------------------------------------------------------------------
// Published reference tables
// ---------------------------------------------------------------------------

struct FixtureRow {
  std::string group;
  std::string label;
  std::optional<double> rmse5;
  std::optional<double> mae5;
  std::optional<double> profile_acc;
  std::optional<double> cosine;
  std::optional<double> stated_delta;
};

struct StatedBlockSummary {
  std::string block;
  double mean = 0.0;
  double median = 0.0;
};

/// Reference tables loaded from a checksummed JSON file.
class TableFixture {
 public:
  /// Throws SchemaError when the stored sha256 does not match the tables.
  static TableFixture load(const std::filesystem::path& path);

  const std::string& sha256() const noexcept { return sha256_; }
  const std::vector<FixtureRow>& model_compare() const noexcept { return model_compare_; }
  const std::vector<FixtureRow>& sft_dpo() const noexcept { return sft_dpo_; }
  const std::vector<FixtureRow>& ablation() const noexcept { return ablation_; }
  const std::vector<StatedBlockSummary>& block_summaries() const noexcept { return block_summaries_; }
  /// with-minus-without gains quoted alongside the model comparison.
  const std::vector<FixtureRow>& stated_gains() const noexcept { return gains_; }

  /// Rows in emit_table form for one table.
  std::vector<TableRow> rows(TableShape shape) const;

  /// Builds a fixture from already-parsed rows (used for corruption tests).
  static TableFixture from_rows(std::vector<FixtureRow> model_compare, std::vector<FixtureRow> sft_dpo,
                                std::vector<FixtureRow> ablation);

 private:
  std::string sha256_;
  std::vector<FixtureRow> model_compare_;
  std::vector<FixtureRow> sft_dpo_;
  std::vector<FixtureRow> ablation_;
  std::vector<StatedBlockSummary> block_summaries_;
  std::vector<FixtureRow> gains_;
};

std::filesystem::path default_fixture_path();

struct FixtureViolation {
  std::string table;
  std::string row;
  std::string check;
  double expected = 0.0;
  double actual = 0.0;
};

struct FixtureTolerances {
  double identity = 0.015;    // MAE5 + ProfileAcc = 100 under display rounding
  double delta = 0.01;        // recomputed vs stated deltas
  double block_summary = 0.05; // stated block means/medians are quoted to one decimal
};

/// Every identity and delta inconsistency found in the fixture.
std::vector<FixtureViolation> verify_fixtures(const TableFixture& fixture,
                                              const FixtureTolerances& tol = {});

}  // namespace psybench
