#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "psybench/corpus.hpp"
#include "psybench/metrics.hpp"

namespace psybench {

/// Everything a corpus run reads besides the model.
struct PipelineInputs {
  std::vector<ISProfile> profiles;
  std::vector<MSCFrame> frames;
  TemplateSet templates;

  /// Loads is_profiles.jsonl, msc_frames.jsonl and templates/ from an asset dir.
  static PipelineInputs load(const std::filesystem::path& asset_dir);
};

struct PipelineConfig {
  std::size_t subset_size = 0;  // 0 = full grid
  std::uint64_t seed = 0;
  SynthesisOptions synthesis;
  std::size_t scoring_parallelism = 4;
  double dedup_threshold = kDefaultDedupThreshold;
  std::size_t quota_per_stratum = 1000;
  PairOptions pairs;
  double audit_fraction = 0.01;
  /// Arena ablations drop the arena's frames as well as its tag; false keeps
  /// the frames and removes only the tag.
  bool remove_arena_frames = true;
  std::size_t shard_size = 5000;
};

struct PipelineResult {
  std::vector<TraitVector> configs;
  SynthesisResult synthesis;            // raw samples, scorer fields filled in
  std::vector<std::string> diagnostics; // one JSONL line per scored sample
  std::size_t scorer_rejected = 0;
  std::size_t dedup_removed = 0;
  std::vector<StratumCount> coverage;
  std::vector<PersonaSample> corpus;    // final stratified corpus
  std::vector<PreferencePair> pairs;
  std::vector<PersonaSample> audit;
  MetricReport report;                  // over every synthesized sample
  std::string scorer_name;
};

/// synthesize -> score -> dedup -> stratify -> pairs -> audit, plus metrics.
PipelineResult run_pipeline(const PipelineInputs& inputs, const PipelineConfig& config,
                            Generator& generator, TraitScorer& scorer);

/// Writes shards/, manifest.json, pairs.jsonl, report.jsonl, report.txt,
/// diagnostics.jsonl and audit.jsonl. Output bytes depend only on the result
/// and config, never on wall-clock time.
void write_pipeline_outputs(const PipelineResult& result, const PipelineConfig& config,
                            const PipelineInputs& inputs, const std::filesystem::path& out_dir);

/// Reads every shard listed in a run directory's manifest.
std::vector<PersonaSample> load_corpus(const std::filesystem::path& run_dir);

}  // namespace psybench
