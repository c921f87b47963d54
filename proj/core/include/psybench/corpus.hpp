#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psybench/generation.hpp"
#include "psybench/prompting.hpp"
#include "psybench/scale_parser.hpp"
#include "psybench/schema.hpp"

namespace psybench {

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct ScorerOutput {
  TraitVector traits;  // already mapped into percentile space
  double confidence = 0.0;
  std::string rationale;
  MappingDiagnostic diagnostic;
};

/// g(.): estimates the Big Five profile expressed by a completion.
/// Implementations must be safe to call concurrently.
class TraitScorer {
 public:
  virtual ~TraitScorer() = default;
  /// Provenance label written into corpus manifests.
  virtual std::string name() const = 0;
  /// Throws ScorerUnparsableError when no complete estimate can be made.
  virtual ScorerOutput score(const PersonaSample& sample) = 0;
};

/// Offline scorer: reads explicit numeric trait mentions from the completion.
/// Confidence is 1.0, or 0.4 when the mapping had to clip or looked mixed-scale.
class LexiconScorer final : public TraitScorer {
 public:
  std::string name() const override { return "lexicon-stub/v1"; }
  ScorerOutput score(const PersonaSample& sample) override;
};

/// Asks a chat model to rate the completion using the trait_scoring preset
/// (temperature 0) and the "authoring/trait_scoring" template.
class LlmJudgeScorer final : public TraitScorer {
 public:
  LlmJudgeScorer(Generator& generator, const TemplateSet& templates, std::string model);
  std::string name() const override { return "llm-judge/v1:" + model_; }
  ScorerOutput score(const PersonaSample& sample) override;

 private:
  Generator* generator_;
  const TemplateSet* templates_;
  std::string model_;
};

/// Rejects empty completions, then delegates to the scorer.
ScorerOutput score_sample(const PersonaSample& sample, TraitScorer& scorer);

// ---------------------------------------------------------------------------
// Near-duplicate removal
// ---------------------------------------------------------------------------

inline constexpr double kDefaultDedupThreshold = 0.80;

/// Sorted, unique byte 5-grams packed into integers. Texts shorter than five
/// bytes yield one shingle for the whole text; the empty text yields none.
std::vector<std::uint64_t> char_shingles(std::string_view text);

/// Jaccard similarity of two shingle sets; two empty sets are identical.
double jaccard(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

/// Indices of texts kept by streaming dedup: a text is dropped when its
/// Jaccard similarity with an earlier kept text exceeds `threshold`.
std::vector<std::size_t> dedup_indices(std::span<const std::string> texts,
                                       double threshold = kDefaultDedupThreshold);

using SimilarityFn = std::function<double(std::string_view, std::string_view)>;

/// Same policy with a caller-supplied similarity (e.g. embedding cosine).
std::vector<std::size_t> dedup_indices_with(std::span<const std::string> texts, double threshold,
                                            const SimilarityFn& similarity);

struct DedupResult {
  std::vector<PersonaSample> kept;
  std::vector<PersonaSample> removed;
};

DedupResult dedup(std::span<const PersonaSample> samples, double threshold = kDefaultDedupThreshold);

// ---------------------------------------------------------------------------
// Stratified sampling and audit
// ---------------------------------------------------------------------------

struct StratumCount {
  Arena arena = Arena::Working;
  IsDomain emphasis = IsDomain::Edu;
  std::size_t available = 0;
  std::size_t selected = 0;
};

struct StratifiedResult {
  std::vector<PersonaSample> selected;
  std::vector<StratumCount> coverage;  // all arena x emphasis strata, empty ones included
};

/// Up to `quota` samples per (arena, IS emphasis) stratum, drawn uniformly
/// with a seeded generator. Output is grouped by stratum and keeps input
/// order within each stratum.
StratifiedResult stratified_sample(std::span<const PersonaSample> samples, std::size_t quota,
                                   std::uint64_t seed);

/// ceil(fraction * n) samples drawn uniformly without replacement.
std::vector<PersonaSample> audit_slice(std::span<const PersonaSample> samples, double fraction,
                                       std::uint64_t seed);

/// ceil(fraction * n), tolerant of binary rounding in fraction * n.
std::size_t audit_count(std::size_t n, double fraction);

// ---------------------------------------------------------------------------
// Preference pairs
// ---------------------------------------------------------------------------

struct PreferencePair {
  std::string prompt;
  std::string chosen;
  std::string rejected;
  double margin = 0.0;  // scorer distance(rejected) - distance(chosen)
  std::string chosen_id;
  std::string rejected_id;
};

struct PairOptions {
  double margin_min = 5.0;
  double confidence_min = 0.5;
  /// Optional extra distance for norm violations; unset means trait distance only.
  std::function<double(const PersonaSample&)> norm_penalty;
};

/// Groups scored samples by prompt (first-appearance order). Within a group the
/// completion closest to the target (scorer MAE5) is chosen and the farthest is
/// rejected; the pair is kept only if the margin is positive, at least
/// margin_min, and both confidences reach confidence_min.
std::vector<PreferencePair> build_pairs(std::span<const PersonaSample> samples,
                                        const PairOptions& options = {});

std::string to_json_line(const PreferencePair& p);
PreferencePair parse_preference_pair(std::string_view json_line);
std::vector<PreferencePair> load_preference_pairs(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

struct SynthesisPlan {
  std::size_t configs = 0;
  std::size_t replicates = 0;
  std::size_t families = 0;

  /// configs x replicates; 7,776 x 5 = 38,880 for the full grid.
  std::size_t slots() const noexcept { return configs * replicates; }
  std::size_t samples() const noexcept { return slots() * families; }
};

struct SynthesisOptions {
  std::size_t replicates = kMaxReplicates;
  std::vector<TaskFamily> families{kTaskFamilies.begin(), kTaskFamilies.end()};
  std::string model = "llama3_3_70B";
  DecodingPreset preset = corpus_synthesis_preset();
  std::uint64_t seed = 0;
  std::size_t parallelism = 4;
  PromptOptions prompt_options;
};

struct SynthesisFailure {
  std::string sample_id;
  std::string message;
};

struct SynthesisResult {
  SynthesisPlan plan;
  std::vector<PersonaSample> samples;  // plan order; failed slots absent
  std::vector<SynthesisFailure> failures;
};

/// Config k is paired with frame k mod |frames| and IS profile
/// (k / |frames|) mod |profiles|; its IS emphasis rotates over the domains
/// still present in the prompt. Every replicate of a (config, family) shares
/// one prompt and differs only in its sampling seed.
SynthesisResult synthesize(std::span<const ISProfile> profiles, std::span<const MSCFrame> frames,
                           std::span<const TraitVector> configs, const TemplateSet& templates,
                           Generator& generator, const SynthesisOptions& options);

/// Runs fn(i) for i in [0, n) on up to `parallelism` threads.
void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn);

}  // namespace psybench
