#include "psybench/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "json.hpp"
#include "psybench/errors.hpp"
#include "psybench/util.hpp"

namespace psybench {

using nlohmann::json;

PipelineInputs PipelineInputs::load(const std::filesystem::path& asset_dir) {
  PipelineInputs in;
  in.profiles = load_is_profiles(asset_dir / "samples" / "is_profiles.jsonl");
  in.frames = load_msc_frames(asset_dir / "samples" / "msc_frames.jsonl");
  in.templates = TemplateSet::load(asset_dir / "templates");
  return in;
}

namespace {

std::vector<TraitVector> pick_configs(const PipelineConfig& config) {
  auto grid = enumerate_grid();
  if (config.subset_size == 0) return grid;
  return subset_configs(grid, config.subset_size, config.seed);
}

std::vector<MSCFrame> frame_pool(const PipelineInputs& inputs, const PipelineConfig& config) {
  const auto removed = config.synthesis.prompt_options.removed_arena_tag;
  if (!removed || !config.remove_arena_frames) return inputs.frames;
  std::vector<MSCFrame> pool;
  for (const auto& f : inputs.frames) {
    if (f.arena() != *removed) pool.push_back(f);
  }
  return pool;
}

}  // namespace

PipelineResult run_pipeline(const PipelineInputs& inputs, const PipelineConfig& config,
                            Generator& generator, TraitScorer& scorer) {
  PipelineResult out;
  out.scorer_name = scorer.name();
  out.configs = pick_configs(config);
  const auto frames = frame_pool(inputs, config);

  SynthesisOptions synth = config.synthesis;
  synth.seed = mix_seed(config.seed, 1);
  out.synthesis =
      synthesize(inputs.profiles, frames, out.configs, inputs.templates, generator, synth);

  auto& samples = out.synthesis.samples;
  std::vector<std::string> diag(samples.size());
  std::vector<char> rejected(samples.size(), 0);
  parallel_for(samples.size(), config.scoring_parallelism, [&](std::size_t i) {
    PersonaSample& s = samples[i];
    try {
      ScorerOutput so = score_sample(s, scorer);
      s.scorer_traits = so.traits;
      s.scorer_confidence = so.confidence;
      for (const auto& note : so.diagnostic.per_trait_notes) s.diagnostics.push_back(note);
      diag[i] = diagnostic_json_line(s.sample_id, so.diagnostic);
    } catch (const ScorerUnparsableError& e) {
      rejected[i] = 1;
      s.diagnostics.push_back(std::string("scorer: ") + e.what());
      MappingDiagnostic d;
      d.kind = MappingKind::Unparsable;
      d.per_trait_notes.push_back(e.what());
      diag[i] = diagnostic_json_line(s.sample_id, d);
    }
  });
  out.diagnostics = std::move(diag);

  std::vector<ScoredItem> items;
  items.reserve(samples.size());
  std::vector<PersonaSample> scored;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    items.push_back(ScoredItem{samples[i].scorer_traits, samples[i].target});
    if (rejected[i]) {
      ++out.scorer_rejected;
    } else {
      scored.push_back(samples[i]);
    }
  }
  out.report = evaluate(items);
  out.report.n_omitted += out.synthesis.failures.size();

  DedupResult dd = dedup(scored, config.dedup_threshold);
  out.dedup_removed = dd.removed.size();

  StratifiedResult strat = stratified_sample(dd.kept, config.quota_per_stratum, mix_seed(config.seed, 2));
  out.coverage = std::move(strat.coverage);
  out.corpus = std::move(strat.selected);

  out.pairs = build_pairs(out.corpus, config.pairs);
  out.audit = audit_slice(out.corpus, config.audit_fraction, mix_seed(config.seed, 3));
  return out;
}

namespace {

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) {
    text += l;
    text += '\n';
  }
  write_file(path, text);
}

std::string shard_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "shard-%05zu.jsonl", i);
  return buf;
}

}  // namespace

void write_pipeline_outputs(const PipelineResult& result, const PipelineConfig& config,
                            const PipelineInputs& inputs, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "shards");
  const std::size_t shard_size = std::max<std::size_t>(1, config.shard_size);

  json shards = json::array();
  for (std::size_t start = 0, k = 0; start < result.corpus.size() || k == 0; start += shard_size, ++k) {
    std::vector<std::string> lines;
    const std::size_t end = std::min(result.corpus.size(), start + shard_size);
    for (std::size_t i = start; i < end; ++i) lines.push_back(to_json_line(result.corpus[i]));
    const std::string name = shard_name(k);
    write_lines(out_dir / "shards" / name, lines);
    shards.push_back({{"file", "shards/" + name}, {"count", end - start}});
    if (end >= result.corpus.size()) break;
  }

  json strata = json::array();
  for (const auto& c : result.coverage) {
    strata.push_back({{"arena", arena_name(c.arena)},
                      {"emphasis", is_domain_key(c.emphasis)},
                      {"available", c.available},
                      {"selected", c.selected}});
  }
  json families = json::array();
  for (TaskFamily f : config.synthesis.families) families.push_back(task_family_name(f));
  const auto& po = config.synthesis.prompt_options;
  const auto& preset = config.synthesis.preset;

  json manifest = {
      {"manifest_version", 1},
      {"schema_version", kSchemaVersion},
      {"prompt_format_version", kPromptFormatVersion},
      {"seed", config.seed},
      {"subset_size", config.subset_size},
      {"plan",
       {{"configs", result.synthesis.plan.configs},
        {"replicates", result.synthesis.plan.replicates},
        {"slots", result.synthesis.plan.slots()},
        {"task_families", families},
        {"family_multiplicity", result.synthesis.plan.families},
        {"raw_samples", result.synthesis.plan.samples()}}},
      {"generation",
       {{"model", config.synthesis.model},
        {"preset", preset_name(preset.name)},
        {"temperature", preset.temperature},
        {"top_p", preset.top_p},
        {"max_new_tokens", preset.max_new_tokens},
        {"failures", result.synthesis.failures.size()}}},
      {"ablation",
       {{"removed_domain", po.removed_domain ? json(is_domain_key(*po.removed_domain)) : json(nullptr)},
        {"removed_arena", po.removed_arena_tag ? json(arena_name(*po.removed_arena_tag)) : json(nullptr)},
        {"remove_arena_frames", config.remove_arena_frames}}},
      {"scorer", {{"name", result.scorer_name}, {"rejected", result.scorer_rejected}}},
      {"dedup",
       {{"method", "char-5gram-jaccard"},
        {"threshold", config.dedup_threshold},
        {"input", result.synthesis.samples.size() - result.scorer_rejected},
        {"removed", result.dedup_removed}}},
      {"stratification", {{"quota_per_stratum", config.quota_per_stratum}, {"strata", strata}}},
      {"pairs",
       {{"count", result.pairs.size()},
        {"margin_min", config.pairs.margin_min},
        {"confidence_min", config.pairs.confidence_min},
        {"norm_penalty", static_cast<bool>(config.pairs.norm_penalty)}}},
      {"audit", {{"fraction", config.audit_fraction}, {"count", result.audit.size()}}},
      {"corpus_size", result.corpus.size()},
      {"shards", shards},
      {"template_checksums", inputs.templates.checksums()}};
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  std::vector<std::string> pair_lines;
  for (const auto& p : result.pairs) pair_lines.push_back(to_json_line(p));
  write_lines(out_dir / "pairs.jsonl", pair_lines);

  std::vector<std::string> audit_lines;
  for (const auto& s : result.audit) audit_lines.push_back(to_json_line(s));
  write_lines(out_dir / "audit.jsonl", audit_lines);

  write_lines(out_dir / "diagnostics.jsonl", result.diagnostics);
  write_lines(out_dir / "report.jsonl", {to_json_line(result.report)});
  const std::vector<std::pair<std::string, MetricReport>> rows = {{config.synthesis.model, result.report}};
  write_file(out_dir / "report.txt", format_metric_table(rows));
}

std::vector<PersonaSample> load_corpus(const std::filesystem::path& run_dir) {
  const auto manifest = json::parse(read_file(run_dir / "manifest.json"));
  std::vector<PersonaSample> out;
  for (const auto& shard : manifest.at("shards")) {
    const auto path = run_dir / shard.at("file").get<std::string>();
    for (const auto& line : read_lines(path)) {
      if (!line.empty()) out.push_back(parse_persona_sample(line));
    }
  }
  return out;
}

}  // namespace psybench
