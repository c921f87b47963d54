#include "psybench/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "psybench/errors.hpp"
#include "psybench/metrics.hpp"
#include "psybench/util.hpp"

namespace psybench {

// --- scoring ----------------------------------------------------------------

namespace {

ScorerOutput scorer_output_from(const RawPrediction& raw, std::string rationale) {
  ScaleOutcome mapped = try_apply_scale(raw);
  if (!mapped.traits) {
    std::string missing;
    for (char c : raw.missing()) missing += c;
    throw ScorerUnparsableError("scorer could not read traits: " + missing);
  }
  ScorerOutput out{*mapped.traits, 1.0, std::move(rationale), std::move(mapped.diagnostic)};
  const auto& notes = out.diagnostic.per_trait_notes;
  const bool mixed = std::find(notes.begin(), notes.end(), "mixed-scale suspicion") != notes.end();
  if (out.diagnostic.kind == MappingKind::UnknownPercentileClipped || mixed) out.confidence = 0.4;
  return out;
}

std::optional<double> read_confidence(std::string_view text) {
  const std::string lower = to_lower(text);
  const auto pos = lower.rfind("confidence");
  if (pos == std::string::npos) return std::nullopt;
  std::size_t j = pos + 10;
  while (j < text.size() && (text[j] == ' ' || text[j] == ':' || text[j] == '=')) ++j;
  double v = 0.0;
  auto res = std::from_chars(text.data() + j, text.data() + text.size(), v);
  if (res.ec != std::errc{}) return std::nullopt;
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

ScorerOutput LexiconScorer::score(const PersonaSample& sample) {
  return scorer_output_from(extract_raw_traits(sample.completion), "explicit trait mentions");
}

LlmJudgeScorer::LlmJudgeScorer(Generator& generator, const TemplateSet& templates, std::string model)
    : generator_(&generator), templates_(&templates), model_(std::move(model)) {}

ScorerOutput LlmJudgeScorer::score(const PersonaSample& sample) {
  const std::string prompt = render_template(templates_->get("authoring/trait_scoring").text,
                                             {{"completion", sample.completion}});
  const DecodingPreset preset = trait_scoring_preset();
  GenerationRecord rec;
  try {
    rec = generator_->generate(std::string_view(prompt), preset, model_, 0);
  } catch (const TransportError& e) {
    throw ScorerUnparsableError(std::string("judge request failed: ") + e.what());
  }
  ScorerOutput out = scorer_output_from(extract_raw_traits(rec.response), rec.response);
  if (auto c = read_confidence(rec.response)) {
    out.confidence = std::min(out.confidence, *c);
  } else {
    out.diagnostic.per_trait_notes.push_back("confidence not reported");
  }
  return out;
}

ScorerOutput score_sample(const PersonaSample& sample, TraitScorer& scorer) {
  if (sample.completion.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ScorerUnparsableError("empty completion");
  }
  return scorer.score(sample);
}

// --- dedup ------------------------------------------------------------------

std::vector<std::uint64_t> char_shingles(std::string_view text) {
  constexpr std::size_t kN = 5;
  auto pack = [](std::string_view s) {
    std::uint64_t v = static_cast<std::uint64_t>(s.size()) << 40;
    for (std::size_t i = 0; i < s.size(); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    }
    return v;
  };
  std::vector<std::uint64_t> out;
  if (text.empty()) return out;
  if (text.size() < kN) {
    out.push_back(pack(text));
    return out;
  }
  out.reserve(text.size() - kN + 1);
  for (std::size_t i = 0; i + kN <= text.size(); ++i) out.push_back(pack(text.substr(i, kN)));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double jaccard(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++inter, ++i, ++j;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

std::vector<std::size_t> dedup_indices(std::span<const std::string> texts, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("dedup threshold must be in [0,1]");
  }
  std::vector<std::size_t> kept;
  std::vector<std::size_t> kept_sizes;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> postings;
  std::vector<std::uint32_t> overlap;  // per kept text, reset via `touched`
  std::vector<std::uint32_t> touched;
  bool have_empty = false;

  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto shingles = char_shingles(texts[i]);
    bool duplicate = false;
    if (shingles.empty()) {
      duplicate = have_empty;  // jaccard(empty, empty) = 1
    } else {
      for (std::uint64_t s : shingles) {
        auto it = postings.find(s);
        if (it == postings.end()) continue;
        for (std::uint32_t k : it->second) {
          if (overlap[k]++ == 0) touched.push_back(k);
        }
      }
      for (std::uint32_t k : touched) {
        const std::size_t inter = overlap[k];
        const double sim = static_cast<double>(inter) /
                           static_cast<double>(shingles.size() + kept_sizes[k] - inter);
        if (sim > threshold) duplicate = true;
        overlap[k] = 0;
      }
      touched.clear();
    }
    if (duplicate) continue;
    const auto slot = static_cast<std::uint32_t>(kept.size());
    kept.push_back(i);
    kept_sizes.push_back(shingles.size());
    overlap.push_back(0);
    if (shingles.empty()) have_empty = true;
    for (std::uint64_t s : shingles) postings[s].push_back(slot);
  }
  return kept;
}

std::vector<std::size_t> dedup_indices_with(std::span<const std::string> texts, double threshold,
                                            const SimilarityFn& similarity) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return similarity(texts[k], texts[i]) > threshold;
    });
    if (!duplicate) kept.push_back(i);
  }
  return kept;
}

DedupResult dedup(std::span<const PersonaSample> samples, double threshold) {
  std::vector<std::string> texts;
  texts.reserve(samples.size());
  for (const auto& s : samples) texts.push_back(s.completion);
  const auto kept_idx = dedup_indices(texts, threshold);
  DedupResult out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (next < kept_idx.size() && kept_idx[next] == i) {
      out.kept.push_back(samples[i]);
      ++next;
    } else {
      out.removed.push_back(samples[i]);
    }
  }
  return out;
}

// --- stratification ---------------------------------------------------------

namespace {

// First k entries of a seeded partial Fisher-Yates shuffle of `items`.
std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> items, std::size_t k,
                                                  Rng& rng) {
  k = std::min(k, items.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, items.size() - i));
    std::swap(items[i], items[j]);
  }
  items.resize(k);
  return items;
}

}  // namespace

StratifiedResult stratified_sample(std::span<const PersonaSample> samples, std::size_t quota,
                                   std::uint64_t seed) {
  if (quota < 1) throw std::invalid_argument("quota_per_stratum must be >= 1");
  constexpr std::size_t kStrata = kArenas.size() * kIsDomains.size();
  std::array<std::vector<std::size_t>, kStrata> members;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t s = static_cast<std::size_t>(samples[i].arena) * kIsDomains.size() +
                          static_cast<std::size_t>(samples[i].emphasis);
    members[s].push_back(i);
  }
  StratifiedResult out;
  for (std::size_t s = 0; s < kStrata; ++s) {
    Rng rng(mix_seed(seed, s));
    auto picked = draw_without_replacement(members[s], quota, rng);
    std::sort(picked.begin(), picked.end());
    for (std::size_t i : picked) out.selected.push_back(samples[i]);
    out.coverage.push_back(StratumCount{kArenas[s / kIsDomains.size()],
                                        kIsDomains[s % kIsDomains.size()], members[s].size(),
                                        picked.size()});
  }
  return out;
}

std::size_t audit_count(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("audit fraction must be in (0,1]");
  }
  const double x = fraction * static_cast<double>(n);
  const double r = std::round(x);
  const double k = std::abs(x - r) <= 1e-9 * std::max(1.0, x) ? r : std::ceil(x);
  return std::min(n, static_cast<std::size_t>(k));
}

std::vector<PersonaSample> audit_slice(std::span<const PersonaSample> samples, double fraction,
                                       std::uint64_t seed) {
  const std::size_t k = audit_count(samples.size(), fraction);
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  std::vector<PersonaSample> out;
  out.reserve(k);
  for (std::size_t i : draw_without_replacement(std::move(idx), k, rng)) out.push_back(samples[i]);
  return out;
}

// --- pairs ------------------------------------------------------------------

std::vector<PreferencePair> build_pairs(std::span<const PersonaSample> samples,
                                        const PairOptions& options) {
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::string_view, std::size_t> group_of;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].scorer_traits) continue;
    auto [it, inserted] = group_of.try_emplace(samples[i].prompt, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }

  std::vector<PreferencePair> pairs;
  for (const auto& g : groups) {
    if (g.size() < 2) continue;
    std::vector<double> dist;
    dist.reserve(g.size());
    for (std::size_t i : g) {
      const auto& s = samples[i];
      double d = mae5(*s.scorer_traits, s.target);
      if (options.norm_penalty) d += options.norm_penalty(s);
      dist.push_back(d);
    }
    const auto best = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
    const auto worst = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    const double margin = dist[worst] - dist[best];
    if (!(margin > 0.0) || margin < options.margin_min) continue;
    const auto& chosen = samples[g[best]];
    const auto& rejected = samples[g[worst]];
    if (chosen.scorer_confidence.value_or(0.0) < options.confidence_min ||
        rejected.scorer_confidence.value_or(0.0) < options.confidence_min) {
      continue;
    }
    pairs.push_back(PreferencePair{chosen.prompt, chosen.completion, rejected.completion, margin,
                                   chosen.sample_id, rejected.sample_id});
  }
  return pairs;
}

std::string to_json_line(const PreferencePair& p) {
  nlohmann::json j = {{"schema_version", kSchemaVersion}, {"prompt", p.prompt},
                      {"chosen", p.chosen},             {"rejected", p.rejected},
                      {"margin", p.margin},             {"chosen_id", p.chosen_id},
                      {"rejected_id", p.rejected_id}};
  return j.dump();
}

PreferencePair parse_preference_pair(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  PreferencePair p;
  p.prompt = j.at("prompt").get<std::string>();
  p.chosen = j.at("chosen").get<std::string>();
  p.rejected = j.at("rejected").get<std::string>();
  p.margin = j.at("margin").get<double>();
  p.chosen_id = j.value("chosen_id", "");
  p.rejected_id = j.value("rejected_id", "");
  if (!(p.margin > 0.0)) throw SchemaError("preference pair margin must be positive");
  return p;
}

std::vector<PreferencePair> load_preference_pairs(const std::filesystem::path& path) {
  std::vector<PreferencePair> out;
  for (const auto& line : read_lines(path)) {
    if (!line.empty()) out.push_back(parse_preference_pair(line));
  }
  return out;
}

// --- synthesis --------------------------------------------------------------

void parallel_for(std::size_t n, std::size_t parallelism,
                  const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min(std::max<std::size_t>(1, parallelism), std::max<std::size_t>(1, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

SynthesisResult synthesize(std::span<const ISProfile> profiles, std::span<const MSCFrame> frames,
                           std::span<const TraitVector> configs, const TemplateSet& templates,
                           Generator& generator, const SynthesisOptions& options) {
  if (profiles.empty() || frames.empty() || configs.empty()) {
    throw std::invalid_argument("synthesize needs IS profiles, frames and configurations");
  }
  if (options.replicates < 1 || options.replicates > static_cast<std::size_t>(kMaxReplicates)) {
    throw std::invalid_argument("replicates must be in [1,5]");
  }
  if (options.families.empty()) throw std::invalid_argument("no task families selected");

  std::vector<IsDomain> domains;
  for (IsDomain d : kIsDomains) {
    if (options.prompt_options.removed_domain != d) domains.push_back(d);
  }

  SynthesisResult result;
  result.plan = {configs.size(), options.replicates, options.families.size()};

  const PromptBuilder builder(templates, options.prompt_options);
  std::vector<PersonaSample> slots;
  std::vector<BatchRequest> requests;
  slots.reserve(result.plan.samples());
  requests.reserve(result.plan.samples());
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const MSCFrame& frame = frames[k % frames.size()];
    const ISProfile& is = profiles[(k / frames.size()) % profiles.size()];
    const IsDomain emphasis = domains[k % domains.size()];
    for (TaskFamily family : options.families) {
      const StructuredPrompt prompt = builder.build(is, frame, configs[k], family, emphasis);
      const std::uint64_t prompt_seed = mix_seed(options.seed, fnv1a64(prompt.full_text));
      for (std::size_t r = 0; r < options.replicates; ++r) {
        PersonaSample s;
        s.sample_id = is.id() + "/" + frame.id() + "/" + std::string(task_family_name(family)) +
                      "/" + trait_key(configs[k]) + "/r" + std::to_string(r);
        s.prompt = prompt.full_text;
        s.target = configs[k];
        s.task_family = family;
        s.is_id = is.id();
        s.frame_id = frame.id();
        s.arena = frame.arena();
        s.emphasis = emphasis;
        s.replicate_index = static_cast<int>(r);
        slots.push_back(std::move(s));
        requests.push_back(BatchRequest{prompt.full_text, mix_seed(prompt_seed, r)});
      }
    }
  }

  auto items = generate_batch(generator, requests, options.preset, options.model, options.parallelism);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (auto* err = std::get_if<ItemError>(&items[i])) {
      result.failures.push_back(SynthesisFailure{slots[i].sample_id, err->message});
      continue;
    }
    auto& rec = std::get<GenerationRecord>(items[i]);
    PersonaSample& s = slots[i];
    s.completion = std::move(rec.response);
    s.truncated = rec.truncated;
    if (rec.truncated) s.diagnostics.push_back("truncated at max_new_tokens");
    result.samples.push_back(std::move(s));
  }
  return result;
}

}  // namespace psybench
