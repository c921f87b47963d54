// Acceptance checks: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "parser_golden.hpp"
#include "psybench/corpus.hpp"
#include "psybench/generation.hpp"
#include "psybench/losses.hpp"
#include "psybench/metrics.hpp"
#include "psybench/pipeline.hpp"
#include "psybench/reporting.hpp"
#include "psybench/scale_parser.hpp"
#include "psybench/stub_server.hpp"
#include "psybench/toy_lm.hpp"
#include "psybench/util.hpp"

using namespace psybench;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kIdentityTol = 1e-9;
constexpr double kMetricBudgetS = 1.0;
constexpr double kGridBudgetS = 0.1;
constexpr double kLn2Tol = 1e-12;
constexpr double kEtaZeroTol = 1e-12;
constexpr double kGradTol = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr double kLossBudgetS = 10.0;
constexpr double kTrainBudgetS = 5.0;
constexpr double kTrainLr = 0.01;
constexpr double kDeltaTol = 0.01;
constexpr int kGradInstances = 100;
constexpr int kTrainSteps = 200;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int decimals = 3) { return format_fixed(v, decimals); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

// 1 ---------------------------------------------------------------------------
Outcome metric_identity() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> d(0.0, 100.0);
  std::vector<std::pair<TraitVector, TraitVector>> pairs;
  pairs.reserve(10000);
  for (int i = 0; i < 10000; ++i) {
    pairs.emplace_back(validate_trait_vector(std::array<double, 5>{d(rng), d(rng), d(rng), d(rng), d(rng)}),
                       validate_trait_vector(std::array<double, 5>{d(rng), d(rng), d(rng), d(rng), d(rng)}));
  }
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t order_violations = 0;
  for (const auto& [p, t] : pairs) {
    const double m = mae5(p, t);
    worst = std::max(worst, std::abs(profile_acc(p, t) + m - 100.0));
    if (m > rmse5(p, t)) ++order_violations;
  }
  const double secs = seconds_since(t0);
  return {worst <= kIdentityTol && order_violations == 0 && secs < kMetricBudgetS,
          "max |acc+mae-100| " + sci(worst) + ", mae>rmse " + std::to_string(order_violations) + ", " +
              fmt(secs) + " s"};
}

// 2 ---------------------------------------------------------------------------
Outcome fixture_consistency() {
  const auto fixture = TableFixture::load(default_fixture_path());
  const auto violations = verify_fixtures(fixture);
  const auto sft = emit_table(fixture.rows(TableShape::SftDpo), TableShape::SftDpo);
  const auto abl = emit_table(fixture.rows(TableShape::Ablation), TableShape::Ablation);

  std::multiset<double> want_sft = {5.51, 8.09, 0.56, 1.48};
  std::multiset<double> want_is = {14.31, 7.98, 7.06, 6.41};
  std::multiset<double> want_msc = {9.86, 8.47, 6.44, 6.05, 5.51, 5.09, 4.94, 3.81};
  auto consume = [](std::multiset<double>& want, double got, double tol) {
    for (auto it = want.begin(); it != want.end(); ++it) {
      if (std::abs(*it - got) <= tol) {
        want.erase(it);
        return true;
      }
    }
    return false;
  };
  std::size_t misses = 0;
  for (const auto& l : sft.lines) {
    // SFT/DPO deltas must come out exactly at two decimals.
    if (l.delta && !consume(want_sft, std::round(*l.delta * 100) / 100, 1e-12)) ++misses;
  }
  for (const auto& l : abl.lines) {
    if (!l.delta) continue;
    auto& want = l.group == "IS" ? want_is : want_msc;
    if (!consume(want, *l.delta, kDeltaTol)) ++misses;
  }
  const std::size_t left = want_sft.size() + want_is.size() + want_msc.size();
  const std::size_t rows = fixture.model_compare().size() + fixture.sft_dpo().size() + fixture.ablation().size();
  return {violations.empty() && misses == 0 && left == 0,
          std::to_string(rows) + " rows, " + std::to_string(violations.size()) + " violations, " +
              std::to_string(misses + left) + " delta mismatches"};
}

// 3 ---------------------------------------------------------------------------
Outcome scale_mapping() {
  int failed = 0;
  std::vector<std::string> notes;
  auto check = [&](const char* name, bool ok) {
    if (!ok) {
      ++failed;
      notes.push_back(name);
    }
  };
  auto run = [](std::array<double, 5> v) { return try_apply_scale(raw_from_values(v)); };

  const auto prop = run({0.1, 0.2, 0.3, 0.4, 0.5});
  check("proportion", prop.diagnostic.kind == MappingKind::ProportionScaled &&
                          prop.traits->values() == std::array<double, 5>{10, 20, 30, 40, 50});
  const auto pass = run({10, 20, 30, 40, 50});
  check("passthrough", pass.diagnostic.kind == MappingKind::PercentilePassthrough &&
                           pass.traits->values() == std::array<double, 5>{10, 20, 30, 40, 50});
  const auto clip = run({150, -10, 30, 40, 50});
  std::ostringstream log;
  DiagnosticsLog sink(log);
  sink.record("clip-case", clip.diagnostic);
  check("clip", clip.diagnostic.kind == MappingKind::UnknownPercentileClipped &&
                    clip.traits->values() == std::array<double, 5>{100, 0, 30, 40, 50} &&
                    log.str().find("\"unknown->percentile_clipped\"") != std::string::npos);
  const auto ones = run({1, 1, 1, 1, 1});
  check("boundary", ones.diagnostic.kind == MappingKind::ProportionScaled &&
                        ones.traits->values() == std::array<double, 5>{100, 100, 100, 100, 100});
  auto missing = raw_from_values({50, 50, 50, 50, 50});
  missing.traits[4].reset();
  const auto un = try_apply_scale(missing);
  const TraitVector t = validate_trait_vector(std::array<double, 5>{50, 50, 50, 50, 50});
  const std::vector<ScoredItem> items = {{un.traits, t}, {pass.traits, t}};
  const auto rep = evaluate(items);
  check("unparsable", !un.traits && un.diagnostic.kind == MappingKind::Unparsable && rep.n_omitted == 1 &&
                          rep.n_scored == 1);

  std::string detail = "5 branch cases, " + std::to_string(failed) + " failed";
  for (const auto& n : notes) detail += " " + n;
  return {failed == 0, detail};
}

// 4 ---------------------------------------------------------------------------
Outcome grid_arithmetic() {
  const auto t0 = Clock::now();
  const auto grid = enumerate_grid();
  const SynthesisPlan plan{grid.size(), kMaxReplicates, 1};
  const double secs = seconds_since(t0);
  return {grid.size() == 7776 && plan.slots() == 38880 && secs < kGridBudgetS,
          "grid " + std::to_string(grid.size()) + ", slots " + std::to_string(plan.slots()) + ", " +
              fmt(secs, 4) + " s"};
}

// 5 ---------------------------------------------------------------------------
Outcome loss_math() {
  const auto t0 = Clock::now();
  const TokenLogProbs a{{-1.3, -0.2, -2.9}, {}};
  const TokenLogProbs b{{-0.7, -4.1}, {}};
  double worst_ln2 = 0.0;
  for (double beta : {0.01, 0.1, 1.0, 10.0}) {
    worst_ln2 = std::max(worst_ln2, std::abs(dpo_loss(a, b, a, b, DPOConfig{beta}) - std::log(2.0)));
  }
  SFTConfig eta0;
  eta0.eta = 0.0;
  const auto p = validate_trait_vector(std::array<double, 5>{0, 100, 0, 100, 0});
  const auto t = validate_trait_vector(std::array<double, 5>{100, 0, 100, 0, 100});
  const double eta_err = std::abs(sft_loss(a, p, t, eta0) + length_norm_ll(a));

  const std::string alpha = "abcdefghij ";
  Rng rng(77);
  auto seq = [&](std::size_t len) {
    ToySequence s;
    for (std::size_t i = 0; i < len; ++i) s.text += alpha[uniform_below(rng, alpha.size())];
    const std::size_t prefix = uniform_below(rng, len);
    for (std::size_t i = 0; i < len; ++i) s.mask.push_back(i >= prefix);
    return s;
  };
  double worst_sft = 0.0, worst_dpo = 0.0;
  for (int i = 0; i < kGradInstances; ++i) {
    const auto model = ToyLM::random(alpha, 1000 + static_cast<std::uint64_t>(i));
    const auto ref = ToyLM::random(alpha, 5000 + static_cast<std::uint64_t>(i));
    ToyBatch sb;
    sb.sft.push_back({seq(12), p, t});
    sb.sft.push_back({seq(7), t, t});
    ToyObjective so;
    worst_sft = std::max(worst_sft, grad_check(model, sb, so, kGradEps));
    ToyBatch db;
    db.dpo.push_back({seq(10), seq(9)});
    ToyObjective dobj;
    dobj.kind = Objective::Dpo;
    dobj.dpo.beta = 0.5;
    dobj.reference = &ref;
    worst_dpo = std::max(worst_dpo, grad_check(model, db, dobj, kGradEps));
  }
  const double secs = seconds_since(t0);
  return {worst_ln2 <= kLn2Tol && eta_err <= kEtaZeroTol && worst_sft < kGradTol && worst_dpo < kGradTol &&
              secs < kLossBudgetS,
          "ln2 err " + sci(worst_ln2) + ", eta0 err " + sci(eta_err) + ", grad rel err sft " + sci(worst_sft) +
              " dpo " + sci(worst_dpo) + ", " + fmt(secs) + " s"};
}

// 6 ---------------------------------------------------------------------------
Outcome toy_training() {
  const auto t0 = Clock::now();
  const std::string alpha = "abcdefgh ";
  const ToySequence chosen{"a bad cafe fed a bee", {}};
  const ToySequence rejected{"hg hh gg hgh ghh hgg", {}};
  const auto ref = ToyLM::random(alpha, 31);
  ToyObjective dobj;
  dobj.kind = Objective::Dpo;
  dobj.reference = &ref;
  ToyBatch db;
  db.dpo.push_back({chosen, rejected});
  ToyLM m = ref;
  double prev = dpo_margin(m, db.dpo[0], dobj);
  std::size_t margin_drops = 0;
  for (int s = 0; s < kTrainSteps; ++s) {
    m = toy_train_step(m, db, dobj, kTrainLr).model;
    const double z = dpo_margin(m, db.dpo[0], dobj);
    if (z < prev) ++margin_drops;
    prev = z;
  }
  const double final_margin = prev;

  ToyBatch sb;
  const auto tv = validate_trait_vector(std::array<double, 5>{50, 50, 50, 50, 50});
  sb.sft.push_back({chosen, tv, tv});
  ToyLM sm = ToyLM::random(alpha, 32);
  double prev_loss = toy_loss(sm, sb, ToyObjective{});
  const double first_loss = prev_loss;
  std::size_t loss_rises = 0;
  for (int s = 0; s < kTrainSteps; ++s) {
    sm = toy_train_step(sm, sb, ToyObjective{}, kTrainLr).model;
    const double l = toy_loss(sm, sb, ToyObjective{});
    if (l > prev_loss) ++loss_rises;
    prev_loss = l;
  }
  const double secs = seconds_since(t0);
  return {margin_drops == 0 && loss_rises == 0 && secs < kTrainBudgetS,
          "dpo margin 0 -> " + fmt(final_margin, 6) + " (" + std::to_string(margin_drops) + " drops), sft loss " +
              fmt(first_loss, 4) + " -> " + fmt(prev_loss, 4) + " (" + std::to_string(loss_rises) + " rises), " +
              fmt(secs) + " s"};
}

// 7 and 9 share the stub-backed pipeline setup --------------------------------
PipelineConfig stub_config() {
  PipelineConfig c;
  c.subset_size = 40;
  c.seed = 20240601;
  c.quota_per_stratum = 50;
  c.shard_size = 200;
  return c;
}

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return out;
}

Outcome pipeline_determinism() {
  const auto inputs = PipelineInputs::load(default_asset_dir());
  const fs::path root = fs::temp_directory_path() / "psybench_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::map<std::string, std::string>> runs;
  for (int run = 0; run < 2; ++run) {
    // A fresh server per run, so nothing can leak between the two.
    StubServer server;
    server.start();
    ClientConfig cc;
    cc.api_base = server.base_url();
    cc.backoff_base = std::chrono::milliseconds(1);
    ChatClient client(cc);
    LlmJudgeScorer judge(client, inputs.templates, "stub-judge");
    const auto cfg = stub_config();
    const auto dir = root / ("run" + std::to_string(run));
    write_pipeline_outputs(run_pipeline(inputs, cfg, client, judge), cfg, inputs, dir);
    server.stop();
    runs.push_back(dir_bytes(dir));
  }
  fs::remove_all(root);
  std::size_t shards = 0;
  for (const auto& [name, bytes] : runs[0]) shards += name.rfind("shards", 0) == 0;
  const bool have_all = shards > 0 && runs[0].count("pairs.jsonl") && runs[0].count("report.jsonl") &&
                        runs[0].count("report.txt");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : runs[0]) {
    auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != bytes) ++differing;
  }
  differing += runs[1].size() > runs[0].size() ? runs[1].size() - runs[0].size() : 0;
  return {have_all && differing == 0,
          std::to_string(runs[0].size()) + " files (" + std::to_string(shards) + " shards), " +
              std::to_string(differing) + " differ"};
}

// 8 ---------------------------------------------------------------------------
Outcome dedup_equivalence() {
  std::size_t cases = 0, mismatches = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto texts = oracle::near_duplicate_corpus(20 + 7 * seed, seed);  // up to 188 texts
    for (double thr : {0.3, 0.5, 0.8, 0.9}) {
      ++cases;
      if (dedup_indices(texts, thr) != oracle::dedup(texts, thr)) ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(cases) + " corpora, " + std::to_string(mismatches) + " mismatches"};
}

// 9 ---------------------------------------------------------------------------
Outcome ablation_noop() {
  const auto inputs = PipelineInputs::load(default_asset_dir());
  StubServer server;
  server.start();
  ClientConfig cc;
  cc.api_base = server.base_url();
  cc.backoff_base = std::chrono::milliseconds(1);
  ChatClient client(cc);
  LexiconScorer scorer;
  const auto cfg = stub_config();
  const auto plain = run_pipeline(inputs, cfg, client, scorer);
  const auto full = run_ablation_pipeline(AblationSpec::full(), inputs, cfg, client, scorer);
  server.stop();
  std::size_t differing = plain.synthesis.samples.size() == full.synthesis.samples.size() ? 0 : 1;
  for (std::size_t i = 0; differing == 0 && i < plain.synthesis.samples.size(); ++i) {
    if (plain.synthesis.samples[i].prompt != full.synthesis.samples[i].prompt) ++differing;
  }
  const bool same_metrics = to_json_line(plain.report) == to_json_line(full.report);
  return {differing == 0 && same_metrics,
          std::to_string(plain.synthesis.samples.size()) + " prompts, " + std::to_string(differing) +
              " differ, metrics " + (same_metrics ? "identical" : "differ")};
}

// 10 --------------------------------------------------------------------------
Outcome parser_corpus() {
  const auto cases = golden::load_parser_cases(PSYBENCH_TEST_DATA_DIR "/parser_cases.jsonl");
  std::size_t mismatches = 0;
  std::string first;
  for (const auto& c : cases) {
    const auto err = golden::check_case(c);
    if (!err.empty()) {
      ++mismatches;
      if (first.empty()) first = "; first: " + err;
    }
  }
  return {cases.size() == 50 && mismatches == 0,
          std::to_string(cases.size()) + " cases, " + std::to_string(mismatches) + " mismatches" + first};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"metric identity", metric_identity},
      {"fixture consistency", fixture_consistency},
      {"scale mapping", scale_mapping},
      {"grid arithmetic", grid_arithmetic},
      {"loss math", loss_math},
      {"toy training", toy_training},
      {"pipeline determinism", pipeline_determinism},
      {"dedup oracle equivalence", dedup_equivalence},
      {"ablation no-op", ablation_noop},
      {"parser corpus", parser_corpus},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %2zu %-26s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
