#include <charconv>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "psybench/corpus.hpp"
#include "psybench/errors.hpp"
#include "psybench/generation.hpp"
#include "psybench/pipeline.hpp"
#include "psybench/prompting.hpp"
#include "psybench/reporting.hpp"
#include "psybench/scale_parser.hpp"
#include "psybench/stub_server.hpp"
#include "psybench/toy_lm.hpp"
#include "psybench/util.hpp"

using namespace psybench;

namespace {

struct EndpointOptions {
  bool stub = false;
  std::string api_base;
  std::string transcript;
  double rps = 0.0;
  int max_attempts = 3;
};

struct RunOptions {
  std::string assets;
  std::size_t subset = 0;
  std::uint64_t seed = 0;
  std::size_t replicates = kMaxReplicates;
  std::vector<std::string> families;
  std::string model = "llama3_3_70B";
  std::size_t parallelism = 4;
  std::size_t quota = 1000;
  double dedup_threshold = kDefaultDedupThreshold;
  double audit_fraction = 0.01;
  double margin_min = 5.0;
  double confidence_min = 0.5;
  std::string scorer = "lexicon";
  std::string judge_model = "llama3_3_70B";
  bool tag_only = false;
  EndpointOptions endpoint;
};

void add_endpoint_options(CLI::App* cmd, EndpointOptions& o) {
  cmd->add_flag("--stub", o.stub, "Serve requests from the bundled deterministic stub model");
  cmd->add_option("--api-base", o.api_base, "Override PSYBENCH_API_BASE");
  cmd->add_option("--transcript", o.transcript, "Mirror requests and responses to this JSONL file");
  cmd->add_option("--rps", o.rps, "Requests per second per endpoint (0 = unlimited)");
  cmd->add_option("--max-attempts", o.max_attempts, "Attempts per request")->check(CLI::PositiveNumber);
}

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--assets", o.assets, "Asset directory (default: built-in assets)");
  cmd->add_option("--subset", o.subset, "Number of grid configurations to sample (0 = full grid)");
  cmd->add_option("--seed", o.seed, "Run seed");
  cmd->add_option("--replicates", o.replicates, "Completions per configuration")->check(CLI::Range(1, 5));
  cmd->add_option("--family", o.families, "Task family (repeatable; default all three)");
  cmd->add_option("--model", o.model, "Model id for synthesis");
  cmd->add_option("--parallelism", o.parallelism, "Concurrent requests")->check(CLI::PositiveNumber);
  cmd->add_option("--quota", o.quota, "Samples kept per arena x IS-emphasis stratum")->check(CLI::PositiveNumber);
  cmd->add_option("--dedup-threshold", o.dedup_threshold, "Jaccard threshold for near-duplicates")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--audit-fraction", o.audit_fraction, "Fraction exported for spot audit");
  cmd->add_option("--margin-min", o.margin_min, "Minimum preference margin (percentile points)");
  cmd->add_option("--confidence-min", o.confidence_min, "Minimum scorer confidence for pairs");
  cmd->add_option("--scorer", o.scorer, "Trait scorer: lexicon or judge")
      ->check(CLI::IsMember({"lexicon", "judge"}));
  cmd->add_option("--judge-model", o.judge_model, "Model id for the judge scorer");
  cmd->add_flag("--tag-only", o.tag_only, "Arena ablations keep the arena's frames in the pool");
  add_endpoint_options(cmd, o.endpoint);
}

/// Owns the optional in-process stub server and the chat client.
struct Endpoint {
  std::unique_ptr<StubServer> stub;
  std::unique_ptr<ChatClient> client;

  explicit Endpoint(const EndpointOptions& o) {
    ClientConfig cfg = ClientConfig::from_env();
    if (o.stub) {
      stub = std::make_unique<StubServer>();
      stub->start();
      cfg.api_base = stub->base_url();
      cfg.api_key.clear();
    }
    if (!o.api_base.empty()) cfg.api_base = o.api_base;
    if (!o.transcript.empty()) cfg.transcript = o.transcript;
    cfg.requests_per_second = o.rps;
    cfg.max_attempts = o.max_attempts;
    client = std::make_unique<ChatClient>(cfg);
  }
};

std::filesystem::path asset_dir(const std::string& given) {
  return given.empty() ? default_asset_dir() : std::filesystem::path(given);
}

PipelineConfig make_config(const RunOptions& o) {
  PipelineConfig c;
  c.subset_size = o.subset;
  c.seed = o.seed;
  c.synthesis.replicates = o.replicates;
  c.synthesis.model = o.model;
  c.synthesis.parallelism = o.parallelism;
  if (!o.families.empty()) {
    c.synthesis.families.clear();
    for (const auto& f : o.families) {
      auto fam = parse_task_family(f);
      if (!fam) throw CLI::ValidationError("--family", "unknown task family " + f);
      c.synthesis.families.push_back(*fam);
    }
  }
  c.scoring_parallelism = o.parallelism;
  c.quota_per_stratum = o.quota;
  c.dedup_threshold = o.dedup_threshold;
  c.audit_fraction = o.audit_fraction;
  c.pairs.margin_min = o.margin_min;
  c.pairs.confidence_min = o.confidence_min;
  c.remove_arena_frames = !o.tag_only;
  return c;
}

std::unique_ptr<TraitScorer> make_scorer(const RunOptions& o, Endpoint& ep, const TemplateSet& templates) {
  if (o.scorer == "judge") return std::make_unique<LlmJudgeScorer>(*ep.client, templates, o.judge_model);
  return std::make_unique<LexiconScorer>();
}

TraitVector parse_target(const std::string& key) {
  std::array<double, kTraitCount> v{};
  std::size_t k = 0;
  const char* p = key.data();
  const char* end = key.data() + key.size();
  while (p < end && k < kTraitCount) {
    auto r = std::from_chars(p, end, v[k]);
    if (r.ec != std::errc{}) break;
    ++k;
    p = r.ptr;
    if (p < end && *p == '-') ++p;
  }
  if (k != kTraitCount || p != end) {
    throw CLI::ValidationError("--target", "expected five values like 0-20-40-60-80");
  }
  return validate_trait_vector(v);
}

int cmd_generate(const RunOptions& o, const std::string& out_dir, const std::string& remove) {
  const auto inputs = PipelineInputs::load(asset_dir(o.assets));
  Endpoint ep(o.endpoint);
  auto scorer = make_scorer(o, ep, inputs.templates);
  const auto spec = remove.empty() ? AblationSpec::full() : AblationSpec::parse(remove);
  const auto result = run_ablation_pipeline(spec, inputs, make_config(o), *ep.client, *scorer);
  const auto cfg = ablated_config(spec, make_config(o));
  write_pipeline_outputs(result, cfg, inputs, out_dir);
  std::cout << "raw samples " << result.synthesis.samples.size() << " (failed "
            << result.synthesis.failures.size() << "), scorer rejected " << result.scorer_rejected
            << ", dedup removed " << result.dedup_removed << ", corpus " << result.corpus.size()
            << ", pairs " << result.pairs.size() << ", audit " << result.audit.size() << "\n";
  const std::vector<std::pair<std::string, MetricReport>> rows = {{o.model, result.report}};
  std::cout << format_metric_table(rows);
  return 0;
}

int cmd_pairs(const std::string& run_dir, const std::string& out, double margin_min, double confidence_min) {
  const auto corpus = load_corpus(run_dir);
  PairOptions po;
  po.margin_min = margin_min;
  po.confidence_min = confidence_min;
  const auto pairs = build_pairs(corpus, po);
  std::string text;
  for (const auto& p : pairs) text += to_json_line(p) + "\n";
  const std::filesystem::path dest = out.empty() ? std::filesystem::path(run_dir) / "pairs.jsonl" : std::filesystem::path(out);
  write_file(dest, text);
  std::cout << pairs.size() << " pairs from " << corpus.size() << " samples -> " << dest.string() << "\n";
  return 0;
}

ToySequence pair_sequence(const std::string& prompt, const std::string& response) {
  constexpr std::size_t kPromptTail = 48;
  constexpr std::size_t kResponseHead = 160;
  const std::string head = project_to_toy_alphabet(
      prompt.size() > kPromptTail ? std::string_view(prompt).substr(prompt.size() - kPromptTail) : prompt);
  const std::string body = project_to_toy_alphabet(std::string_view(response).substr(0, kResponseHead));
  ToySequence s{head + body, std::vector<bool>(head.size() + body.size(), false)};
  std::fill(s.mask.begin() + static_cast<long>(head.size()), s.mask.end(), true);
  return s;
}

int cmd_losscheck(const std::string& pairs_path, std::size_t instances, double epsilon, double tolerance,
                  std::uint64_t seed) {
  const std::string alphabet(kToyAlphabet.substr(0, 12));
  double worst_sft = 0.0;
  double worst_dpo = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng(mix_seed(seed, i));
    const ToyLM model = ToyLM::random(alphabet, rng(), 1.0);
    const ToyLM ref = ToyLM::random(alphabet, rng(), 1.0);
    auto random_seq = [&](std::size_t len) {
      ToySequence s;
      for (std::size_t j = 0; j < len; ++j) {
        s.text += alphabet[uniform_below(rng, alphabet.size())];
        s.mask.push_back(j >= len / 3);
      }
      return s;
    };
    ToyBatch batch;
    const auto t = validate_trait_vector(std::array<double, 5>{50, 50, 50, 50, 50});
    batch.sft.push_back(SftItem{random_seq(24), t, t});
    batch.sft.push_back(SftItem{random_seq(17), t, t});
    batch.dpo.push_back(DpoItem{random_seq(20), random_seq(26)});
    ToyObjective obj;
    obj.reference = &ref;
    obj.dpo.beta = 0.5;
    obj.kind = Objective::Sft;
    worst_sft = std::max(worst_sft, grad_check(model, batch, obj, epsilon));
    obj.kind = Objective::Dpo;
    worst_dpo = std::max(worst_dpo, grad_check(model, batch, obj, epsilon));
  }
  bool ok = worst_sft < tolerance && worst_dpo < tolerance;
  std::printf("%s sft grad_check: max relative error %.3e over %zu models\n",
              worst_sft < tolerance ? "PASS" : "FAIL", worst_sft, instances);
  std::printf("%s dpo grad_check: max relative error %.3e over %zu models\n",
              worst_dpo < tolerance ? "PASS" : "FAIL", worst_dpo, instances);

  if (!pairs_path.empty()) {
    const auto pairs = load_preference_pairs(pairs_path);
    if (pairs.empty()) {
      std::printf("SKIP pairs grad_check: %s has no pairs\n", pairs_path.c_str());
    } else {
      const std::string full(kToyAlphabet);
      const ToyLM model = ToyLM::random(full, seed, 0.5);
      const ToyLM ref = ToyLM::random(full, seed + 1, 0.5);
      ToyBatch batch;
      for (std::size_t i = 0; i < std::min<std::size_t>(pairs.size(), 4); ++i) {
        batch.dpo.push_back(DpoItem{pair_sequence(pairs[i].prompt, pairs[i].chosen),
                                    pair_sequence(pairs[i].prompt, pairs[i].rejected)});
      }
      ToyObjective obj;
      obj.kind = Objective::Dpo;
      obj.reference = &ref;
      const double err = grad_check(model, batch, obj, epsilon);
      const bool pass = err < tolerance;
      ok = ok && pass;
      std::printf("%s pairs dpo grad_check: max relative error %.3e on %zu pairs\n", pass ? "PASS" : "FAIL",
                  err, batch.dpo.size());
    }
  }
  return ok ? 0 : 1;
}

int cmd_ablate(const RunOptions& o, const std::vector<std::string>& removes,
               const std::vector<std::uint64_t>& seeds_in, const std::string& out) {
  const auto inputs = PipelineInputs::load(asset_dir(o.assets));
  Endpoint ep(o.endpoint);
  auto scorer = make_scorer(o, ep, inputs.templates);
  const auto base = make_config(o);
  const std::vector<std::uint64_t> seeds = seeds_in.empty() ? std::vector<std::uint64_t>{o.seed} : seeds_in;

  std::vector<AblationSpec> specs{AblationSpec::full()};
  for (const auto& r : removes) specs.push_back(AblationSpec::parse(r));

  std::vector<TableRow> rows;
  for (const auto& spec : specs) {
    const auto series = run_ablation_seeds(spec, inputs, base, seeds, *ep.client, *scorer);
    MetricReport mean;
    mean.mae5 = series.summary.mae5.mean;
    mean.rmse5 = series.summary.rmse5.mean;
    mean.profile_acc = series.summary.profile_acc.mean;
    mean.cosine = series.summary.cosine.mean;
    mean.n_scored = series.summary.n_scored;
    mean.n_omitted = series.summary.n_omitted;
    rows.push_back(TableRow{std::string(spec.block_name()), spec.label(), mean});
    if (seeds.size() > 1) std::cout << spec.label() << ": " << format_run_summary(series.summary);
  }
  const Table table = emit_table(rows, TableShape::Ablation);
  std::cout << table.text();
  if (!out.empty()) write_file(out, table.jsonl());
  return 0;
}

int cmd_report(const std::string& shape_name, const std::string& input, const std::string& format) {
  const auto shape = parse_table_shape(shape_name);
  if (!shape) throw CLI::ValidationError("--shape", "unknown shape " + shape_name);
  std::vector<TableRow> rows;
  if (input.empty()) {
    rows = TableFixture::load(default_fixture_path()).rows(*shape);
  } else {
    rows = parse_table_rows(read_file(input));
  }
  const Table t = emit_table(rows, *shape);
  std::cout << (format == "jsonl" ? t.jsonl() : t.text());
  return 0;
}

int cmd_verify_fixtures(const std::string& path) {
  const auto fixture = TableFixture::load(path.empty() ? default_fixture_path() : std::filesystem::path(path));
  const auto violations = verify_fixtures(fixture);
  for (const auto& v : violations) {
    std::printf("%s %s: %s expected %.4f got %.4f\n", v.table.c_str(), v.row.c_str(), v.check.c_str(),
                v.expected, v.actual);
  }
  std::printf("%zu violation(s), fixture sha256 %s\n", violations.size(), fixture.sha256().c_str());
  return violations.empty() ? 0 : 1;
}

int cmd_parse(const std::string& text_arg, const std::string& sample_id) {
  std::string text = text_arg;
  if (text.empty()) text.assign(std::istreambuf_iterator<char>(std::cin), {});
  const RawPrediction raw = extract_raw_traits(text);
  for (Trait t : kTraits) {
    std::printf("%c ", trait_letter(t));
    if (raw[t]) {
      std::printf("%s%s\n", format_number(raw[t]->value).c_str(), raw[t]->percent ? "%" : "");
    } else {
      std::printf("-\n");
    }
  }
  const ScaleOutcome out = try_apply_scale(raw);
  if (out.traits) std::printf("percentile %s\n", trait_key(*out.traits).c_str());
  std::printf("%s\n", diagnostic_json_line(sample_id, out.diagnostic).c_str());
  return out.traits ? 0 : 2;
}

StubServer* g_stub = nullptr;

int cmd_stub_server(const std::string& host, int port) {
  StubServer server;
  g_stub = &server;
  std::signal(SIGINT, [](int) {
    if (g_stub) g_stub->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_stub) g_stub->stop();
  });
  std::printf("stub model listening on http://%s:%d/v1\n", host.c_str(), port);
  std::fflush(stdout);
  server.run(host, port);
  g_stub = nullptr;
  return 0;
}

int cmd_templates(const std::string& dir_arg, bool rehash) {
  const auto dir = dir_arg.empty() ? default_asset_dir() / "templates" : std::filesystem::path(dir_arg);
  if (rehash) TemplateSet::rehash_manifest(dir);
  const auto set = TemplateSet::load(dir);
  for (const auto& e : set.entries()) {
    std::printf("%-26s v%d %s\n", e.id.c_str(), e.version, e.sha256.c_str());
  }
  return 0;
}

int cmd_author(const std::string& assets, const std::string& target, const std::string& component,
               bool send, const EndpointOptions& eo, const std::string& model, std::uint64_t seed) {
  const auto templates = TemplateSet::load(asset_dir(assets) / "templates");
  std::string id = component;
  if (id.find('/') == std::string::npos) {
    if (auto d = parse_is_domain(component)) {
      id = "is/" + std::string(is_domain_key(*d));
    } else if (auto a = parse_arena(component)) {
      id = "msc/" + to_lower(arena_name(*a));
    } else {
      throw UnknownComponentError(component);
    }
  }
  const std::string prompt = render_authoring_prompt(templates, parse_target(target), id);
  if (!send) {
    std::cout << prompt;
    return 0;
  }
  Endpoint ep(eo);
  const auto rec = ep.client->generate(std::string_view(prompt), corpus_synthesis_preset(), model, seed);
  std::cout << rec.response << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"psybench: persona corpus synthesis and percentile-space evaluation"};
  app.require_subcommand(1);

  RunOptions gen_opts;
  std::string gen_out = "run";
  std::string gen_remove;
  auto* gen = app.add_subcommand("generate", "Synthesize, score, filter and write a corpus");
  add_run_options(gen, gen_opts);
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--remove", gen_remove, "Omit one IS domain or MSC arena from the prompts");

  std::string pairs_run;
  std::string pairs_out;
  double pairs_margin = 5.0;
  double pairs_conf = 0.5;
  auto* pairs = app.add_subcommand("pairs", "Rebuild preference pairs from a corpus run");
  pairs->add_option("--run", pairs_run, "Run directory written by generate")->required();
  pairs->add_option("--out", pairs_out, "Pairs file (default <run>/pairs.jsonl)");
  pairs->add_option("--margin-min", pairs_margin, "Minimum margin");
  pairs->add_option("--confidence-min", pairs_conf, "Minimum scorer confidence");

  std::string lc_pairs;
  std::size_t lc_instances = 100;
  double lc_eps = 1e-5;
  double lc_tol = 1e-4;
  std::uint64_t lc_seed = 0;
  auto* losscheck = app.add_subcommand("losscheck", "Check SFT/DPO gradients against finite differences");
  losscheck->add_option("--pairs", lc_pairs, "Also check DPO gradients on pairs from this file");
  losscheck->add_option("--instances", lc_instances, "Random toy models per objective");
  losscheck->add_option("--epsilon", lc_eps, "Finite-difference step")->check(CLI::Range(1e-8, 1e-3));
  losscheck->add_option("--tolerance", lc_tol, "Maximum accepted relative error");
  losscheck->add_option("--seed", lc_seed, "Seed for the random toy models");

  RunOptions abl_opts;
  std::vector<std::string> abl_remove;
  std::vector<std::uint64_t> abl_seeds;
  std::string abl_out;
  auto* ablate = app.add_subcommand("ablate", "Single-factor ablation against the full system");
  add_run_options(ablate, abl_opts);
  ablate->remove_option(ablate->get_option("--seed"));
  ablate->add_option("--remove", abl_remove, "IS domain or MSC arena to remove (repeatable)")->required();
  ablate->add_option("--seed", abl_seeds, "Run seed (repeat for a mean/std summary)");
  ablate->add_option("--out", abl_out, "Write the table as JSONL");

  std::string rep_shape;
  std::string rep_input;
  std::string rep_format = "text";
  auto* report = app.add_subcommand("report", "Emit a results table with delta columns");
  report->add_option("--shape", rep_shape, "model_compare, sft_dpo or ablation")->required();
  report->add_option("--input", rep_input, "JSONL rows (default: bundled reference tables)");
  report->add_option("--format", rep_format, "text or jsonl")->check(CLI::IsMember({"text", "jsonl"}));

  std::string vf_path;
  auto* verify = app.add_subcommand("verify-fixtures", "Check identities in the reference tables");
  verify->add_option("--fixture", vf_path, "Fixture file (default: bundled)");

  std::string parse_text;
  std::string parse_id = "stdin";
  auto* parse = app.add_subcommand("parse", "Extract and rescale trait values from model output");
  parse->add_option("--text", parse_text, "Text to parse (default: read stdin)");
  parse->add_option("--id", parse_id, "Sample id used in the diagnostic line");

  std::string stub_host = "127.0.0.1";
  int stub_port = 8089;
  auto* stub = app.add_subcommand("stub-server", "Run the deterministic stub chat endpoint");
  stub->add_option("--host", stub_host, "Bind address");
  stub->add_option("--port", stub_port, "Port");

  std::string tpl_dir;
  bool tpl_rehash = false;
  auto* templates = app.add_subcommand("templates", "List template assets and checksums");
  templates->add_option("--dir", tpl_dir, "Template directory");
  templates->add_flag("--rehash", tpl_rehash, "Recompute checksums and rewrite the manifest");

  std::string au_assets;
  std::string au_target = "50-50-50-50-50";
  std::string au_component;
  bool au_send = false;
  std::string au_model = "llama3_3_70B";
  std::uint64_t au_seed = 0;
  EndpointOptions au_endpoint;
  auto* author = app.add_subcommand("author", "Render (or send) an IS or MSC authoring prompt");
  author->add_option("--assets", au_assets, "Asset directory");
  author->add_option("--target", au_target, "Target profile, e.g. 0-20-40-60-80");
  author->add_option("--component", au_component, "IS domain or MSC arena")->required();
  author->add_flag("--send", au_send, "Send to the endpoint and print the reply");
  author->add_option("--model", au_model, "Model id");
  author->add_option("--seed", au_seed, "Sampling seed");
  add_endpoint_options(author, au_endpoint);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(gen_opts, gen_out, gen_remove);
    if (*pairs) return cmd_pairs(pairs_run, pairs_out, pairs_margin, pairs_conf);
    if (*losscheck) return cmd_losscheck(lc_pairs, lc_instances, lc_eps, lc_tol, lc_seed);
    if (*ablate) return cmd_ablate(abl_opts, abl_remove, abl_seeds, abl_out);
    if (*report) return cmd_report(rep_shape, rep_input, rep_format);
    if (*verify) return cmd_verify_fixtures(vf_path);
    if (*parse) return cmd_parse(parse_text, parse_id);
    if (*stub) return cmd_stub_server(stub_host, stub_port);
    if (*templates) return cmd_templates(tpl_dir, tpl_rehash);
    if (*author) return cmd_author(au_assets, au_target, au_component, au_send, au_endpoint, au_model, au_seed);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "psybench: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
