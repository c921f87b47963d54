#include "psybench/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "psybench/errors.hpp"
#include "psybench/prompting.hpp"
#include "psybench/util.hpp"

namespace psybench {

using nlohmann::json;

// --- ablations --------------------------------------------------------------

AblationSpec AblationSpec::parse(std::string_view name) {
  const std::string n = to_lower(name);
  if (n == "full" || n == "none") return full();
  for (IsDomain d : kIsDomains) {
    if (n == to_lower(is_domain_key(d)) || n == to_lower(is_domain_label(d))) return remove(d);
  }
  for (Arena a : kArenas) {
    if (n == to_lower(arena_name(a)) || n == to_lower(arena_label(a))) return remove(a);
  }
  throw UnknownComponentError(std::string(name));
}

std::string AblationSpec::label() const {
  switch (block) {
    case AblationBlock::IS: return std::string(is_domain_label(*domain));
    case AblationBlock::MSC: return std::string(arena_label(*arena));
    case AblationBlock::Full: break;
  }
  return "Full";
}

std::string_view AblationSpec::block_name() const noexcept {
  switch (block) {
    case AblationBlock::IS: return "IS";
    case AblationBlock::MSC: return "MSC";
    case AblationBlock::Full: break;
  }
  return "Full";
}

PipelineConfig ablated_config(const AblationSpec& spec, const PipelineConfig& base) {
  PipelineConfig c = base;
  auto& po = c.synthesis.prompt_options;
  if (spec.block == AblationBlock::IS) po.removed_domain = spec.domain;
  if (spec.block == AblationBlock::MSC) po.removed_arena_tag = spec.arena;
  return c;
}

PipelineResult run_ablation_pipeline(const AblationSpec& spec, const PipelineInputs& inputs,
                                     const PipelineConfig& base, Generator& generator,
                                     TraitScorer& scorer) {
  return run_pipeline(inputs, ablated_config(spec, base), generator, scorer);
}

MetricReport run_ablation(const AblationSpec& spec, const PipelineInputs& inputs,
                          const PipelineConfig& base, Generator& generator, TraitScorer& scorer) {
  return run_ablation_pipeline(spec, inputs, base, generator, scorer).report;
}

AblationSeries run_ablation_seeds(const AblationSpec& spec, const PipelineInputs& inputs,
                                  const PipelineConfig& base, std::span<const std::uint64_t> seeds,
                                  Generator& generator, TraitScorer& scorer) {
  AblationSeries out;
  for (std::uint64_t s : seeds) {
    PipelineConfig c = base;
    c.seed = s;
    out.seeds.push_back(s);
    out.reports.push_back(run_ablation(spec, inputs, c, generator, scorer));
  }
  out.summary = aggregate_runs(out.reports);
  return out;
}

// --- tables -----------------------------------------------------------------

std::string_view table_shape_name(TableShape s) noexcept {
  switch (s) {
    case TableShape::ModelCompare: return "model_compare";
    case TableShape::SftDpo: return "sft_dpo";
    case TableShape::Ablation: return "ablation";
  }
  return "model_compare";
}

std::optional<TableShape> parse_table_shape(std::string_view name) {
  for (TableShape s : {TableShape::ModelCompare, TableShape::SftDpo, TableShape::Ablation}) {
    if (name == table_shape_name(s)) return s;
  }
  return std::nullopt;
}

double median(std::vector<double> values) {
  if (values.empty()) throw EmptyInputError("median of an empty sequence");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

Table emit_table(std::span<const TableRow> rows, TableShape shape) {
  Table t;
  t.shape = shape;
  for (const auto& r : rows) t.lines.push_back(TableLine{r.group, r.label, r.metrics, std::nullopt});

  if (shape == TableShape::ModelCompare) {
    if (rows.empty()) throw MissingRowError("model_compare needs at least one row");
    return t;
  }

  if (shape == TableShape::SftDpo) {
    std::map<std::string, double> baseline;
    for (const auto& r : rows) {
      if (r.label == "Baseline") baseline.emplace(r.group, r.metrics.profile_acc);
    }
    for (auto& line : t.lines) {
      auto it = baseline.find(line.group);
      if (it == baseline.end()) throw MissingRowError("Baseline row for " + line.group);
      if (line.label != "Baseline") {
        line.delta = delta_profile_acc(line.metrics.profile_acc, it->second,
                                       DeltaConvention::ImprovementVsBaseline);
      }
    }
    return t;
  }

  const auto full = std::find_if(rows.begin(), rows.end(), [](const TableRow& r) {
    return r.group == "Full" || r.label == "Full";
  });
  if (full == rows.end()) throw MissingRowError("Full");
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> drops;
  for (auto& line : t.lines) {
    if (line.group == "Full" || line.label == "Full") continue;
    line.delta = delta_profile_acc(line.metrics.profile_acc, full->metrics.profile_acc,
                                   DeltaConvention::DropVsFull);
    if (!drops.count(line.group)) order.push_back(line.group);
    drops[line.group].push_back(*line.delta);
  }
  for (const auto& block : order) {
    const auto& d = drops[block];
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    t.blocks.push_back(BlockStat{block, d.size(), mean, median(d)});
  }
  return t;
}

namespace {

std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}
std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

std::string render(const std::vector<std::vector<std::string>>& cells, std::size_t left_cols) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += "  ";
      line += c < left_cols ? pad_right(row[c], width[c]) : pad_left(row[c], width[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

}  // namespace

std::string Table::text() const {
  std::vector<std::vector<std::string>> cells;
  if (shape == TableShape::ModelCompare) {
    cells.push_back({"Group", "Model", "RMSE5", "MAE5", "ProfileAcc", "cos"});
    for (const auto& l : lines) {
      cells.push_back({l.group, l.label, format_fixed(l.metrics.rmse5, 2), format_fixed(l.metrics.mae5, 2),
                       format_fixed(l.metrics.profile_acc, 2), format_fixed(l.metrics.cosine, 2)});
    }
    return render(cells, 2);
  }
  cells.push_back({shape == TableShape::SftDpo ? "Base Model" : "Block",
                   shape == TableShape::SftDpo ? "Variant" : "Removal", "ProfileAcc", "Delta"});
  for (const auto& l : lines) {
    cells.push_back({l.group, l.label, format_fixed(l.metrics.profile_acc, 2),
                     l.delta ? format_fixed(*l.delta, 2) : std::string("--")});
  }
  std::string out = render(cells, 2);
  if (!blocks.empty()) {
    std::vector<std::vector<std::string>> stats{{"Block", "n", "MeanDrop", "MedianDrop"}};
    for (const auto& b : blocks) {
      stats.push_back({b.block, std::to_string(b.n), format_fixed(b.mean, 2), format_fixed(b.median, 2)});
    }
    out += '\n' + render(stats, 1);
  }
  return out;
}

std::string Table::jsonl() const {
  std::string out;
  for (const auto& l : lines) {
    json j = {{"shape", table_shape_name(shape)},
              {"group", l.group},
              {"label", l.label},
              {"rmse5", l.metrics.rmse5},
              {"mae5", l.metrics.mae5},
              {"profile_acc", l.metrics.profile_acc},
              {"cosine", l.metrics.cosine},
              {"n_scored", l.metrics.n_scored},
              {"n_omitted", l.metrics.n_omitted},
              {"delta", l.delta ? json(*l.delta) : json(nullptr)}};
    out += j.dump() + '\n';
  }
  for (const auto& b : blocks) {
    json j = {{"shape", table_shape_name(shape)}, {"block", b.block},       {"n", b.n},
              {"mean_drop", b.mean},              {"median_drop", b.median}};
    out += j.dump() + '\n';
  }
  return out;
}

std::vector<TableRow> parse_table_rows(std::string_view jsonl) {
  std::vector<TableRow> rows;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = json::parse(line);
    if (!j.contains("label")) continue;  // block statistics lines
    TableRow r;
    r.group = j.value("group", "");
    r.label = j.at("label").get<std::string>();
    r.metrics.rmse5 = j.value("rmse5", 0.0);
    r.metrics.mae5 = j.value("mae5", 0.0);
    r.metrics.profile_acc = j.at("profile_acc").get<double>();
    r.metrics.cosine = j.value("cosine", 0.0);
    r.metrics.n_scored = j.value("n_scored", std::size_t{0});
    r.metrics.n_omitted = j.value("n_omitted", std::size_t{0});
    rows.push_back(std::move(r));
  }
  return rows;
}

// --- fixtures ---------------------------------------------------------------

namespace {

std::optional<double> opt_number(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

std::vector<FixtureRow> read_rows(const json& table) {
  std::vector<FixtureRow> out;
  for (const auto& r : table.at("rows")) {
    out.push_back(FixtureRow{r.value("group", ""), r.at("label").get<std::string>(),
                             opt_number(r, "rmse5"), opt_number(r, "mae5"),
                             opt_number(r, "profile_acc"), opt_number(r, "cosine"),
                             opt_number(r, "stated_delta")});
  }
  return out;
}

MetricReport to_report(const FixtureRow& r) {
  MetricReport m;
  m.rmse5 = r.rmse5.value_or(0.0);
  m.mae5 = r.mae5.value_or(0.0);
  m.profile_acc = r.profile_acc.value_or(0.0);
  m.cosine = r.cosine.value_or(0.0);
  return m;
}

}  // namespace

TableFixture TableFixture::load(const std::filesystem::path& path) {
  const auto j = json::parse(read_file(path));
  const auto& tables = j.at("tables");
  TableFixture f;
  f.sha256_ = j.at("sha256").get<std::string>();
  const std::string actual = sha256_hex(tables.dump());
  if (actual != f.sha256_) {
    throw SchemaError("fixture checksum mismatch in " + path.string() + ": stored " + f.sha256_ +
                      ", computed " + actual);
  }
  f.model_compare_ = read_rows(tables.at("model_compare"));
  f.sft_dpo_ = read_rows(tables.at("sft_dpo"));
  f.ablation_ = read_rows(tables.at("ablation"));
  if (auto it = tables.find("model_compare_gains"); it != tables.end()) f.gains_ = read_rows(*it);
  if (auto it = tables.at("ablation").find("stated_block_summary"); it != tables.at("ablation").end()) {
    for (const auto& s : *it) {
      f.block_summaries_.push_back(
          StatedBlockSummary{s.at("block").get<std::string>(), s.at("mean").get<double>(),
                             s.at("median").get<double>()});
    }
  }
  return f;
}

TableFixture TableFixture::from_rows(std::vector<FixtureRow> model_compare,
                                     std::vector<FixtureRow> sft_dpo,
                                     std::vector<FixtureRow> ablation) {
  TableFixture f;
  f.model_compare_ = std::move(model_compare);
  f.sft_dpo_ = std::move(sft_dpo);
  f.ablation_ = std::move(ablation);
  return f;
}

std::vector<TableRow> TableFixture::rows(TableShape shape) const {
  const auto& src = shape == TableShape::ModelCompare ? model_compare_
                    : shape == TableShape::SftDpo     ? sft_dpo_
                                                      : ablation_;
  std::vector<TableRow> out;
  for (const auto& r : src) out.push_back(TableRow{r.group, r.label, to_report(r)});
  return out;
}

std::filesystem::path default_fixture_path() {
  return default_asset_dir() / "fixtures" / "reference_tables.json";
}

std::vector<FixtureViolation> verify_fixtures(const TableFixture& fixture, const FixtureTolerances& tol) {
  std::vector<FixtureViolation> out;

  for (const auto& r : fixture.model_compare()) {
    if (!r.mae5 || !r.profile_acc) {
      out.push_back({"model_compare", r.label, "missing MAE5 or ProfileAcc", 0.0, 0.0});
      continue;
    }
    const double sum = *r.mae5 + *r.profile_acc;
    if (std::abs(sum - 100.0) > tol.identity) {
      out.push_back({"model_compare", r.group + "/" + r.label, "MAE5 + ProfileAcc = 100", 100.0, sum});
    }
  }

  auto check_deltas = [&](const char* name, TableShape shape) {
    const auto rows = fixture.rows(shape);
    Table t;
    try {
      t = emit_table(rows, shape);
    } catch (const MissingRowError& e) {
      out.push_back({name, "", std::string("missing row: ") + e.what(), 0.0, 0.0});
      return t;
    }
    const auto& src = shape == TableShape::SftDpo ? fixture.sft_dpo() : fixture.ablation();
    for (std::size_t i = 0; i < src.size(); ++i) {
      const auto& stated = src[i].stated_delta;
      const auto& computed = t.lines[i].delta;
      if (stated.has_value() != computed.has_value()) {
        out.push_back({name, src[i].group + "/" + src[i].label, "delta presence",
                       stated.value_or(0.0), computed.value_or(0.0)});
      } else if (stated && std::abs(*stated - *computed) > tol.delta) {
        out.push_back({name, src[i].group + "/" + src[i].label, "stated delta", *stated, *computed});
      }
    }
    return t;
  };
  check_deltas("sft_dpo", TableShape::SftDpo);
  const Table ablation = check_deltas("ablation", TableShape::Ablation);

  for (const auto& s : fixture.block_summaries()) {
    const auto it = std::find_if(ablation.blocks.begin(), ablation.blocks.end(),
                                 [&](const BlockStat& b) { return b.block == s.block; });
    if (it == ablation.blocks.end()) {
      out.push_back({"ablation", s.block, "block summary present", s.mean, 0.0});
      continue;
    }
    if (std::abs(it->mean - s.mean) > tol.block_summary) {
      out.push_back({"ablation", s.block, "mean drop", s.mean, it->mean});
    }
    if (std::abs(it->median - s.median) > tol.block_summary) {
      out.push_back({"ablation", s.block, "median drop", s.median, it->median});
    }
  }

  for (const auto& g : fixture.stated_gains()) {
    const FixtureRow* with = nullptr;
    const FixtureRow* without = nullptr;
    for (const auto& r : fixture.model_compare()) {
      if (r.label != g.label) continue;
      (r.group == "with" ? with : without) = &r;
    }
    if (!with || !without) {
      out.push_back({"model_compare", g.label, "with/without rows present", 0.0, 0.0});
      continue;
    }
    auto cmp = [&](const char* what, const std::optional<double>& stated, const std::optional<double>& a,
                   const std::optional<double>& b) {
      if (!stated || !a || !b) return;
      const double d = *a - *b;
      if (std::abs(d - *stated) > tol.delta) out.push_back({"model_compare", g.label, what, *stated, d});
    };
    cmp("ProfileAcc gain", g.profile_acc, with->profile_acc, without->profile_acc);
    cmp("RMSE5 change", g.rmse5, with->rmse5, without->rmse5);
    cmp("MAE5 change", g.mae5, with->mae5, without->mae5);
  }
  return out;
}

}  // namespace psybench
