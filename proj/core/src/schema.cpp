#include "psybench/schema.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "psybench/errors.hpp"
#include "psybench/util.hpp"

namespace psybench {

using nlohmann::json;

namespace {

constexpr std::array<char, kTraitCount> kLetters = {'O', 'C', 'E', 'A', 'N'};
constexpr std::array<std::string_view, kTraitCount> kNames = {
    "openness", "conscientiousness", "extraversion", "agreeableness", "neuroticism"};

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return c == ' ' || c == '\t'; }

json trait_array(const TraitVector& t) {
  json a = json::array();
  for (double v : t.values()) a.push_back(v);
  return a;
}

TraitVector trait_from_json(const json& j) {
  if (!j.is_array() || j.size() != kTraitCount) throw SchemaError("trait vector must have 5 entries");
  std::array<double, kTraitCount> v{};
  for (std::size_t i = 0; i < kTraitCount; ++i) v[i] = j.at(i).get<double>();
  return validate_trait_vector(v);
}

json parse_record(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON record: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("record must be a JSON object");
  auto it = j.find("schema_version");
  if (it == j.end()) throw SchemaError("record lacks schema_version");
  if (!it->is_number_integer() || it->get<int>() != kSchemaVersion) {
    throw SchemaError("unsupported schema_version " + it->dump());
  }
  return j;
}

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw SchemaError(std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

std::vector<std::string> string_list(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) return {};
  if (!it->is_array()) throw SchemaError(std::string("field '") + key + "' must be a list");
  std::vector<std::string> out;
  for (const auto& e : *it) {
    if (!e.is_string()) throw SchemaError(std::string("field '") + key + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

bool has_placeholder(std::string_view text) {
  std::size_t open = text.find("{{");
  while (open != std::string_view::npos) {
    std::size_t close = text.find("}}", open + 2);
    if (close == std::string_view::npos) return false;
    if (close > open + 2) return true;
    open = text.find("{{", close + 2);
  }
  return false;
}

}  // namespace

char trait_letter(Trait t) noexcept { return kLetters[static_cast<std::size_t>(t)]; }
std::string_view trait_name(Trait t) noexcept { return kNames[static_cast<std::size_t>(t)]; }

TraitVector validate_trait_vector(std::span<const double, kTraitCount> v) {
  std::array<double, kTraitCount> out{};
  for (std::size_t i = 0; i < kTraitCount; ++i) {
    if (!std::isfinite(v[i])) throw NonFiniteError(kLetters[i]);
  }
  for (std::size_t i = 0; i < kTraitCount; ++i) {
    if (v[i] < 0.0 || v[i] > 100.0) throw OutOfRangeError(kLetters[i], v[i]);
    out[i] = v[i];
  }
  return TraitVector(out);
}

TraitVector validate_trait_vector(const std::array<double, kTraitCount>& v) {
  return validate_trait_vector(std::span<const double, kTraitCount>(v));
}

std::string trait_key(const TraitVector& t) {
  std::string s;
  for (std::size_t i = 0; i < kTraitCount; ++i) {
    if (i) s += '-';
    s += format_number(t[i]);
  }
  return s;
}

std::vector<TraitVector> enumerate_grid() {
  std::vector<TraitVector> grid;
  grid.reserve(kGridSize);
  for (double o : kGridLevels)
    for (double c : kGridLevels)
      for (double e : kGridLevels)
        for (double a : kGridLevels)
          for (double n : kGridLevels) grid.push_back(validate_trait_vector({o, c, e, a, n}));
  return grid;
}

std::vector<TraitVector> subset_configs(std::span<const TraitVector> grid, std::size_t k,
                                        std::uint64_t seed) {
  if (k > grid.size()) throw KTooLargeError(k, grid.size());
  // Partial Fisher-Yates over indices; output is in draw order.
  std::vector<std::size_t> idx(grid.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  std::vector<TraitVector> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, idx.size() - i));
    std::swap(idx[i], idx[j]);
    out.push_back(grid[idx[i]]);
  }
  return out;
}

// --- IS ---------------------------------------------------------------------

std::string_view is_domain_key(IsDomain d) noexcept {
  static constexpr std::array<std::string_view, 4> k = {"edu", "life", "socctx", "capital"};
  return k[static_cast<std::size_t>(d)];
}

std::string_view is_domain_label(IsDomain d) noexcept {
  static constexpr std::array<std::string_view, 4> k = {
      "Educational Trajectory", "Life Experience", "Socioeconomic Context", "Cultural Capital"};
  return k[static_cast<std::size_t>(d)];
}

std::optional<IsDomain> parse_is_domain(std::string_view name) {
  const std::string n = to_lower(name);
  for (IsDomain d : kIsDomains) {
    if (n == is_domain_key(d) || n == to_lower(is_domain_label(d))) return d;
  }
  return std::nullopt;
}

std::optional<std::string> find_trait_leakage(std::string_view text) {
  const std::string lower = to_lower(text);
  for (std::string_view name : kNames) {
    if (auto pos = lower.find(name); pos != std::string::npos) {
      return std::string(text.substr(pos, name.size()));
    }
  }
  // <letter>[ws][:=-][ws]<digit> with the letter standing alone.
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (std::find(kLetters.begin(), kLetters.end(), text[i]) == kLetters.end()) continue;
    if (i > 0 && is_alnum(text[i - 1])) continue;
    std::size_t j = i + 1;
    if (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) continue;
    while (j < text.size() && is_space(text[j])) ++j;
    if (j < text.size() && (text[j] == ':' || text[j] == '=' || text[j] == '-')) ++j;
    while (j < text.size() && is_space(text[j])) ++j;
    if (j < text.size() && is_digit(text[j])) {
      std::size_t end = j;
      while (end < text.size() && (is_digit(text[end]) || text[end] == '.')) ++end;
      return std::string(text.substr(i, end - i));
    }
  }
  return std::nullopt;
}

ISProfile::ISProfile(std::string edu, std::string life, std::string socctx, std::string capital)
    : edu_(std::move(edu)),
      life_(std::move(life)),
      socctx_(std::move(socctx)),
      capital_(std::move(capital)) {
  for (IsDomain d : kIsDomains) {
    const std::string& field = domain(d);
    if (field.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw SchemaError("IS domain '" + std::string(is_domain_key(d)) + "' is empty");
    }
    if (auto hit = find_trait_leakage(field)) throw LeakageError(std::string(is_domain_key(d)), *hit);
  }
  std::string canonical;
  for (IsDomain d : kIsDomains) {
    canonical += is_domain_key(d);
    canonical += '\x1f';
    canonical += domain(d);
    canonical += '\x1e';
  }
  id_ = "is-" + sha256_hex(canonical).substr(0, 16);
}

const std::string& ISProfile::domain(IsDomain d) const noexcept {
  switch (d) {
    case IsDomain::Edu: return edu_;
    case IsDomain::Life: return life_;
    case IsDomain::Socctx: return socctx_;
    case IsDomain::Capital: return capital_;
  }
  return edu_;
}

// --- MSC --------------------------------------------------------------------

std::string_view arena_name(Arena a) noexcept {
  static constexpr std::array<std::string_view, 8> k = {
      "Working", "Family", "Friendship", "Strangers", "Solitary", "Romantic", "Learning", "Public"};
  return k[static_cast<std::size_t>(a)];
}

std::string_view arena_label(Arena a) noexcept {
  static constexpr std::array<std::string_view, 8> k = {
      "Working Interactions",
      "Family Interactions",
      "Friendship & Informal Socialization",
      "Interactions with Strangers",
      "Solitary Reflection & Intrapersonal Discourse",
      "Romantic and Intimate Communication",
      "Learning and Intellectual Engagement",
      "Public Communication & Presentation"};
  return k[static_cast<std::size_t>(a)];
}

std::optional<Arena> parse_arena(std::string_view name) {
  const std::string n = to_lower(name);
  for (Arena a : kArenas) {
    if (n == to_lower(arena_name(a)) || n == to_lower(arena_label(a))) return a;
  }
  return std::nullopt;
}

MSCFrame::MSCFrame(MSCFrameFields fields, std::size_t index) : f_(std::move(fields)) {
  if (!has_placeholder(f_.template_text)) {
    throw SchemaError("MSC frame template has no {{slot}} placeholder");
  }
  id_ = std::string(arena_name(f_.arena)) + "/" + std::to_string(index);
}

// --- samples ----------------------------------------------------------------

std::string_view task_family_name(TaskFamily f) noexcept {
  static constexpr std::array<std::string_view, 3> k = {"self_description", "role_play",
                                                        "decision_probe"};
  return k[static_cast<std::size_t>(f)];
}

std::optional<TaskFamily> parse_task_family(std::string_view name) {
  for (TaskFamily f : kTaskFamilies) {
    if (name == task_family_name(f)) return f;
  }
  return std::nullopt;
}

// --- JSONL ------------------------------------------------------------------

ISProfile parse_is_profile(std::string_view line) {
  const json j = parse_record(line);
  ISProfile p(required_string(j, "edu"), required_string(j, "life"), required_string(j, "socctx"),
              required_string(j, "capital"));
  if (auto it = j.find("id"); it != j.end() && it->is_string() && it->get<std::string>() != p.id()) {
    throw SchemaError("IS record id " + it->get<std::string>() + " does not match content hash " +
                      p.id());
  }
  return p;
}

MSCFrame parse_msc_frame(std::string_view line, std::size_t index_in_arena) {
  const json j = parse_record(line);
  MSCFrameFields f;
  const std::string arena = required_string(j, "arena");
  auto a = parse_arena(arena);
  if (!a) throw SchemaError("unknown arena '" + arena + "'");
  f.arena = *a;
  f.roles = required_string(j, "roles");
  f.counterpart = required_string(j, "counterpart");
  f.norms = string_list(j, "norms");
  f.stakes = required_string(j, "stakes");
  f.subskills = string_list(j, "subskills");
  f.template_text = required_string(j, "template");
  f.feedback = required_string(j, "feedback");
  return MSCFrame(std::move(f), index_in_arena);
}

namespace {
bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }
}  // namespace

std::vector<ISProfile> load_is_profiles(const std::filesystem::path& path) {
  std::vector<ISProfile> out;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (blank(line)) continue;
    try {
      out.push_back(parse_is_profile(line));
    } catch (const SchemaError& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<MSCFrame> load_msc_frames(const std::filesystem::path& path) {
  std::vector<MSCFrame> out;
  std::array<std::size_t, kArenas.size()> per_arena{};
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (blank(line)) continue;
    try {
      // Peek the arena first so the index can be assigned.
      const json j = parse_record(line);
      auto a = parse_arena(required_string(j, "arena"));
      if (!a) throw SchemaError("unknown arena '" + j.at("arena").get<std::string>() + "'");
      out.push_back(parse_msc_frame(line, per_arena[static_cast<std::size_t>(*a)]++));
    } catch (const SchemaError& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string to_json_line(const ISProfile& p) {
  json j = {{"schema_version", kSchemaVersion},
            {"id", p.id()},
            {"edu", p.edu()},
            {"life", p.life()},
            {"socctx", p.socctx()},
            {"capital", p.capital()}};
  return j.dump();
}

std::string to_json_line(const MSCFrame& f) {
  json j = {{"schema_version", kSchemaVersion},
            {"id", f.id()},
            {"arena", arena_name(f.arena())},
            {"roles", f.roles()},
            {"counterpart", f.counterpart()},
            {"norms", f.norms()},
            {"stakes", f.stakes()},
            {"subskills", f.subskills()},
            {"template", f.template_text()},
            {"feedback", f.feedback()}};
  return j.dump();
}

std::string to_json_line(const PersonaSample& s) {
  json j = {{"schema_version", kSchemaVersion},
            {"sample_id", s.sample_id},
            {"task_family", task_family_name(s.task_family)},
            {"is_id", s.is_id},
            {"frame_id", s.frame_id},
            {"arena", arena_name(s.arena)},
            {"emphasis", is_domain_key(s.emphasis)},
            {"replicate_index", s.replicate_index},
            {"target", trait_array(s.target)},
            {"prompt", s.prompt},
            {"completion", s.completion},
            {"truncated", s.truncated},
            {"scorer_traits", s.scorer_traits ? trait_array(*s.scorer_traits) : json(nullptr)},
            {"scorer_confidence",
             s.scorer_confidence ? json(*s.scorer_confidence) : json(nullptr)},
            {"diagnostics", s.diagnostics}};
  return j.dump();
}

PersonaSample parse_persona_sample(std::string_view line) {
  const json j = parse_record(line);
  PersonaSample s;
  s.sample_id = required_string(j, "sample_id");
  auto fam = parse_task_family(required_string(j, "task_family"));
  if (!fam) throw SchemaError("unknown task_family");
  s.task_family = *fam;
  s.is_id = required_string(j, "is_id");
  s.frame_id = required_string(j, "frame_id");
  auto arena = parse_arena(required_string(j, "arena"));
  if (!arena) throw SchemaError("unknown arena");
  s.arena = *arena;
  auto emph = parse_is_domain(required_string(j, "emphasis"));
  if (!emph) throw SchemaError("unknown emphasis domain");
  s.emphasis = *emph;
  s.replicate_index = j.at("replicate_index").get<int>();
  if (s.replicate_index < 0 || s.replicate_index >= kMaxReplicates) {
    throw SchemaError("replicate_index out of [0,5)");
  }
  s.target = trait_from_json(j.at("target"));
  s.prompt = required_string(j, "prompt");
  s.completion = required_string(j, "completion");
  s.truncated = j.value("truncated", false);
  if (auto it = j.find("scorer_traits"); it != j.end() && !it->is_null()) {
    s.scorer_traits = trait_from_json(*it);
  }
  if (auto it = j.find("scorer_confidence"); it != j.end() && !it->is_null()) {
    s.scorer_confidence = it->get<double>();
  }
  s.diagnostics = string_list(j, "diagnostics");
  return s;
}

}  // namespace psybench
