#include "psybench/scale_parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <ostream>

#include "json.hpp"
#include "psybench/errors.hpp"
#include "psybench/util.hpp"

namespace psybench {

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_blank(char c) { return c == ' ' || c == '\t'; }
char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }
bool is_separator(char c) { return c == ':' || c == '=' || c == '-'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == '*'; }

// Skips closing quotes or markdown emphasis right after an alias, as in
// {"O": 62} or **Openness**: 70. Sets `closed` when anything was skipped.
std::size_t skip_closers(std::string_view text, std::size_t j, bool& closed) {
  const std::size_t start = j;
  while (j < text.size() && is_closer(text[j])) ++j;
  closed = j != start;
  return j;
}

std::optional<Trait> trait_from_letter(char c) {
  switch (upper(c)) {
    case 'O': return Trait::O;
    case 'C': return Trait::C;
    case 'E': return Trait::E;
    case 'A': return Trait::A;
    case 'N': return Trait::N;
    default: return std::nullopt;
  }
}

bool iequals_prefix(std::string_view text, std::size_t at, std::string_view word) {
  if (text.size() - at < word.size()) return false;
  for (std::size_t k = 0; k < word.size(); ++k) {
    if (std::tolower(static_cast<unsigned char>(text[at + k])) != word[k]) return false;
  }
  return true;
}

std::size_t skip_blanks(std::string_view text, std::size_t j) {
  while (j < text.size() && is_blank(text[j])) ++j;
  return j;
}

struct NumberToken {
  double value;
  bool percent;
  std::size_t end;
};

// [+-]? (digits ('.' digits*)? | '.' digits) '%'?
std::optional<NumberToken> read_number(std::string_view text, std::size_t j) {
  bool negative = false;
  if (j < text.size() && (text[j] == '+' || text[j] == '-')) {
    negative = text[j] == '-';
    ++j;
  }
  const std::size_t digits_start = j;
  std::size_t int_digits = 0;
  while (j < text.size() && is_digit(text[j])) ++j, ++int_digits;
  std::size_t frac_digits = 0;
  if (j < text.size() && text[j] == '.') {
    std::size_t k = j + 1;
    while (k < text.size() && is_digit(text[k])) ++k, ++frac_digits;
    // A bare trailing '.' (sentence end) is not part of the number.
    if (frac_digits > 0) j = k;
  }
  if (int_digits == 0 && frac_digits == 0) return std::nullopt;
  double v = 0.0;
  auto res = std::from_chars(text.data() + digits_start, text.data() + j, v);
  if (res.ec != std::errc{}) return std::nullopt;
  if (negative) v = -v;
  bool percent = false;
  if (j < text.size() && text[j] == '%') {
    percent = true;
    ++j;
  }
  return NumberToken{v, percent, j};
}

struct Match {
  Trait trait;
  NumberToken number;
};

// Full trait name, optional "(L)" parenthetical, optional separator, number.
std::optional<Match> match_full_name(std::string_view text, std::size_t i) {
  if (i > 0 && is_alpha(text[i - 1])) return std::nullopt;
  for (Trait t : kTraits) {
    const std::string_view name = trait_name(t);
    if (!iequals_prefix(text, i, name)) continue;
    std::size_t j = i + name.size();
    if (j < text.size() && is_alpha(text[j])) return std::nullopt;
    bool closed = false;
    j = skip_blanks(text, skip_closers(text, j, closed));
    if (!closed && j + 2 < text.size() && text[j] == '(' && upper(text[j + 1]) == trait_letter(t) &&
        text[j + 2] == ')') {
      j = skip_blanks(text, j + 3);
    }
    if (j < text.size() && is_separator(text[j])) {
      j = skip_blanks(text, j + 1);
    } else if (closed) {
      return std::nullopt;
    }
    if (auto num = read_number(text, j)) return Match{t, *num};
    return std::nullopt;
  }
  return std::nullopt;
}

// Standalone letter, separator, number. Lowercase letters need an explicit
// [:=-] so prose like "a 30 minute walk" is not read as a score; uppercase
// letters may be separated by blanks alone.
std::optional<Match> match_letter(std::string_view text, std::size_t i) {
  auto t = trait_from_letter(text[i]);
  if (!t) return std::nullopt;
  if (i > 0 && is_alnum(text[i - 1])) return std::nullopt;
  if (i + 1 < text.size() && is_alnum(text[i + 1])) return std::nullopt;
  bool closed = false;
  std::size_t j = skip_blanks(text, skip_closers(text, i + 1, closed));
  if (j < text.size() && is_separator(text[j])) {
    j = skip_blanks(text, j + 1);
  } else if (closed || j == i + 1 || text[i] != upper(text[i])) {
    return std::nullopt;
  }
  if (auto num = read_number(text, j)) return Match{*t, *num};
  return std::nullopt;
}

std::string note_prefix(std::size_t i) { return std::string(1, trait_letter(kTraits[i])) + ": "; }

}  // namespace

bool RawPrediction::complete() const {
  return std::all_of(traits.begin(), traits.end(), [](const auto& t) { return t.has_value(); });
}

std::vector<char> RawPrediction::missing() const {
  std::vector<char> out;
  for (std::size_t i = 0; i < kTraitCount; ++i) {
    if (!traits[i]) out.push_back(trait_letter(kTraits[i]));
  }
  return out;
}

RawPrediction raw_from_values(const std::array<double, kTraitCount>& values) {
  RawPrediction r;
  for (std::size_t i = 0; i < kTraitCount; ++i) r.traits[i] = RawTraitValue{values[i]};
  return r;
}

RawPrediction extract_raw_traits(std::string_view text) {
  RawPrediction out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::optional<Match> m = match_full_name(text, i);
    if (!m) m = match_letter(text, i);
    if (!m) {
      ++i;
      continue;
    }
    auto& slot = out.traits[static_cast<std::size_t>(m->trait)];
    const std::size_t mentions = slot ? slot->mentions + 1 : 1;
    slot = RawTraitValue{m->number.value, m->number.percent, i, m->number.end, mentions};
    i = m->number.end;
  }
  return out;
}

std::string_view mapping_kind_label(MappingKind k) noexcept {
  switch (k) {
    case MappingKind::ProportionScaled: return "proportion_scaled";
    case MappingKind::PercentilePassthrough: return "percentile_passthrough";
    case MappingKind::UnknownPercentileClipped: return "unknown->percentile_clipped";
    case MappingKind::Unparsable: return "unparsable";
  }
  return "unparsable";
}

ScaleOutcome try_apply_scale(const RawPrediction& raw) {
  ScaleOutcome out;
  auto& notes = out.diagnostic.per_trait_notes;
  for (std::size_t i = 0; i < kTraitCount; ++i) {
    if (raw.traits[i] && raw.traits[i]->mentions > 1) {
      notes.push_back(note_prefix(i) + std::to_string(raw.traits[i]->mentions) +
                      " mentions, last one used");
    }
  }
  if (!raw.complete()) {
    for (char c : raw.missing()) notes.push_back(std::string(1, c) + ": missing");
    out.diagnostic.kind = MappingKind::Unparsable;
    return out;
  }

  std::array<double, kTraitCount> x{};
  bool any_percent = false;
  bool odd_percent = false;
  for (std::size_t i = 0; i < kTraitCount; ++i) {
    x[i] = raw.traits[i]->value;
    if (raw.traits[i]->percent) {
      any_percent = true;
      if (x[i] > 0.0 && x[i] < 1.0) {
        odd_percent = true;
        notes.push_back(note_prefix(i) + "percent-suffixed value below 1 (" + format_number(x[i]) +
                        "%), clipped instead of rescaled");
      }
    }
  }
  auto all_within = [&](double hi) {
    return std::all_of(x.begin(), x.end(), [hi](double v) { return v >= 0.0 && v <= hi; });
  };

  if (!any_percent && all_within(1.0)) {
    for (double& v : x) v *= 100.0;
    out.diagnostic.kind = MappingKind::ProportionScaled;
  } else if (!odd_percent && all_within(100.0)) {
    const bool has_fraction =
        std::any_of(x.begin(), x.end(), [](double v) { return v > 0.0 && v < 1.0; });
    const bool has_large = std::any_of(x.begin(), x.end(), [](double v) { return v > 1.0; });
    if (has_fraction && has_large) notes.push_back("mixed-scale suspicion");
    out.diagnostic.kind = MappingKind::PercentilePassthrough;
  } else {
    for (std::size_t i = 0; i < kTraitCount; ++i) {
      const double c = std::clamp(x[i], 0.0, 100.0);
      if (c != x[i]) {
        notes.push_back(note_prefix(i) + format_number(x[i]) + " clipped to " + format_number(c));
      }
      x[i] = c;
    }
    out.diagnostic.kind = MappingKind::UnknownPercentileClipped;
  }
  out.traits = validate_trait_vector(x);
  return out;
}

ScaledPrediction apply_scale(const RawPrediction& raw) {
  ScaleOutcome o = try_apply_scale(raw);
  if (!o.traits) throw UnparsableError(raw.missing());
  return ScaledPrediction{*o.traits, std::move(o.diagnostic)};
}

std::string diagnostic_json_line(std::string_view sample_id, const MappingDiagnostic& diag) {
  nlohmann::json j = {{"sample_id", sample_id},
                      {"kind", mapping_kind_label(diag.kind)},
                      {"notes", diag.per_trait_notes}};
  return j.dump();
}

void DiagnosticsLog::record(std::string_view sample_id, const MappingDiagnostic& diag) {
  const std::string line = diagnostic_json_line(sample_id, diag);
  std::lock_guard lock(mu_);
  out_ << line << '\n';
}

}  // namespace psybench
