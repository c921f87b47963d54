#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "psybench/schema.hpp"

namespace psybench {

/// One captured trait mention.
struct RawTraitValue {
  double value = 0.0;
  bool percent = false;      // number carried a trailing '%'
  std::size_t begin = 0;     // span of the whole mention (alias .. number[%])
  std::size_t end = 0;
  std::size_t mentions = 1;  // how many matches were seen; the last one wins
};

/// Unscaled prediction; a component is absent iff no alias matched.
struct RawPrediction {
  std::array<std::optional<RawTraitValue>, kTraitCount> traits;

  const std::optional<RawTraitValue>& operator[](Trait t) const {
    return traits[static_cast<std::size_t>(t)];
  }
  bool complete() const;
  std::vector<char> missing() const;
};

/// Builds a fully-populated RawPrediction from plain numbers (no spans).
RawPrediction raw_from_values(const std::array<double, kTraitCount>& values);

/// Finds the last "<alias><sep><number>[%]" mention of each trait.
///
/// Aliases are the trait letters O/C/E/A/N standing alone, or the full trait
/// names. A lowercase letter needs a ':', '=' or '-' separator; uppercase
/// letters and full names also accept plain blanks. An alias may be closed by
/// quotes or '*' (JSON keys, markdown bold), in which case a separator is
/// required. Names are matched case-insensitively.
RawPrediction extract_raw_traits(std::string_view text);

enum class MappingKind { ProportionScaled, PercentilePassthrough, UnknownPercentileClipped, Unparsable };

/// Log label; the clip branch is spelled "unknown->percentile_clipped".
std::string_view mapping_kind_label(MappingKind k) noexcept;

struct MappingDiagnostic {
  MappingKind kind = MappingKind::Unparsable;
  std::vector<std::string> per_trait_notes;
};

struct ScaledPrediction {
  TraitVector traits;
  MappingDiagnostic diagnostic;
};

/// Unified percentile mapping, first matching branch wins:
///   all in [0,1]   -> x * 100
///   all in [0,100] -> x
///   otherwise      -> clip(x, 0, 100)
/// Throws UnparsableError when any trait is absent.
ScaledPrediction apply_scale(const RawPrediction& raw);

/// Non-throwing variant; `traits` is empty iff kind == Unparsable.
struct ScaleOutcome {
  std::optional<TraitVector> traits;
  MappingDiagnostic diagnostic;
};
ScaleOutcome try_apply_scale(const RawPrediction& raw);

/// Append-only JSONL sink with fields {sample_id, kind, notes}. Thread-safe.
class DiagnosticsLog {
 public:
  explicit DiagnosticsLog(std::ostream& out) : out_(out) {}

  void record(std::string_view sample_id, const MappingDiagnostic& diag);

 private:
  std::ostream& out_;
  std::mutex mu_;
};

std::string diagnostic_json_line(std::string_view sample_id, const MappingDiagnostic& diag);

}  // namespace psybench
