#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace psybench {

// ---------------------------------------------------------------------------
// Big Five traits
// ---------------------------------------------------------------------------

enum class Trait : std::uint8_t { O = 0, C, E, A, N };

inline constexpr std::size_t kTraitCount = 5;
inline constexpr std::array<Trait, kTraitCount> kTraits = {Trait::O, Trait::C, Trait::E,
                                                           Trait::A, Trait::N};

char trait_letter(Trait t) noexcept;
std::string_view trait_name(Trait t) noexcept;  // lower-case full name

/// Five-dimensional Big Five profile in percentile units, ordered (O, C, E, A, N).
///
/// Only constructible through validate_trait_vector, so every live instance has
/// all components in [0, 100].
class TraitVector {
 public:
  TraitVector() = default;  // all zeros

  double operator[](Trait t) const noexcept { return values_[static_cast<std::size_t>(t)]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  const std::array<double, kTraitCount>& values() const noexcept { return values_; }

  double o() const noexcept { return values_[0]; }
  double c() const noexcept { return values_[1]; }
  double e() const noexcept { return values_[2]; }
  double a() const noexcept { return values_[3]; }
  double n() const noexcept { return values_[4]; }

  friend bool operator==(const TraitVector&, const TraitVector&) = default;
  friend auto operator<=>(const TraitVector&, const TraitVector&) = default;

 private:
  friend TraitVector validate_trait_vector(std::span<const double, kTraitCount>);
  explicit TraitVector(const std::array<double, kTraitCount>& v) : values_(v) {}

  std::array<double, kTraitCount> values_{};
};

/// Throws NonFiniteError for NaN/inf, OutOfRangeError for the first component
/// outside [0, 100].
TraitVector validate_trait_vector(std::span<const double, kTraitCount> v);
TraitVector validate_trait_vector(const std::array<double, kTraitCount>& v);

/// Compact "o-c-e-a-n" label, e.g. "0-20-40-60-80".
std::string trait_key(const TraitVector& t);

inline constexpr std::array<double, 6> kGridLevels = {0, 20, 40, 60, 80, 100};
inline constexpr std::size_t kGridSize = 6 * 6 * 6 * 6 * 6;

/// All of {0,20,...,100}^5 in lexicographic order, O outermost and N innermost.
std::vector<TraitVector> enumerate_grid();

/// k distinct configurations drawn uniformly without replacement.
std::vector<TraitVector> subset_configs(std::span<const TraitVector> grid, std::size_t k,
                                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Individual Structure
// ---------------------------------------------------------------------------

enum class IsDomain : std::uint8_t { Edu = 0, Life, Socctx, Capital };

inline constexpr std::array<IsDomain, 4> kIsDomains = {IsDomain::Edu, IsDomain::Life,
                                                       IsDomain::Socctx, IsDomain::Capital};

std::string_view is_domain_key(IsDomain d) noexcept;    // "edu", "life", ...
std::string_view is_domain_label(IsDomain d) noexcept;  // "Educational Trajectory", ...
std::optional<IsDomain> parse_is_domain(std::string_view name);

inline constexpr int kSchemaVersion = 1;

/// Scans text for explicit trait names or letter+number scores. Returns the
/// offending match, if any.
std::optional<std::string> find_trait_leakage(std::string_view text);

class ISProfile {
 public:
  /// Throws SchemaError on an empty domain and LeakageError on trait leakage.
  ISProfile(std::string edu, std::string life, std::string socctx, std::string capital);

  const std::string& id() const noexcept { return id_; }
  const std::string& edu() const noexcept { return edu_; }
  const std::string& life() const noexcept { return life_; }
  const std::string& socctx() const noexcept { return socctx_; }
  const std::string& capital() const noexcept { return capital_; }
  const std::string& domain(IsDomain d) const noexcept;

 private:
  std::string edu_;
  std::string life_;
  std::string socctx_;
  std::string capital_;
  std::string id_;
};

// ---------------------------------------------------------------------------
// Multi-Scenario Contexting
// ---------------------------------------------------------------------------

enum class Arena : std::uint8_t {
  Working = 0,
  Family,
  Friendship,
  Strangers,
  Solitary,
  Romantic,
  Learning,
  Public
};

inline constexpr std::array<Arena, 8> kArenas = {Arena::Working,  Arena::Family,
                                                 Arena::Friendship, Arena::Strangers,
                                                 Arena::Solitary, Arena::Romantic,
                                                 Arena::Learning, Arena::Public};

std::string_view arena_name(Arena a) noexcept;   // "Romantic"
std::string_view arena_label(Arena a) noexcept;  // "Romantic and Intimate Communication"
std::optional<Arena> parse_arena(std::string_view name);

struct MSCFrameFields {
  Arena arena = Arena::Working;
  std::string roles;
  std::string counterpart;
  std::vector<std::string> norms;
  std::string stakes;
  std::vector<std::string> subskills;
  std::string template_text;
  std::string feedback;
};

class MSCFrame {
 public:
  /// `index` is the frame's position within its arena; it forms the id.
  /// Throws SchemaError when the template has no {{slot}}.
  MSCFrame(MSCFrameFields fields, std::size_t index);

  const std::string& id() const noexcept { return id_; }
  Arena arena() const noexcept { return f_.arena; }
  const std::string& roles() const noexcept { return f_.roles; }
  const std::string& counterpart() const noexcept { return f_.counterpart; }
  const std::vector<std::string>& norms() const noexcept { return f_.norms; }
  const std::string& stakes() const noexcept { return f_.stakes; }
  const std::vector<std::string>& subskills() const noexcept { return f_.subskills; }
  const std::string& template_text() const noexcept { return f_.template_text; }
  const std::string& feedback() const noexcept { return f_.feedback; }

 private:
  MSCFrameFields f_;
  std::string id_;
};

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

enum class TaskFamily : std::uint8_t { SelfDescription = 0, RolePlay, DecisionProbe };

inline constexpr std::array<TaskFamily, 3> kTaskFamilies = {
    TaskFamily::SelfDescription, TaskFamily::RolePlay, TaskFamily::DecisionProbe};

std::string_view task_family_name(TaskFamily f) noexcept;  // "self_description", ...
std::optional<TaskFamily> parse_task_family(std::string_view name);

inline constexpr int kMaxReplicates = 5;

struct PersonaSample {
  std::string sample_id;
  std::string prompt;
  std::string completion;
  TraitVector target;
  TaskFamily task_family = TaskFamily::SelfDescription;
  std::string is_id;
  std::string frame_id;
  Arena arena = Arena::Working;
  IsDomain emphasis = IsDomain::Edu;
  int replicate_index = 0;  // in [0, kMaxReplicates)
  bool truncated = false;
  std::optional<TraitVector> scorer_traits;
  std::optional<double> scorer_confidence;
  std::vector<std::string> diagnostics;
};

// ---------------------------------------------------------------------------
// JSONL I/O
// ---------------------------------------------------------------------------

ISProfile parse_is_profile(std::string_view json_line);
MSCFrame parse_msc_frame(std::string_view json_line, std::size_t index_in_arena);

std::vector<ISProfile> load_is_profiles(const std::filesystem::path& path);
/// Frame ids are assigned per arena in file order.
std::vector<MSCFrame> load_msc_frames(const std::filesystem::path& path);

std::string to_json_line(const ISProfile& p);
std::string to_json_line(const MSCFrame& f);
std::string to_json_line(const PersonaSample& s);
PersonaSample parse_persona_sample(std::string_view json_line);

}  // namespace psybench
