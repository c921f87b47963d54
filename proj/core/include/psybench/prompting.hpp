#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psybench/schema.hpp"

namespace psybench {

/// Control tag spellings. Changing any of these changes every prompt byte, so
/// bump kPromptFormatVersion alongside.
namespace tags {
inline constexpr std::string_view kInstr = "<INSTR>";
inline constexpr std::string_view kResp = "<RESP>";
inline constexpr std::string_view kScenePrefix = "<SCENE=";
inline constexpr std::string_view kArenasPrefix = "<ARENAS=";
}  // namespace tags

inline constexpr int kPromptFormatVersion = 1;

/// Replaces every {{slot}} with its binding. Throws TemplateUnresolvedError
/// for a slot with no binding.
std::string render_template(std::string_view text,
                            const std::map<std::string, std::string, std::less<>>& bindings);

/// Slot names referenced by a template, in order of first appearance.
std::vector<std::string> template_slots(std::string_view text);

struct TemplateEntry {
  std::string id;
  std::string file;
  int version = 1;
  std::string sha256;
  std::string provenance;
  std::string text;
};

/// Versioned template assets described by `manifest.json` in a directory.
class TemplateSet {
 public:
  /// Loads every template listed in the manifest and verifies its checksum.
  /// Throws SchemaError on a missing file or checksum mismatch.
  static TemplateSet load(const std::filesystem::path& dir);

  /// Recomputes checksums of the listed files and rewrites the manifest.
  static void rehash_manifest(const std::filesystem::path& dir);

  const TemplateEntry& get(std::string_view id) const;
  bool contains(std::string_view id) const;
  const std::vector<TemplateEntry>& entries() const noexcept { return entries_; }

  /// id -> sha256, for corpus manifests.
  std::map<std::string, std::string> checksums() const;

 private:
  std::vector<TemplateEntry> entries_;
};

/// Asset directory: $PSYBENCH_ASSETS if set, else the path baked in at build time.
std::filesystem::path default_asset_dir();

std::string task_template_id(TaskFamily f);  // "task/self_description", ...

struct StructuredPrompt {
  std::string header;               // trait tags + scene tag
  std::string context;              // arena list, IS domains, frame fields
  std::string instruction_section;  // text between <INSTR> and <RESP>
  std::size_t response_marker_offset = 0;  // index just past <RESP>
  std::string full_text;
};

/// Components omitted from prompts during single-factor ablations.
struct PromptOptions {
  std::optional<IsDomain> removed_domain;
  std::optional<Arena> removed_arena_tag;
};

/// Builds the fixed conditioning surface binding a target profile, an IS
/// profile and an MSC frame.
class PromptBuilder {
 public:
  PromptBuilder(const TemplateSet& templates, PromptOptions options = {});

  StructuredPrompt build(const ISProfile& is, const MSCFrame& frame, const TraitVector& target,
                         TaskFamily family, IsDomain emphasis) const;

  const PromptOptions& options() const noexcept { return options_; }

 private:
  const TemplateSet* templates_;
  PromptOptions options_;
};

struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Training mask over tokens of prompt.full_text + completion: true only for
/// tokens that begin at or after the end of <RESP>. Tokens straddling the
/// boundary are masked out. Throws SpanMismatchError unless the spans tile
/// the text exactly.
std::vector<bool> loss_mask(const StructuredPrompt& prompt, std::span<const CharSpan> tokens,
                            std::size_t completion_size);

/// System text, the private trait preview and one IS or MSC authoring
/// template ("is/edu", "msc/romantic", ...), joined by blank lines.
std::string render_authoring_prompt(const TemplateSet& templates, const TraitVector& target,
                                    std::string_view component_id);

}  // namespace psybench
