#include "psybench/prompting.hpp"

#include <algorithm>
#include <cstdlib>

#include "json.hpp"
#include "psybench/errors.hpp"
#include "psybench/util.hpp"

#ifndef PSYBENCH_DEFAULT_ASSET_DIR
#define PSYBENCH_DEFAULT_ASSET_DIR "assets"
#endif

namespace psybench {

namespace {

template <typename Fn>
void for_each_slot(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = text.find("{{", pos);
    if (open == std::string_view::npos) return;
    const std::size_t close = text.find("}}", open + 2);
    if (close == std::string_view::npos) return;
    fn(open, close + 2, text.substr(open + 2, close - open - 2));
    pos = close + 2;
  }
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

std::string render_template(std::string_view text,
                            const std::map<std::string, std::string, std::less<>>& bindings) {
  std::string out;
  out.reserve(text.size());
  std::size_t copied = 0;
  for_each_slot(text, [&](std::size_t begin, std::size_t end, std::string_view slot) {
    auto it = bindings.find(slot);
    if (it == bindings.end()) throw TemplateUnresolvedError(std::string(slot));
    out.append(text.substr(copied, begin - copied));
    out.append(it->second);
    copied = end;
  });
  out.append(text.substr(copied));
  return out;
}

std::vector<std::string> template_slots(std::string_view text) {
  std::vector<std::string> out;
  for_each_slot(text, [&](std::size_t, std::size_t, std::string_view slot) {
    if (std::find(out.begin(), out.end(), slot) == out.end()) out.emplace_back(slot);
  });
  return out;
}

// --- TemplateSet ------------------------------------------------------------

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("bad template manifest " + manifest_path.string() + ": " + e.what());
  }
  TemplateSet set;
  for (const auto& e : m.at("templates")) {
    TemplateEntry t;
    t.id = e.at("id").get<std::string>();
    t.file = e.at("file").get<std::string>();
    t.version = e.value("version", 1);
    t.sha256 = e.at("sha256").get<std::string>();
    t.provenance = e.value("provenance", "");
    t.text = read_file(dir / t.file);
    const std::string actual = sha256_hex(t.text);
    if (actual != t.sha256) {
      throw SchemaError("checksum mismatch for template '" + t.id + "' (" + t.file +
                        "): manifest " + t.sha256 + ", file " + actual);
    }
    set.entries_.push_back(std::move(t));
  }
  return set;
}

void TemplateSet::rehash_manifest(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  auto m = nlohmann::json::parse(read_file(manifest_path));
  for (auto& e : m.at("templates")) {
    e["sha256"] = sha256_hex(read_file(dir / e.at("file").get<std::string>()));
  }
  write_file(manifest_path, m.dump(2) + "\n");
}

const TemplateEntry& TemplateSet::get(std::string_view id) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.id == id; });
  if (it == entries_.end()) throw SchemaError("no template with id '" + std::string(id) + "'");
  return *it;
}

bool TemplateSet::contains(std::string_view id) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.id == id; });
}

std::map<std::string, std::string> TemplateSet::checksums() const {
  std::map<std::string, std::string> out;
  for (const auto& e : entries_) out[e.id] = e.sha256;
  return out;
}

std::filesystem::path default_asset_dir() {
  if (const char* env = std::getenv("PSYBENCH_ASSETS"); env && *env) return env;
  return PSYBENCH_DEFAULT_ASSET_DIR;
}

std::string task_template_id(TaskFamily f) { return "task/" + std::string(task_family_name(f)); }

// --- PromptBuilder ----------------------------------------------------------

PromptBuilder::PromptBuilder(const TemplateSet& templates, PromptOptions options)
    : templates_(&templates), options_(options) {}

StructuredPrompt PromptBuilder::build(const ISProfile& is, const MSCFrame& frame,
                                      const TraitVector& target, TaskFamily family,
                                      IsDomain emphasis) const {
  StructuredPrompt p;

  for (Trait t : kTraits) {
    p.header += '<';
    p.header += trait_letter(t);
    p.header += '=';
    p.header += format_number(target[t]);
    p.header += '>';
  }
  p.header += tags::kScenePrefix;
  p.header += arena_name(frame.arena());
  p.header += ">\n";

  std::map<std::string, std::string, std::less<>> bind;
  bind["arena"] = std::string(arena_name(frame.arena()));
  bind["arena_label"] = std::string(arena_label(frame.arena()));
  bind["roles"] = frame.roles();
  bind["counterpart"] = frame.counterpart();
  bind["norms"] = join(frame.norms(), "; ");
  bind["stakes"] = frame.stakes();
  bind["subskills"] = join(frame.subskills(), "; ");
  bind["feedback"] = frame.feedback();
  for (IsDomain d : kIsDomains) {
    const bool removed = options_.removed_domain == d;
    bind["is." + std::string(is_domain_key(d))] = removed ? std::string() : is.domain(d);
  }
  bind["emphasis"] = std::string(is_domain_label(emphasis));

  std::string& ctx = p.context;
  ctx += tags::kArenasPrefix;
  bool first = true;
  for (Arena a : kArenas) {
    if (options_.removed_arena_tag == a) continue;
    if (!first) ctx += '|';
    ctx += arena_name(a);
    first = false;
  }
  ctx += ">\n";
  for (IsDomain d : kIsDomains) {
    if (options_.removed_domain == d) continue;
    ctx += '[';
    ctx += is_domain_key(d);
    ctx += "] ";
    ctx += is.domain(d);
    ctx += '\n';
  }
  ctx += "[frame " + frame.id() + "]\n";
  ctx += "roles: " + frame.roles() + "\n";
  ctx += "counterpart: " + frame.counterpart() + "\n";
  ctx += "norms: " + bind["norms"] + "\n";
  ctx += "stakes: " + frame.stakes() + "\n";
  ctx += "subskills: " + bind["subskills"] + "\n";
  ctx += "feedback: " + frame.feedback() + "\n";
  const std::string scenario = render_template(frame.template_text(), bind);
  ctx += "[scenario] " + scenario + "\n";
  bind["scenario"] = scenario;

  p.instruction_section =
      "\n" + render_template(templates_->get(task_template_id(family)).text, bind);
  if (p.instruction_section.back() != '\n') p.instruction_section += '\n';

  p.full_text = p.header + p.context;
  p.full_text += tags::kInstr;
  p.full_text += p.instruction_section;
  p.full_text += tags::kResp;
  p.response_marker_offset = p.full_text.size();
  return p;
}

std::vector<bool> loss_mask(const StructuredPrompt& prompt, std::span<const CharSpan> tokens,
                            std::size_t completion_size) {
  const std::size_t total = prompt.full_text.size() + completion_size;
  if (tokens.empty()) {
    if (total == 0) return {};
    throw SpanMismatchError("no token spans for non-empty text");
  }
  std::size_t expected_begin = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].begin != expected_begin || tokens[i].end <= tokens[i].begin) {
      throw SpanMismatchError("token " + std::to_string(i) + " does not continue the tiling at " +
                              std::to_string(expected_begin));
    }
    expected_begin = tokens[i].end;
  }
  if (expected_begin != total) {
    throw SpanMismatchError("token spans cover " + std::to_string(expected_begin) + " of " +
                            std::to_string(total) + " characters");
  }
  std::vector<bool> mask(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    mask[i] = tokens[i].begin >= prompt.response_marker_offset;
  }
  return mask;
}

std::string render_authoring_prompt(const TemplateSet& templates, const TraitVector& target,
                                    std::string_view component_id) {
  std::map<std::string, std::string, std::less<>> anchors;
  for (Trait t : kTraits) anchors[std::string(1, trait_letter(t))] = format_number(target[t]);
  std::string out = templates.get("authoring/system").text;
  out += '\n';
  out += render_template(templates.get("authoring/preview").text, anchors);
  out += '\n';
  out += render_template(templates.get(component_id).text, anchors);
  return out;
}

}  // namespace psybench
