#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "psybench/errors.hpp"
#include "psybench/prompting.hpp"
#include "psybench/util.hpp"

using namespace psybench;
namespace fs = std::filesystem;

namespace {

struct Assets {
  TemplateSet templates = TemplateSet::load(default_asset_dir() / "templates");
  std::vector<ISProfile> profiles = load_is_profiles(default_asset_dir() / "samples/is_profiles.jsonl");
  std::vector<MSCFrame> frames = load_msc_frames(default_asset_dir() / "samples/msc_frames.jsonl");

  const MSCFrame& frame_in(Arena a) const {
    for (const auto& f : frames) {
      if (f.arena() == a) return f;
    }
    throw std::runtime_error("no frame for arena");
  }
};

const Assets& assets() {
  static const Assets a;
  return a;
}

TraitVector target() { return validate_trait_vector(std::array<double, 5>{0, 20, 40, 60, 80}); }

// Set PSYBENCH_UPDATE_GOLDEN=1 to rewrite golden files after an intentional
// prompt format change.
void check_golden(const std::string& name, const std::string& actual) {
  const fs::path path = fs::path(PSYBENCH_TEST_DATA_DIR) / "golden" / name;
  if (const char* u = std::getenv("PSYBENCH_UPDATE_GOLDEN"); u && std::string(u) == "1") {
    write_file(path, actual);
  }
  ASSERT_TRUE(fs::exists(path)) << path;
  EXPECT_EQ(read_file(path), actual) << "golden mismatch: " << name;
}

}  // namespace

TEST(Template, RendersSlots) {
  const std::map<std::string, std::string, std::less<>> b = {{"a", "x"}, {"bb", "yy"}};
  EXPECT_EQ(render_template("{{a}}-{{bb}}-{{a}}", b), "x-yy-x");
  EXPECT_EQ(render_template("no slots", b), "no slots");
}

TEST(Template, UnresolvedSlotNamed) {
  try {
    render_template("hello {{who}}", {});
    FAIL() << "expected TemplateUnresolvedError";
  } catch (const TemplateUnresolvedError& e) {
    EXPECT_EQ(e.slot(), "who");
  }
}

TEST(Template, SlotsInFirstAppearanceOrder) {
  EXPECT_EQ(template_slots("{{b}} {{a}} {{b}}"), (std::vector<std::string>{"b", "a"}));
}

TEST(TemplateSetTest, ChecksumsMatchFiles) {
  const auto& t = assets().templates;
  EXPECT_TRUE(t.contains("task/self_description"));
  EXPECT_TRUE(t.contains("authoring/system"));
  for (const auto& e : t.entries()) EXPECT_EQ(sha256_hex(e.text), e.sha256) << e.id;
}

TEST(TemplateSetTest, TwelveAuthoringComponents) {
  int is = 0, msc = 0;
  for (const auto& e : assets().templates.entries()) {
    is += e.id.rfind("is/", 0) == 0;
    msc += e.id.rfind("msc/", 0) == 0;
  }
  EXPECT_EQ(is, 4);
  EXPECT_EQ(msc, 8);
}

TEST(TemplateSetTest, TamperedFileRejected) {
  const fs::path dir = fs::temp_directory_path() / "psybench_tpl_tamper";
  fs::remove_all(dir);
  fs::copy(default_asset_dir() / "templates", dir, fs::copy_options::recursive);
  write_file(dir / "task/role_play.txt", "tampered {{scenario}}\n");
  EXPECT_THROW(TemplateSet::load(dir), SchemaError);
  TemplateSet::rehash_manifest(dir);
  EXPECT_NO_THROW(TemplateSet::load(dir));
  fs::remove_all(dir);
}

TEST(PromptBuilderTest, HeaderCarriesTargetAndScene) {
  const auto& a = assets();
  PromptBuilder b(a.templates);
  const auto p = b.build(a.profiles[0], a.frame_in(Arena::Romantic), target(), TaskFamily::SelfDescription,
                         IsDomain::Edu);
  EXPECT_EQ(p.header, "<O=0><C=20><E=40><A=60><N=80><SCENE=Romantic>\n");
  EXPECT_EQ(p.full_text.rfind(p.header, 0), 0u);
  EXPECT_NE(p.context.find("<ARENAS=Working|Family|Friendship|Strangers|Solitary|Romantic|Learning|Public>"),
            std::string::npos);
}

TEST(PromptBuilderTest, StructureAndMarker) {
  const auto& a = assets();
  PromptBuilder b(a.templates);
  const auto p = b.build(a.profiles[1], a.frames[0], target(), TaskFamily::RolePlay, IsDomain::Life);
  EXPECT_EQ(p.response_marker_offset, p.full_text.size());
  EXPECT_TRUE(p.full_text.ends_with("<RESP>"));
  const auto instr = p.full_text.find("<INSTR>");
  ASSERT_NE(instr, std::string::npos);
  EXPECT_EQ(p.full_text.substr(instr + 7, p.instruction_section.size()), p.instruction_section);
}

TEST(PromptBuilderTest, DomainOrderFixed) {
  const auto& a = assets();
  PromptBuilder b(a.templates);
  const auto p = b.build(a.profiles[0], a.frames[0], target(), TaskFamily::SelfDescription, IsDomain::Edu);
  const auto e = p.context.find("[edu] ");
  const auto l = p.context.find("[life] ");
  const auto s = p.context.find("[socctx] ");
  const auto c = p.context.find("[capital] ");
  ASSERT_NE(e, std::string::npos);
  EXPECT_LT(e, l);
  EXPECT_LT(l, s);
  EXPECT_LT(s, c);
}

TEST(PromptBuilderTest, Deterministic) {
  const auto& a = assets();
  PromptBuilder b(a.templates);
  for (TaskFamily f : kTaskFamilies) {
    const auto x = b.build(a.profiles[2], a.frames[3], target(), f, IsDomain::Capital);
    const auto y = b.build(a.profiles[2], a.frames[3], target(), f, IsDomain::Capital);
    EXPECT_EQ(x.full_text, y.full_text);
  }
}

TEST(PromptBuilderTest, RemovedDomainLeavesNoTrace) {
  const auto& a = assets();
  PromptOptions o;
  o.removed_domain = IsDomain::Socctx;
  PromptBuilder b(a.templates, o);
  const auto p = b.build(a.profiles[0], a.frames[0], target(), TaskFamily::SelfDescription, IsDomain::Edu);
  EXPECT_EQ(p.context.find("[socctx]"), std::string::npos);
  EXPECT_EQ(p.full_text.find(a.profiles[0].socctx()), std::string::npos);
}

TEST(PromptBuilderTest, RemovedArenaTagDropped) {
  const auto& a = assets();
  PromptOptions o;
  o.removed_arena_tag = Arena::Solitary;
  PromptBuilder b(a.templates, o);
  const auto p = b.build(a.profiles[0], a.frames[0], target(), TaskFamily::SelfDescription, IsDomain::Edu);
  EXPECT_NE(p.context.find("<ARENAS=Working|Family|Friendship|Strangers|Romantic|Learning|Public>"),
            std::string::npos);
}

TEST(PromptBuilderTest, GoldenPrompts) {
  const auto& a = assets();
  PromptBuilder b(a.templates);
  check_golden("prompt_self_description.txt",
               b.build(a.profiles[0], a.frame_in(Arena::Romantic), target(), TaskFamily::SelfDescription,
                       IsDomain::Edu)
                   .full_text);
  check_golden("prompt_role_play.txt",
               b.build(a.profiles[1], a.frame_in(Arena::Working), target(), TaskFamily::RolePlay,
                       IsDomain::Socctx)
                   .full_text);
  check_golden("prompt_decision_probe.txt",
               b.build(a.profiles[2], a.frame_in(Arena::Public), target(), TaskFamily::DecisionProbe,
                       IsDomain::Capital)
                   .full_text);
  check_golden("authoring_msc_romantic.txt", render_authoring_prompt(a.templates, target(), "msc/romantic"));
}

TEST(LossMask, CompletionOnlyAndHeaderOnly) {
  StructuredPrompt p;
  p.full_text = "abc<RESP>";
  p.response_marker_offset = p.full_text.size();
  const std::vector<CharSpan> toks = {{0, 3}, {3, 9}, {9, 12}, {12, 14}};
  EXPECT_EQ(loss_mask(p, toks, 5), (std::vector<bool>{false, false, true, true}));
}

TEST(LossMask, StraddlingTokenMaskedOut) {
  StructuredPrompt p;
  p.full_text = "abc<RESP>";
  p.response_marker_offset = 9;
  const std::vector<CharSpan> toks = {{0, 8}, {8, 11}, {11, 12}};
  EXPECT_EQ(loss_mask(p, toks, 3), (std::vector<bool>{false, false, true}));
}

TEST(LossMask, SpansMustTile) {
  StructuredPrompt p;
  p.full_text = "abc<RESP>";
  p.response_marker_offset = 9;
  const std::vector<CharSpan> gap = {{0, 5}, {6, 12}};
  const std::vector<CharSpan> short_cover = {{0, 9}, {9, 10}};
  EXPECT_THROW(loss_mask(p, gap, 3), SpanMismatchError);
  EXPECT_THROW(loss_mask(p, short_cover, 3), SpanMismatchError);
}

// Property: with random tilings that never cross the marker, the number of
// true entries equals the number of completion tokens.
TEST(LossMask, PropertyCountsCompletionTokens) {
  Rng rng(3);
  for (int it = 0; it < 500; ++it) {
    StructuredPrompt p;
    p.full_text = std::string(1 + uniform_below(rng, 40), 'x');
    p.response_marker_offset = p.full_text.size();
    const std::size_t comp = uniform_below(rng, 30);
    std::vector<CharSpan> toks;
    std::size_t completion_tokens = 0;
    for (std::size_t pos = 0; pos < p.full_text.size() + comp;) {
      const std::size_t limit = pos < p.response_marker_offset ? p.response_marker_offset : p.full_text.size() + comp;
      const std::size_t len = 1 + uniform_below(rng, std::min<std::size_t>(4, limit - pos));
      toks.push_back({pos, pos + len});
      completion_tokens += pos >= p.response_marker_offset;
      pos += len;
    }
    const auto m = loss_mask(p, toks, comp);
    ASSERT_EQ(static_cast<std::size_t>(std::count(m.begin(), m.end(), true)), completion_tokens);
  }
}

TEST(Authoring, ContainsPreviewAnchors) {
  const auto text = render_authoring_prompt(assets().templates, target(), "is/edu");
  EXPECT_NE(text.find("80"), std::string::npos);
  EXPECT_EQ(text.find("{{"), std::string::npos);
}
