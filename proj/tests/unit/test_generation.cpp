#include <gtest/gtest.h>

#include <filesystem>

#include "json.hpp"
#include "psybench/errors.hpp"
#include "psybench/generation.hpp"
#include "psybench/scale_parser.hpp"
#include "psybench/stub_server.hpp"
#include "psybench/util.hpp"

using namespace psybench;
using nlohmann::json;

namespace {

class StubFixture : public ::testing::Test {
 protected:
  void SetUp() override { server.start(); }
  void TearDown() override { server.stop(); }

  ClientConfig config() const {
    ClientConfig c;
    c.api_base = server.base_url();
    c.backoff_base = std::chrono::milliseconds(1);
    c.timeout = std::chrono::milliseconds(5000);
    return c;
  }

  StubServer server;
};

const std::string kPersonaPrompt =
    "<O=80><C=20><E=60><A=40><N=0><SCENE=Family>\n<INSTR>\nDescribe yourself.\n<RESP>";

}  // namespace

TEST(Presets, Values) {
  const auto c = corpus_synthesis_preset();
  EXPECT_DOUBLE_EQ(c.temperature, 0.85);
  EXPECT_DOUBLE_EQ(c.top_p, 0.95);
  EXPECT_EQ(c.max_new_tokens, 512);
  const auto p = persona_description_preset();
  EXPECT_DOUBLE_EQ(p.temperature, 0.25);
  EXPECT_DOUBLE_EQ(p.top_p, 1.0);
  const auto s = trait_scoring_preset();
  EXPECT_EQ(s.temperature, 0.0);
  EXPECT_TRUE(s.deterministic());
  EXPECT_FALSE(c.deterministic());
}

TEST(Presets, Validation) {
  auto p = corpus_synthesis_preset();
  p.temperature = -0.1;
  EXPECT_THROW(validate_preset(p), std::invalid_argument);
  p = corpus_synthesis_preset();
  p.top_p = 0.0;
  EXPECT_THROW(validate_preset(p), std::invalid_argument);
  p.top_p = 1.5;
  EXPECT_THROW(validate_preset(p), std::invalid_argument);
  p = corpus_synthesis_preset();
  p.max_new_tokens = 0;
  EXPECT_THROW(validate_preset(p), std::invalid_argument);
}

TEST(WireFormat, RequestBodyCarriesPreset) {
  const auto body = json::parse(ChatClient::request_body("hi", corpus_synthesis_preset(), "m1", 99));
  EXPECT_EQ(body["model"], "m1");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "hi");
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.85);
  EXPECT_DOUBLE_EQ(body["top_p"].get<double>(), 0.95);
  EXPECT_EQ(body["max_tokens"], 512);
  EXPECT_EQ(body["seed"], 99);
}

TEST(WireFormat, PromptChecksumIsSha256) {
  EXPECT_EQ(prompt_checksum("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(StubReplyTest, DeterministicAtTemperatureZero) {
  const auto a = stub_reply(kPersonaPrompt, 0.0, 1, 512);
  const auto b = stub_reply(kPersonaPrompt, 0.0, 2, 512);
  EXPECT_EQ(a.content, b.content);
}

TEST(StubReplyTest, SeedMattersWhenSampling) {
  const auto a = stub_reply(kPersonaPrompt, 0.85, 1, 512);
  const auto b = stub_reply(kPersonaPrompt, 0.85, 1, 512);
  const auto c = stub_reply(kPersonaPrompt, 0.85, 2, 512);
  EXPECT_EQ(a.content, b.content);
  EXPECT_NE(a.content, c.content);
}

TEST(StubReplyTest, PersonaReplyParsesNearTarget) {
  const auto reply = stub_reply(kPersonaPrompt, 0.85, 5, 512);
  const auto out = try_apply_scale(extract_raw_traits(reply.content));
  ASSERT_TRUE(out.traits) << reply.content;
  EXPECT_NEAR((*out.traits)[Trait::O], 80, 30);
  EXPECT_NEAR((*out.traits)[Trait::N], 0, 30);
}

TEST_F(StubFixture, SingleRequestRoundTrip) {
  ChatClient client(config());
  const auto rec = client.generate(std::string_view(kPersonaPrompt), corpus_synthesis_preset(), "stub", 17);
  EXPECT_FALSE(rec.response.empty());
  EXPECT_EQ(rec.prompt_checksum, prompt_checksum(kPersonaPrompt));
  EXPECT_EQ(rec.retry_count, 0);
  EXPECT_EQ(rec.seed, 17u);
  EXPECT_EQ(rec.preset, "corpus_synthesis");
  ASSERT_TRUE(rec.seed_honored.has_value());
  EXPECT_TRUE(*rec.seed_honored);
  EXPECT_EQ(rec.response, stub_reply(kPersonaPrompt, 0.85, 17, 512).content);
}

TEST_F(StubFixture, RetriesTransientFailures) {
  server.fail_next(2, 503);
  ChatClient client(config());
  const auto rec = client.generate(std::string_view(kPersonaPrompt), trait_scoring_preset(), "stub", 1);
  EXPECT_EQ(rec.retry_count, 2);
  EXPECT_EQ(server.request_count(), 3u);
}

TEST_F(StubFixture, RetriesRateLimit) {
  server.fail_next(1, 429);
  ChatClient client(config());
  EXPECT_EQ(client.generate(std::string_view(kPersonaPrompt), trait_scoring_preset(), "stub", 1).retry_count, 1);
}

TEST_F(StubFixture, GivesUpAfterMaxAttempts) {
  server.fail_next(10, 500);
  auto cfg = config();
  cfg.max_attempts = 3;
  ChatClient client(cfg);
  try {
    client.generate(std::string_view(kPersonaPrompt), trait_scoring_preset(), "stub", 1);
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 500);
  }
  EXPECT_EQ(server.request_count(), 3u);
}

TEST_F(StubFixture, ClientErrorNotRetried) {
  server.fail_next(1, 400);
  ChatClient client(config());
  EXPECT_THROW(client.generate(std::string_view(kPersonaPrompt), trait_scoring_preset(), "stub", 1), TransportError);
  EXPECT_EQ(server.request_count(), 1u);
}

TEST_F(StubFixture, BatchPreservesOrderAndIsolatesErrors) {
  ChatClient client(config());
  std::vector<BatchRequest> reqs;
  for (int i = 0; i < 12; ++i) {
    std::string prompt = kPersonaPrompt + std::to_string(i);
    if (i == 5) prompt += "[[stub:fail]]";
    reqs.push_back({prompt, static_cast<std::uint64_t>(i)});
  }
  const auto out = generate_batch(client, reqs, corpus_synthesis_preset(), "stub", 4);
  ASSERT_EQ(out.size(), reqs.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i == 5) {
      ASSERT_TRUE(std::holds_alternative<ItemError>(out[i]));
      EXPECT_EQ(std::get<ItemError>(out[i]).index, 5u);
      continue;
    }
    ASSERT_TRUE(std::holds_alternative<GenerationRecord>(out[i])) << i;
    EXPECT_EQ(std::get<GenerationRecord>(out[i]).prompt_checksum, prompt_checksum(reqs[i].prompt_text));
  }
}

TEST_F(StubFixture, BatchIndependentOfParallelism) {
  ChatClient client(config());
  std::vector<BatchRequest> reqs;
  for (int i = 0; i < 16; ++i) reqs.push_back({kPersonaPrompt + "#" + std::to_string(i), 1000u + i});
  const auto serial = generate_batch(client, reqs, corpus_synthesis_preset(), "stub", 1);
  const auto parallel = generate_batch(client, reqs, corpus_synthesis_preset(), "stub", 8);
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    EXPECT_EQ(std::get<GenerationRecord>(serial[i]).response, std::get<GenerationRecord>(parallel[i]).response);
  }
}

TEST_F(StubFixture, TranscriptMirrorsRequests) {
  const auto path = std::filesystem::temp_directory_path() / "psybench_transcript.jsonl";
  std::filesystem::remove(path);
  auto cfg = config();
  cfg.transcript = path;
  {
    ChatClient client(cfg);
    client.generate(std::string_view(kPersonaPrompt), trait_scoring_preset(), "stub", 1);
    client.generate(std::string_view(kPersonaPrompt), trait_scoring_preset(), "stub", 2);
  }
  const auto lines = read_lines(path);
  ASSERT_EQ(lines.size(), 2u);
  const auto j = json::parse(lines[0]);
  EXPECT_EQ(j["status"], 200);
  EXPECT_EQ(j["request"]["seed"], 1);
  std::filesystem::remove(path);
}

TEST(Transport, UnreachableEndpoint) {
  ClientConfig c;
  c.api_base = "http://127.0.0.1:1/v1";
  c.max_attempts = 2;
  c.backoff_base = std::chrono::milliseconds(1);
  c.timeout = std::chrono::milliseconds(1000);
  ChatClient client(c);
  try {
    client.generate(std::string_view("x"), trait_scoring_preset(), "m", 0);
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 0);
  }
}

TEST(RateLimit, BucketSpacesRequests) {
  TokenBucket bucket(200.0, 1.0);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 6; ++i) bucket.acquire();
  const auto elapsed = std::chrono::steady_clock::now() - start;
  // 5 waits of 5 ms after the initial burst token.
  EXPECT_GE(elapsed, std::chrono::milliseconds(20));
}
