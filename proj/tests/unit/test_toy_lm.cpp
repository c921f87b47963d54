#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "psybench/errors.hpp"
#include "psybench/toy_lm.hpp"
#include "psybench/util.hpp"

using namespace psybench;

namespace {

const std::string kAlpha = "abcdefgh ";

TraitVector tv(std::array<double, 5> v) { return validate_trait_vector(v); }

ToySequence random_seq(Rng& rng, std::size_t len, bool with_mask) {
  ToySequence s;
  for (std::size_t i = 0; i < len; ++i) s.text += kAlpha[uniform_below(rng, kAlpha.size())];
  if (with_mask) {
    const std::size_t prefix = uniform_below(rng, len);
    for (std::size_t i = 0; i < len; ++i) s.mask.push_back(i >= prefix);
  }
  return s;
}

ToyBatch sft_batch(Rng& rng) {
  ToyBatch b;
  for (int i = 0; i < 3; ++i) {
    b.sft.push_back({random_seq(rng, 6 + uniform_below(rng, 10), i % 2 == 0), tv({10, 20, 30, 40, 50}),
                     tv({50, 50, 50, 50, 50})});
  }
  return b;
}

ToyBatch dpo_batch(Rng& rng) {
  ToyBatch b;
  for (int i = 0; i < 3; ++i) {
    b.dpo.push_back({random_seq(rng, 5 + uniform_below(rng, 8), true), random_seq(rng, 5 + uniform_below(rng, 8), true)});
  }
  return b;
}

// Independent log-prob oracle: explicit softmax in long double.
long double oracle_logprob(const ToyLM& m, std::size_t ctx, std::size_t y) {
  long double z = 0;
  for (std::size_t j = 0; j < m.vocab(); ++j) z += std::exp(static_cast<long double>(m.logit(ctx, j)));
  return static_cast<long double>(m.logit(ctx, y)) - std::log(z);
}

}  // namespace

TEST(ToyModel, ConstructionRules) {
  EXPECT_THROW(ToyLM(""), std::invalid_argument);
  EXPECT_THROW(ToyLM("aa"), std::invalid_argument);
  EXPECT_THROW(ToyLM(std::string(33, 'x')), std::invalid_argument);
  EXPECT_NO_THROW(ToyLM(std::string(kToyAlphabet)));
  ToyLM m("abc");
  EXPECT_EQ(m.params().size(), 4u * 3u);
  EXPECT_THROW(m.index_of('z'), UnknownSymbolError);
}

TEST(ToyModel, UniformModelLogProbs) {
  ToyLM m("abcd");
  const auto lp = m.log_probs({"abca", {}});
  ASSERT_EQ(lp.logprobs.size(), 4u);
  for (double v : lp.logprobs) EXPECT_NEAR(v, -std::log(4.0), 1e-15);
}

TEST(ToyModel, LogProbsMatchOracle) {
  const auto m = ToyLM::random(kAlpha, 5, 3.0);
  const std::string text = "bad cafe  hg";
  const auto lp = m.log_probs({text, {}});
  std::size_t ctx = m.bos();
  for (std::size_t i = 0; i < text.size(); ++i) {
    const std::size_t y = m.index_of(text[i]);
    EXPECT_NEAR(lp.logprobs[i], static_cast<double>(oracle_logprob(m, ctx, y)), 1e-13);
    ctx = y;
  }
}

TEST(ToyModel, ProjectionStaysInAlphabet) {
  const auto p = project_to_toy_alphabet("Hello, World! 42 times; ok?\tTab");
  EXPECT_EQ(p, "hello, world. 00 times. ok. tab");
  ToyLM m{std::string(kToyAlphabet)};
  EXPECT_NO_THROW(m.log_probs({p, {}}));
}

TEST(GradCheck, SftRandomModels) {
  Rng rng(1);
  ToyObjective obj;
  obj.kind = Objective::Sft;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = ToyLM::random(kAlpha, seed);
    EXPECT_LT(grad_check(m, sft_batch(rng), obj, 1e-5), 1e-4) << seed;
  }
}

TEST(GradCheck, DpoRandomModels) {
  Rng rng(2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = ToyLM::random(kAlpha, seed);
    const auto ref = ToyLM::random(kAlpha, seed + 1000);
    ToyObjective obj;
    obj.kind = Objective::Dpo;
    obj.dpo.beta = 0.5;
    obj.reference = &ref;
    EXPECT_LT(grad_check(m, dpo_batch(rng), obj, 1e-5), 1e-4) << seed;
  }
}

TEST(GradCheck, EpsilonRange) {
  Rng rng(3);
  ToyObjective obj;
  const auto m = ToyLM::random(kAlpha, 1);
  const auto b = sft_batch(rng);
  EXPECT_THROW(grad_check(m, b, obj, 1e-9), std::invalid_argument);
  EXPECT_THROW(grad_check(m, b, obj, 1e-2), std::invalid_argument);
}

TEST(Stationarity, UniformModelOnBalancedBigrams) {
  const auto seqs = uniform_bigram_sequences(kAlpha);
  ASSERT_EQ(seqs.size(), kAlpha.size());
  // Every context, start included, is followed by each symbol equally often.
  std::map<std::pair<char, char>, int> counts;
  for (const auto& s : seqs) {
    char prev = '\x01';
    for (char c : s.text) counts[{prev, c}] += 1, prev = c;
    EXPECT_EQ(s.text.size(), kAlpha.size() * kAlpha.size() + 1);
  }
  for (const auto& [k, v] : counts) {
    EXPECT_EQ(v, k.first == '\x01' ? 1 : static_cast<int>(kAlpha.size())) << k.first << k.second;
  }
  ToyBatch b;
  for (const auto& s : seqs) b.sft.push_back({s, tv({1, 2, 3, 4, 5}), tv({1, 2, 3, 4, 5})});
  std::vector<double> g;
  toy_loss(ToyLM(kAlpha), b, ToyObjective{}, &g);
  for (double x : g) EXPECT_NEAR(x, 0.0, 1e-15);
}

TEST(Training, ZeroLearningRateIsIdentity) {
  Rng rng(5);
  const auto m = ToyLM::random(kAlpha, 3);
  const auto b = sft_batch(rng);
  const auto r = toy_train_step(m, b, ToyObjective{}, 0.0);
  EXPECT_EQ(r.model.params(), m.params());
  EXPECT_EQ(r.loss, toy_loss(m, b, ToyObjective{}));
  EXPECT_THROW(toy_train_step(m, b, ToyObjective{}, -0.1), std::invalid_argument);
}

TEST(Training, SftLossNonIncreasing) {
  Rng rng(6);
  ToyBatch b;
  b.sft.push_back({random_seq(rng, 40, false), tv({50, 50, 50, 50, 50}), tv({40, 50, 50, 50, 50})});
  ToyLM m = ToyLM::random(kAlpha, 4);
  double prev = toy_loss(m, b, ToyObjective{});
  for (int step = 0; step < 200; ++step) {
    m = toy_train_step(m, b, ToyObjective{}, 0.01).model;
    const double l = toy_loss(m, b, ToyObjective{});
    ASSERT_LE(l, prev + 1e-15) << step;
    prev = l;
  }
}

TEST(Training, DpoMarginNonDecreasing) {
  Rng rng(7);
  ToyBatch b;
  b.dpo.push_back({random_seq(rng, 30, true), random_seq(rng, 30, true)});
  const auto ref = ToyLM::random(kAlpha, 11);
  ToyObjective obj;
  obj.kind = Objective::Dpo;
  obj.reference = &ref;
  ToyLM m = ref;
  double prev = dpo_margin(m, b.dpo[0], obj);
  EXPECT_EQ(prev, 0.0);
  for (int step = 0; step < 200; ++step) {
    m = toy_train_step(m, b, obj, 0.01).model;
    const double z = dpo_margin(m, b.dpo[0], obj);
    ASSERT_GE(z, prev - 1e-15) << step;
    prev = z;
  }
  EXPECT_GT(prev, 0.0);
}

TEST(Training, DpoNeedsReference) {
  Rng rng(8);
  ToyObjective obj;
  obj.kind = Objective::Dpo;
  EXPECT_THROW(toy_loss(ToyLM(kAlpha), dpo_batch(rng), obj), std::invalid_argument);
  EXPECT_THROW(toy_loss(ToyLM(kAlpha), ToyBatch{}, ToyObjective{}), EmptyInputError);
}

TEST(Training, FullyMaskedSequenceRejected) {
  ToyBatch b;
  b.sft.push_back({{"abc", {false, false, false}}, tv({0, 0, 0, 0, 0}), tv({0, 0, 0, 0, 0})});
  std::vector<double> g;
  EXPECT_THROW(toy_loss(ToyLM(kAlpha), b, ToyObjective{}, &g), EmptyResponseError);
}
