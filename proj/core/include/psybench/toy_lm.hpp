#pragma once

#include <cstddef>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "psybench/losses.hpp"

namespace psybench {

inline constexpr std::size_t kMaxToyAlphabet = 32;

/// Lowercase letters, blank, newline and a few punctuation symbols.
inline constexpr std::string_view kToyAlphabet = "abcdefghijklmnopqrstuvwxyz .,0-\n";

/// Maps arbitrary text onto kToyAlphabet: case folded, digits to '0', sentence
/// punctuation to '.', anything else to a blank.
std::string project_to_toy_alphabet(std::string_view text);

/// A symbol string with an optional training mask (empty = all tokens count).
struct ToySequence {
  std::string text;
  std::vector<bool> mask;
};

/// Bigram categorical model: one row of next-symbol logits per context, where
/// the contexts are the alphabet symbols plus a start-of-sequence row.
class ToyLM {
 public:
  /// All logits zero (uniform next-symbol distributions).
  explicit ToyLM(std::string alphabet);
  /// Logits drawn uniformly from [-scale, scale].
  static ToyLM random(std::string alphabet, std::uint64_t seed, double scale = 1.0);

  const std::string& alphabet() const noexcept { return alphabet_; }
  std::size_t vocab() const noexcept { return alphabet_.size(); }
  std::size_t contexts() const noexcept { return alphabet_.size() + 1; }
  std::size_t bos() const noexcept { return alphabet_.size(); }

  /// Throws UnknownSymbolError for a symbol outside the alphabet.
  std::size_t index_of(char symbol) const;

  std::vector<double>& params() noexcept { return logits_; }
  const std::vector<double>& params() const noexcept { return logits_; }
  double logit(std::size_t context, std::size_t next) const { return logits_[context * vocab() + next]; }

  /// Next-symbol probabilities for one context.
  std::vector<double> probs(std::size_t context) const;

  /// Per-token log-probabilities with the sequence's mask.
  TokenLogProbs log_probs(const ToySequence& seq) const;

  /// Adds scale * d(length_norm_ll(seq))/d(params) into grad.
  void accumulate_ll_grad(const ToySequence& seq, double scale, std::vector<double>& grad) const;

 private:
  std::string alphabet_;
  std::array<int, 256> index_{};
  std::vector<double> logits_;
};

struct SftItem {
  ToySequence seq;
  TraitVector scored;  // scorer estimate for the demonstration
  TraitVector target;
};

struct DpoItem {
  ToySequence chosen;
  ToySequence rejected;
};

enum class Objective { Sft, Dpo };

struct ToyBatch {
  std::vector<SftItem> sft;
  std::vector<DpoItem> dpo;
};

struct ToyObjective {
  Objective kind = Objective::Sft;
  SFTConfig sft;
  DPOConfig dpo;
  const ToyLM* reference = nullptr;  // frozen reference, required for DPO
};

/// Mean loss over the batch items of the selected objective; when `grad` is
/// given it receives the analytic gradient with respect to model.params().
double toy_loss(const ToyLM& model, const ToyBatch& batch, const ToyObjective& objective,
                std::vector<double>* grad = nullptr);

struct StepResult {
  ToyLM model;
  double loss = 0.0;  // loss before the update
};

/// One plain gradient-descent step.
StepResult toy_train_step(const ToyLM& model, const ToyBatch& batch, const ToyObjective& objective,
                          double learning_rate);

/// beta * ((l+ - l-) - (ref+ - ref-)) for one pair.
double dpo_margin(const ToyLM& model, const DpoItem& item, const ToyObjective& objective);

/// Max over parameters of |analytic - numeric| / max(|analytic| + |numeric|, 1e-6),
/// with central differences of step epsilon in [1e-8, 1e-3].
double grad_check(const ToyLM& model, const ToyBatch& batch, const ToyObjective& objective,
                  double epsilon);

/// Sequences in which every context (start included) is followed by each
/// symbol equally often: rotations of a de Bruijn cycle of order 2.
std::vector<ToySequence> uniform_bigram_sequences(std::string_view alphabet);

}  // namespace psybench
