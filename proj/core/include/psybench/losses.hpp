#pragma once

#include <array>
#include <vector>

#include "psybench/schema.hpp"

namespace psybench {

/// Log-probabilities of realized tokens plus the training mask. An empty mask
/// means every token counts.
struct TokenLogProbs {
  std::vector<double> logprobs;
  std::vector<bool> mask;
};

/// Throws std::invalid_argument on a size mismatch or a positive log-prob.
void validate_log_probs(const TokenLogProbs& lp);

struct SFTConfig {
  double eta = 0.5;
  std::array<double, kTraitCount> weights{0.2, 0.2, 0.2, 0.2, 0.2};
};

struct DPOConfig {
  double beta = 0.1;
};

/// Requires eta >= 0, weights >= 0 summing to 1 within 1e-12.
void validate(const SFTConfig& cfg);
/// Requires beta > 0.
void validate(const DPOConfig& cfg);

/// Mean log-probability over unmasked tokens. Throws EmptyResponseError when
/// every token is masked.
double length_norm_ll(const TokenLogProbs& lp);

/// eta * sum_k w_k |p_k - t_k| / 100, always within [0, eta].
double trait_penalty(const TraitVector& scored, const TraitVector& target, const SFTConfig& cfg);

double sft_loss(const TokenLogProbs& lp, const TraitVector& scored, const TraitVector& target,
                const SFTConfig& cfg);

/// log(1 + e^x) without overflow.
double softplus(double x) noexcept;
/// log sigmoid(x) = -softplus(-x).
double log_sigmoid(double x) noexcept;

/// -log sigmoid(beta (l+ - l-) - beta (ref+ - ref-)) on length-normalized
/// log-likelihoods.
double dpo_loss_from_ll(double ll_plus, double ll_minus, double ref_plus, double ref_minus,
                        const DPOConfig& cfg);

double dpo_loss(const TokenLogProbs& lp_plus, const TokenLogProbs& lp_minus,
                const TokenLogProbs& ref_plus, const TokenLogProbs& ref_minus,
                const DPOConfig& cfg);

}  // namespace psybench
