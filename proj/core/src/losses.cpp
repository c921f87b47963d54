#include "psybench/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "psybench/errors.hpp"

namespace psybench {

void validate_log_probs(const TokenLogProbs& lp) {
  if (!lp.mask.empty() && lp.mask.size() != lp.logprobs.size()) {
    throw std::invalid_argument("mask length differs from log-prob length");
  }
  for (double v : lp.logprobs) {
    if (!(v <= 0.0)) throw std::invalid_argument("log-probabilities must be <= 0");
  }
}

void validate(const SFTConfig& cfg) {
  if (!(cfg.eta >= 0.0) || !std::isfinite(cfg.eta)) throw std::invalid_argument("eta must be >= 0");
  double sum = 0.0;
  for (double w : cfg.weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("trait weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("trait weights must sum to 1");
}

void validate(const DPOConfig& cfg) {
  if (!(cfg.beta > 0.0) || !std::isfinite(cfg.beta)) throw std::invalid_argument("beta must be > 0");
}

double length_norm_ll(const TokenLogProbs& lp) {
  validate_log_probs(lp);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < lp.logprobs.size(); ++i) {
    if (!lp.mask.empty() && !lp.mask[i]) continue;
    sum += lp.logprobs[i];
    ++n;
  }
  if (n == 0) throw EmptyResponseError();
  return sum / static_cast<double>(n);
}

double trait_penalty(const TraitVector& scored, const TraitVector& target, const SFTConfig& cfg) {
  validate(cfg);
  double s = 0.0;
  for (std::size_t k = 0; k < kTraitCount; ++k) {
    s += cfg.weights[k] * std::abs(scored[k] - target[k]) / 100.0;
  }
  return cfg.eta * s;
}

double sft_loss(const TokenLogProbs& lp, const TraitVector& scored, const TraitVector& target,
                const SFTConfig& cfg) {
  return -length_norm_ll(lp) + trait_penalty(scored, target, cfg);
}

double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double log_sigmoid(double x) noexcept { return -softplus(-x); }

double dpo_loss_from_ll(double ll_plus, double ll_minus, double ref_plus, double ref_minus,
                        const DPOConfig& cfg) {
  validate(cfg);
  const double z = cfg.beta * (ll_plus - ll_minus) - cfg.beta * (ref_plus - ref_minus);
  return -log_sigmoid(z);
}

double dpo_loss(const TokenLogProbs& lp_plus, const TokenLogProbs& lp_minus,
                const TokenLogProbs& ref_plus, const TokenLogProbs& ref_minus,
                const DPOConfig& cfg) {
  return dpo_loss_from_ll(length_norm_ll(lp_plus), length_norm_ll(lp_minus),
                          length_norm_ll(ref_plus), length_norm_ll(ref_minus), cfg);
}

}  // namespace psybench
