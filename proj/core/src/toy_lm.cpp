#include "psybench/toy_lm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "psybench/errors.hpp"
#include "psybench/util.hpp"

namespace psybench {

std::string project_to_toy_alphabet(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalpha(u)) {
      out += static_cast<char>(std::tolower(u));
    } else if (std::isdigit(u)) {
      out += '0';
    } else if (ch == '.' || ch == '!' || ch == '?' || ch == ';' || ch == ':') {
      out += '.';
    } else if (ch == ',' || ch == '-' || ch == '\n') {
      out += ch;
    } else {
      out += ' ';
    }
  }
  return out;
}

ToyLM::ToyLM(std::string alphabet) : alphabet_(std::move(alphabet)) {
  if (alphabet_.empty() || alphabet_.size() > kMaxToyAlphabet) {
    throw std::invalid_argument("toy alphabet must have 1..32 symbols");
  }
  index_.fill(-1);
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    auto& slot = index_[static_cast<unsigned char>(alphabet_[i])];
    if (slot != -1) throw std::invalid_argument("toy alphabet has a repeated symbol");
    slot = static_cast<int>(i);
  }
  logits_.assign(contexts() * vocab(), 0.0);
}

ToyLM ToyLM::random(std::string alphabet, std::uint64_t seed, double scale) {
  ToyLM m(std::move(alphabet));
  Rng rng(seed);
  for (double& w : m.logits_) w = scale * (2.0 * uniform_unit(rng) - 1.0);
  return m;
}

std::size_t ToyLM::index_of(char symbol) const {
  const int i = index_[static_cast<unsigned char>(symbol)];
  if (i < 0) throw UnknownSymbolError(symbol);
  return static_cast<std::size_t>(i);
}

std::vector<double> ToyLM::probs(std::size_t context) const {
  const double* row = logits_.data() + context * vocab();
  const double mx = *std::max_element(row, row + vocab());
  std::vector<double> p(vocab());
  double z = 0.0;
  for (std::size_t j = 0; j < vocab(); ++j) z += (p[j] = std::exp(row[j] - mx));
  for (double& v : p) v /= z;
  return p;
}

TokenLogProbs ToyLM::log_probs(const ToySequence& seq) const {
  if (!seq.mask.empty() && seq.mask.size() != seq.text.size()) {
    throw std::invalid_argument("toy sequence mask length differs from text length");
  }
  TokenLogProbs lp;
  lp.mask = seq.mask;
  lp.logprobs.reserve(seq.text.size());
  std::size_t ctx = bos();
  for (char ch : seq.text) {
    const std::size_t y = index_of(ch);
    const double* row = logits_.data() + ctx * vocab();
    const double mx = *std::max_element(row, row + vocab());
    double z = 0.0;
    for (std::size_t j = 0; j < vocab(); ++j) z += std::exp(row[j] - mx);
    lp.logprobs.push_back(std::min(0.0, row[y] - mx - std::log(z)));
    ctx = y;
  }
  return lp;
}

void ToyLM::accumulate_ll_grad(const ToySequence& seq, double scale, std::vector<double>& grad) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < seq.text.size(); ++i) {
    if (seq.mask.empty() || seq.mask[i]) ++n;
  }
  if (n == 0) throw EmptyResponseError();
  const double w = scale / static_cast<double>(n);
  std::size_t ctx = bos();
  for (std::size_t i = 0; i < seq.text.size(); ++i) {
    const std::size_t y = index_of(seq.text[i]);
    if (seq.mask.empty() || seq.mask[i]) {
      const auto p = probs(ctx);
      double* g = grad.data() + ctx * vocab();
      for (std::size_t j = 0; j < vocab(); ++j) g[j] -= w * p[j];
      g[y] += w;
    }
    ctx = y;
  }
}

double dpo_margin(const ToyLM& model, const DpoItem& item, const ToyObjective& objective) {
  if (!objective.reference) throw std::invalid_argument("DPO needs a reference model");
  const double d_theta = length_norm_ll(model.log_probs(item.chosen)) -
                         length_norm_ll(model.log_probs(item.rejected));
  const double d_ref = length_norm_ll(objective.reference->log_probs(item.chosen)) -
                       length_norm_ll(objective.reference->log_probs(item.rejected));
  return objective.dpo.beta * (d_theta - d_ref);
}

double toy_loss(const ToyLM& model, const ToyBatch& batch, const ToyObjective& objective,
                std::vector<double>* grad) {
  if (grad) grad->assign(model.params().size(), 0.0);
  double total = 0.0;
  if (objective.kind == Objective::Sft) {
    if (batch.sft.empty()) throw EmptyInputError("empty SFT batch");
    const double inv = 1.0 / static_cast<double>(batch.sft.size());
    for (const auto& item : batch.sft) {
      total += sft_loss(model.log_probs(item.seq), item.scored, item.target, objective.sft);
      // The trait penalty is fixed by the demonstration, so only -l contributes.
      if (grad) model.accumulate_ll_grad(item.seq, -inv, *grad);
    }
    return total * inv;
  }
  if (batch.dpo.empty()) throw EmptyInputError("empty DPO batch");
  validate(objective.dpo);
  const double inv = 1.0 / static_cast<double>(batch.dpo.size());
  for (const auto& item : batch.dpo) {
    const double z = dpo_margin(model, item, objective);
    total += -log_sigmoid(z);
    if (grad) {
      // dL/dz = -sigmoid(-z) = -exp(log_sigmoid(-z))
      const double dz = -std::exp(log_sigmoid(-z)) * objective.dpo.beta * inv;
      model.accumulate_ll_grad(item.chosen, dz, *grad);
      model.accumulate_ll_grad(item.rejected, -dz, *grad);
    }
  }
  return total * inv;
}

StepResult toy_train_step(const ToyLM& model, const ToyBatch& batch, const ToyObjective& objective,
                          double learning_rate) {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  std::vector<double> grad;
  StepResult r{model, toy_loss(model, batch, objective, &grad)};
  auto& w = r.model.params();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * grad[i];
  return r;
}

double grad_check(const ToyLM& model, const ToyBatch& batch, const ToyObjective& objective,
                  double epsilon) {
  if (!(epsilon >= 1e-8 && epsilon <= 1e-3)) {
    throw std::invalid_argument("epsilon must be in [1e-8, 1e-3]");
  }
  std::vector<double> analytic;
  toy_loss(model, batch, objective, &analytic);
  ToyLM probe = model;
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double w0 = probe.params()[i];
    probe.params()[i] = w0 + epsilon;
    const double fp = toy_loss(probe, batch, objective);
    probe.params()[i] = w0 - epsilon;
    const double fm = toy_loss(probe, batch, objective);
    probe.params()[i] = w0;
    const double numeric = (fp - fm) / (2.0 * epsilon);
    const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-6);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

std::vector<ToySequence> uniform_bigram_sequences(std::string_view alphabet) {
  const std::size_t k = alphabet.size();
  if (k == 0) return {};
  // Lyndon-word construction of the order-2 de Bruijn cycle.
  std::vector<std::size_t> a(3, 0);
  std::vector<std::size_t> cycle;
  std::function<void(std::size_t, std::size_t)> db = [&](std::size_t t, std::size_t p) {
    if (t > 2) {
      if (2 % p == 0) cycle.insert(cycle.end(), a.begin() + 1, a.begin() + 1 + static_cast<long>(p));
      return;
    }
    a[t] = a[t - p];
    db(t + 1, p);
    for (std::size_t j = a[t - p] + 1; j < k; ++j) {
      a[t] = j;
      db(t + 1, t);
    }
  };
  db(1, 1);

  std::vector<ToySequence> out;
  for (std::size_t s = 0; s < k; ++s) {
    const auto start = static_cast<std::size_t>(std::find(cycle.begin(), cycle.end(), s) - cycle.begin());
    ToySequence seq;
    for (std::size_t i = 0; i <= cycle.size(); ++i) seq.text += alphabet[cycle[(start + i) % cycle.size()]];
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace psybench
