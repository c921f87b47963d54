#include "psybench/stub_server.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "psybench/scale_parser.hpp"
#include "psybench/schema.hpp"
#include "psybench/util.hpp"

namespace psybench {

namespace {

constexpr std::array<std::string_view, 16> kSentences = {
    "I usually take a moment before I answer.",
    "People tell me I am easy to read.",
    "When plans change I adjust, though not always gracefully.",
    "I keep notes on most things that matter to me.",
    "A quiet evening recharges me more than a loud one.",
    "I would rather ask a question than guess.",
    "Deadlines focus me, but they also make me restless.",
    "I tend to notice small changes in how people speak to me.",
    "Trying something new excites me more than it worries me.",
    "I like to hear the other side before deciding.",
    "Small talk is fine, but I prefer a real conversation.",
    "I keep promises even when it costs me.",
    "Criticism stays with me longer than praise does.",
    "I enjoy taking the lead when nobody else will.",
    "Routine comforts me on difficult days.",
    "I often replay conversations afterwards."};

std::optional<TraitVector> read_trait_tags(std::string_view prompt) {
  std::array<double, kTraitCount> v{};
  for (std::size_t k = 0; k < kTraitCount; ++k) {
    const std::string tag = std::string("<") + trait_letter(kTraits[k]) + "=";
    const auto pos = prompt.find(tag);
    if (pos == std::string_view::npos) return std::nullopt;
    const auto end = prompt.find('>', pos);
    if (end == std::string_view::npos) return std::nullopt;
    try {
      v[k] = std::stod(std::string(prompt.substr(pos + tag.size(), end - pos - tag.size())));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  try {
    return validate_trait_vector(v);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string scene_of(std::string_view prompt) {
  const auto pos = prompt.find("<SCENE=");
  if (pos == std::string_view::npos) return "everyday";
  const auto end = prompt.find('>', pos);
  return std::string(prompt.substr(pos + 7, end - pos - 7));
}

std::string persona_text(const TraitVector& target, std::string_view prompt, std::uint64_t h) {
  std::ostringstream out;
  out << "In " << to_lower(scene_of(prompt)) << " situations I try to be myself. ";
  const int n_sent = 3 + static_cast<int>(mix_seed(h, 1) % 4);
  for (int s = 0; s < n_sent; ++s) {
    out << kSentences[mix_seed(h, 10 + s) % kSentences.size()] << ' ';
  }
  const int style = static_cast<int>(mix_seed(h, 2) % 3);
  out << "\nSelf-rating: ";
  for (std::size_t k = 0; k < kTraitCount; ++k) {
    const double noise = static_cast<double>(mix_seed(h, 100 + k) % 51) - 25.0;
    const double v = std::clamp(std::round(target[k] + noise), 0.0, 100.0);
    if (k) out << ", ";
    std::string name(trait_name(kTraits[k]));
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    switch (style) {
      case 0: out << trait_letter(kTraits[k]) << ": " << format_number(v); break;
      case 1: out << name << ' ' << format_fixed(v / 100.0, 2); break;
      default: out << name << ": " << format_number(v) << '%'; break;
    }
  }
  out << '.';
  return out.str();
}

std::string rating_text(std::string_view prompt) {
  const RawPrediction raw = extract_raw_traits(prompt);
  if (!raw.complete()) return "I cannot rate this text reliably.";
  std::ostringstream out;
  for (Trait t : kTraits) {
    std::string name(trait_name(t));
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    out << name << ": " << format_number(raw[t]->value) << (raw[t]->percent ? "%" : "") << '\n';
  }
  out << "confidence: 0.9";
  return out.str();
}

StubReply truncate_words(std::string text, int max_tokens) {
  StubReply r;
  int words = 0;
  bool in_word = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const bool space = std::isspace(static_cast<unsigned char>(text[i])) != 0;
    if (!space && !in_word) {
      if (++words > max_tokens) {
        text.resize(i);
        while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
        r.truncated = true;
        break;
      }
    }
    in_word = !space;
  }
  r.content = std::move(text);
  return r;
}

}  // namespace

StubReply stub_reply(std::string_view prompt, double temperature, std::uint64_t seed,
                     int max_tokens) {
  std::uint64_t h = fnv1a64(prompt);
  if (temperature > 0.0) h = mix_seed(h, seed);
  std::string text;
  if (auto target = read_trait_tags(prompt)) {
    text = persona_text(*target, prompt, h);
  } else {
    text = rating_text(prompt);
  }
  return truncate_words(std::move(text), max_tokens);
}

struct StubServer::Impl {
  httplib::Server server;
};

StubServer::StubServer() : impl_(std::make_unique<Impl>()) { install_routes(); }

StubServer::~StubServer() { stop(); }

void StubServer::install_routes() {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    if (fail_remaining_.load() > 0 && fail_remaining_.fetch_sub(1) > 0) {
      res.status = fail_status_.load();
      res.set_content(R"({"error":{"message":"injected failure"}})", "application/json");
      return;
    }
    auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("messages") || body["messages"].empty()) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"bad request"}})", "application/json");
      return;
    }
    std::string prompt;
    for (const auto& m : body["messages"]) prompt += m.value("content", "");
    if (prompt.find("[[stub:fail]]") != std::string::npos) {
      res.status = 500;
      res.set_content(R"({"error":{"message":"stub failure requested"}})", "application/json");
      return;
    }
    const double temperature = body.value("temperature", 1.0);
    const std::uint64_t seed = body.value("seed", std::uint64_t{0});
    const int max_tokens = body.value("max_tokens", 512);
    const StubReply reply = stub_reply(prompt, temperature, seed, max_tokens);
    nlohmann::json out = {
        {"id", "stub-" + sha256_hex(req.body).substr(0, 12)},
        {"object", "chat.completion"},
        {"model", body.value("model", "stub")},
        {"seed", seed},
        {"choices", nlohmann::json::array({{{"index", 0},
                                            {"message", {{"role", "assistant"}, {"content", reply.content}}},
                                            {"finish_reason", reply.truncated ? "length" : "stop"}}})}};
    res.set_content(out.dump(), "application/json");
  };
  impl_->server.Post("/v1/chat/completions", handler);
  impl_->server.Post("/chat/completions", handler);
}

int StubServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
  } else {
    port_ = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) throw std::runtime_error("stub server could not bind " + host);
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void StubServer::run(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!impl_->server.listen(host, port)) {
    throw std::runtime_error("stub server could not listen on " + host + ":" + std::to_string(port));
  }
}

void StubServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string StubServer::base_url() const {
  return "http://" + host_ + ":" + std::to_string(port_) + "/v1";
}

void StubServer::fail_next(int n, int status) {
  fail_status_ = status;
  fail_remaining_ = n;
}

}  // namespace psybench
