#include "psybench/generation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <ctime>
#include <map>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "psybench/errors.hpp"
#include "psybench/util.hpp"

namespace psybench {

using nlohmann::json;

std::string_view preset_name(PresetName n) noexcept {
  switch (n) {
    case PresetName::CorpusSynthesis: return "corpus_synthesis";
    case PresetName::PersonaDescription: return "persona_description";
    case PresetName::TraitScoring: return "trait_scoring";
  }
  return "corpus_synthesis";
}

DecodingPreset corpus_synthesis_preset() { return {PresetName::CorpusSynthesis, 0.85, 0.95, 512}; }
DecodingPreset persona_description_preset() {
  return {PresetName::PersonaDescription, 0.25, 1.0, 512};
}
DecodingPreset trait_scoring_preset() { return {PresetName::TraitScoring, 0.0, 1.0, 512}; }

void validate_preset(const DecodingPreset& p) {
  if (!(p.temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (!(p.top_p > 0.0 && p.top_p <= 1.0)) throw std::invalid_argument("top_p must be in (0,1]");
  if (p.max_new_tokens <= 0) throw std::invalid_argument("max_new_tokens must be positive");
}

std::string prompt_checksum(std::string_view prompt_text) { return sha256_hex(prompt_text); }

ClientConfig ClientConfig::from_env() {
  ClientConfig c;
  if (const char* base = std::getenv("PSYBENCH_API_BASE")) c.api_base = base;
  if (const char* key = std::getenv("PSYBENCH_API_KEY")) c.api_key = key;
  return c;
}

// --- TokenBucket ------------------------------------------------------------

TokenBucket::TokenBucket(double rate_per_second, double burst)
    : rate_(rate_per_second), burst_(burst), tokens_(burst), last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  std::unique_lock lock(mu_);
  while (true) {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait_s = (1.0 - tokens_) / rate_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
    lock.lock();
  }
}

std::shared_ptr<TokenBucket> TokenBucket::for_endpoint(const std::string& endpoint, double rate) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<TokenBucket>> buckets;
  std::lock_guard lock(mu);
  auto& slot = buckets[endpoint];
  if (!slot) slot = std::make_shared<TokenBucket>(rate, std::max(1.0, rate));
  return slot;
}

// --- ChatClient -------------------------------------------------------------

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }

std::atomic<std::uint64_t> g_request_counter{0};

}  // namespace

ChatClient::ChatClient(ClientConfig config) : config_(std::move(config)) {
  if (config_.api_base.empty()) {
    throw std::invalid_argument("no API base configured (set PSYBENCH_API_BASE)");
  }
  if (config_.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
  const auto scheme_end = config_.api_base.find("://");
  const auto path_start =
      config_.api_base.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  scheme_host_port_ = config_.api_base.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : config_.api_base.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (config_.requests_per_second > 0.0) {
    bucket_ = TokenBucket::for_endpoint(scheme_host_port_ + path_prefix_, config_.requests_per_second);
  }
  if (config_.transcript) {
    if (config_.transcript->has_parent_path()) {
      std::filesystem::create_directories(config_.transcript->parent_path());
    }
    transcript_ = std::make_unique<std::ofstream>(*config_.transcript, std::ios::app);
    if (!*transcript_) throw Error("cannot open transcript " + config_.transcript->string());
  }
}

std::string ChatClient::request_body(std::string_view prompt_text, const DecodingPreset& preset,
                                     std::string_view model, std::uint64_t seed) {
  json body = {{"model", model},
               {"messages", json::array({{{"role", "user"}, {"content", prompt_text}}})},
               {"temperature", preset.temperature},
               {"top_p", preset.top_p},
               {"max_tokens", preset.max_new_tokens},
               {"seed", seed},
               {"stream", false}};
  return body.dump();
}

void ChatClient::mirror(std::string_view request_id, std::string_view request, int status,
                        std::string_view response) {
  if (!transcript_) return;
  json line = {{"request_id", request_id}, {"timestamp", utc_timestamp()}, {"status", status}};
  line["request"] = json::parse(request, nullptr, false);
  auto parsed = json::parse(response, nullptr, false);
  line["response"] = parsed.is_discarded() ? json(response) : parsed;
  std::lock_guard lock(transcript_mu_);
  *transcript_ << line.dump() << '\n';
  transcript_->flush();
}

GenerationRecord ChatClient::generate(std::string_view prompt_text, const DecodingPreset& preset,
                                      std::string_view model, std::uint64_t seed) {
  validate_preset(preset);
  GenerationRecord rec;
  rec.model = std::string(model);
  rec.preset = std::string(preset_name(preset.name));
  rec.prompt_checksum = prompt_checksum(prompt_text);
  rec.seed = seed;
  {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(mix_seed(seed, g_request_counter++)));
    rec.request_id = std::string("req-") + buf;
  }
  const std::string body = request_body(prompt_text, preset, model, seed);
  const std::string path = path_prefix_ + "/chat/completions";

  const auto started = std::chrono::steady_clock::now();
  int last_status = 0;
  std::string last_detail;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(config_.backoff_base * (1 << (attempt - 2)));
      ++rec.retry_count;
    }
    if (bucket_) bucket_->acquire();

    httplib::Client cli(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count();
    cli.set_connection_timeout(std::max<long long>(1, secs));
    cli.set_read_timeout(std::max<long long>(1, secs));
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto res = cli.Post(path, headers, body, "application/json");
    if (!res) {
      last_status = 0;
      last_detail = httplib::to_string(res.error());
      mirror(rec.request_id, body, 0, last_detail);
      continue;
    }
    mirror(rec.request_id, body, res->status, res->body);
    if (res->status != 200) {
      last_status = res->status;
      last_detail = res->body.substr(0, 200);
      if (retryable(res->status)) continue;
      throw TransportError(res->status, last_detail);
    }
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
      throw TransportError(res->status, "malformed completion response");
    }
    const auto& choice = j["choices"][0];
    rec.response = choice.at("message").at("content").get<std::string>();
    rec.truncated = choice.value("finish_reason", "") == "length";
    if (auto it = j.find("seed"); it != j.end() && it->is_number_unsigned()) {
      rec.seed_honored = it->get<std::uint64_t>() == seed;
    }
    rec.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    rec.timestamp = utc_timestamp();
    return rec;
  }
  throw TransportError(last_status, "gave up after " + std::to_string(config_.max_attempts) +
                                        " attempts: " + last_detail);
}

// --- batch ------------------------------------------------------------------

std::vector<BatchItem> generate_batch(Generator& gen, std::span<const BatchRequest> requests,
                                      const DecodingPreset& preset, std::string_view model,
                                      std::size_t parallelism) {
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  std::vector<std::optional<BatchItem>> slots(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next++;
      if (i >= requests.size()) return;
      try {
        slots[i] = gen.generate(std::string_view(requests[i].prompt_text), preset, model,
                                requests[i].seed);
      } catch (const TransportError& e) {
        slots[i] = ItemError{i, e.what(), e.status()};
      } catch (const std::exception& e) {
        slots[i] = ItemError{i, e.what(), 0};
      }
    }
  };
  const std::size_t n_threads = std::min(parallelism, std::max<std::size_t>(1, requests.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  std::vector<BatchItem> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace psybench
