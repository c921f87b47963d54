#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "psybench/prompting.hpp"

namespace psybench {

enum class PresetName { CorpusSynthesis, PersonaDescription, TraitScoring };

struct DecodingPreset {
  PresetName name = PresetName::CorpusSynthesis;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_new_tokens = 512;

  bool deterministic() const noexcept { return temperature == 0.0; }
};

std::string_view preset_name(PresetName n) noexcept;

/// temperature 0.85, top_p 0.95, 512 tokens.
DecodingPreset corpus_synthesis_preset();
/// temperature 0.25, top_p 1.0, 512 tokens.
DecodingPreset persona_description_preset();
/// temperature 0, top_p 1.0, 512 tokens.
DecodingPreset trait_scoring_preset();

/// Throws std::invalid_argument for temperature < 0, top_p outside (0,1] or
/// non-positive max_new_tokens.
void validate_preset(const DecodingPreset& p);

struct GenerationRecord {
  std::string request_id;
  std::string model;
  std::string preset;
  std::string prompt_checksum;  // sha256 of the prompt text
  std::string response;
  double latency_ms = 0.0;
  int retry_count = 0;
  std::string timestamp;  // ISO-8601 UTC
  std::uint64_t seed = 0;
  std::optional<bool> seed_honored;  // set when the server echoes the seed
  bool truncated = false;            // finish_reason == "length"
};

std::string prompt_checksum(std::string_view prompt_text);

/// Anything that turns prompt text into a completion.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual GenerationRecord generate(std::string_view prompt_text, const DecodingPreset& preset,
                                    std::string_view model, std::uint64_t seed) = 0;

  GenerationRecord generate(const StructuredPrompt& prompt, const DecodingPreset& preset,
                            std::string_view model, std::uint64_t seed) {
    return generate(std::string_view(prompt.full_text), preset, model, seed);
  }
};

struct ClientConfig {
  std::string api_base;  // e.g. "http://127.0.0.1:8080/v1"
  std::string api_key;
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{200};
  std::chrono::milliseconds timeout{60000};
  double requests_per_second = 0.0;  // 0 disables rate limiting
  std::optional<std::filesystem::path> transcript;

  /// Reads PSYBENCH_API_BASE and PSYBENCH_API_KEY.
  static ClientConfig from_env();
};

/// Process-wide token bucket. Instances are shared per endpoint.
class TokenBucket {
 public:
  TokenBucket(double rate_per_second, double burst);
  void acquire();

  static std::shared_ptr<TokenBucket> for_endpoint(const std::string& endpoint, double rate);

 private:
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

/// Client for an OpenAI-compatible /chat/completions endpoint. Safe to share
/// across threads: each call opens its own connection.
class ChatClient final : public Generator {
 public:
  explicit ChatClient(ClientConfig config);

  using Generator::generate;
  /// Retries transport failures, 429 and 5xx with exponential backoff; throws
  /// TransportError once attempts are exhausted.
  GenerationRecord generate(std::string_view prompt_text, const DecodingPreset& preset,
                            std::string_view model, std::uint64_t seed) override;

  const ClientConfig& config() const noexcept { return config_; }

  /// Request body sent for a prompt; exposed for wire-format tests.
  static std::string request_body(std::string_view prompt_text, const DecodingPreset& preset,
                                  std::string_view model, std::uint64_t seed);

 private:
  void mirror(std::string_view request_id, std::string_view request, int status,
              std::string_view response);

  ClientConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::shared_ptr<TokenBucket> bucket_;
  std::mutex transcript_mu_;
  std::unique_ptr<std::ofstream> transcript_;
};

struct ItemError {
  std::size_t index = 0;
  std::string message;
  int status = 0;
};

using BatchItem = std::variant<GenerationRecord, ItemError>;

struct BatchRequest {
  std::string prompt_text;
  std::uint64_t seed = 0;
};

/// Runs requests on `parallelism` worker threads. Results are returned in input
/// order; an error in one item never affects the others.
std::vector<BatchItem> generate_batch(Generator& gen, std::span<const BatchRequest> requests,
                                      const DecodingPreset& preset, std::string_view model,
                                      std::size_t parallelism);

}  // namespace psybench
