#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

namespace psybench {

struct StubReply {
  std::string content;
  bool truncated = false;
};

/// Deterministic stand-in for a chat model.
///
/// Persona prompts (carrying the five trait tags) get a short first-person
/// text with explicit trait mentions near the target; the noise depends on
/// the prompt and, when temperature > 0, on the seed. Any other prompt is
/// treated as a rating request and answered by echoing the trait mentions it
/// contains. Prompts containing "[[stub:fail]]" are answered with HTTP 500.
StubReply stub_reply(std::string_view prompt, double temperature, std::uint64_t seed,
                     int max_tokens);

/// Loopback HTTP server speaking the /chat/completions subset used by ChatClient.
class StubServer {
 public:
  StubServer();
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  /// Binds (port 0 picks a free port), starts serving in the background and
  /// returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop() is called from elsewhere.
  void run(const std::string& host, int port);
  void stop();

  std::string base_url() const;  // "http://host:port/v1"
  std::uint64_t request_count() const noexcept { return requests_.load(); }

  /// The next `n` requests fail with `status` before normal service resumes.
  void fail_next(int n, int status);

 private:
  void install_routes();

  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<int> fail_remaining_{0};
  std::atomic<int> fail_status_{500};
};

}  // namespace psybench
