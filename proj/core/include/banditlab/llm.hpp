#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "banditlab/agents.hpp"
#include "banditlab/types.hpp"

namespace banditlab {

// ---------------------------------------------------------------------------
// Prompt protocol. These strings are part of the experiment definition and
// are frozen byte for byte; tests pin them exactly.
// ---------------------------------------------------------------------------

/// Game framing sent as the system message of every request.
std::string render_system_prompt();

/// History recap plus the question for `next_trial` (1-based). Invalid trials
/// are omitted from the recap; the remaining lines keep their true trial
/// numbers. An empty history renders the question alone.
std::string render_user_prompt(const History& history, int next_trial);

/// Maps a raw completion to a choice: strip ASCII whitespace, then
/// case-sensitive match against "X" / "Y"; anything else is Invalid.
Choice parse_choice_token(const std::string& raw);

// ---------------------------------------------------------------------------
// Sampling presets.
// ---------------------------------------------------------------------------

struct SamplingConfig {
  double temperature = 1.0;
  double top_p = 1.0;
  std::string label;
};

/// Named presets: strict (0.0, 0.5), moderate (1.0, 0.5),
/// default_like (1.0, 1.0), exploratory (2.0, 1.0). Unknown names throw.
SamplingConfig sampling_preset(const std::string& name);

// ---------------------------------------------------------------------------
// Providers.
// ---------------------------------------------------------------------------

class LlmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Authentication failure; never retried.
class LlmAuthError : public LlmError {
 public:
  using LlmError::LlmError;
};

/// One chat exchange -> raw completion text.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string complete(const std::string& system_prompt,
                               const std::string& user_prompt) = 0;
};

/// A full prompt/response round trip for one trial.
struct ChatExchange {
  std::string system_text;
  std::string user_text;
  std::string raw_response;
  Choice parsed = Choice::Invalid;
  std::chrono::milliseconds latency{0};
};

/// Renders the prompts for `next_trial`, runs one completion, parses it.
/// Provider exceptions propagate.
ChatExchange complete_exchange(ChatProvider& provider, const History& history,
                               int next_trial);

/// Retry decorator: re-issues the completion on LlmError up to max_attempts
/// total tries with exponentially growing sleeps (doubling from
/// initial_backoff). LlmAuthError is never retried.
class RetryingProvider : public ChatProvider {
 public:
  RetryingProvider(std::shared_ptr<ChatProvider> inner, int max_attempts,
                   std::chrono::milliseconds initial_backoff);

  std::string complete(const std::string& system_prompt,
                       const std::string& user_prompt) override;

  /// Attempts consumed by the most recent complete() call.
  int last_attempts() const { return last_attempts_; }

 private:
  std::shared_ptr<ChatProvider> inner_;
  int max_attempts_;
  std::chrono::milliseconds initial_backoff_;
  int last_attempts_ = 0;
};

/// Caps concurrent requests and enforces a minimum spacing between request
/// starts. Shared by all runs of a session.
class RateLimiter {
 public:
  RateLimiter(int max_in_flight, std::chrono::milliseconds min_interval);

  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int max_in_flight_;
  int in_flight_ = 0;
  std::chrono::milliseconds min_interval_;
  std::chrono::steady_clock::time_point last_start_;
};

struct HttpProviderConfig {
  std::string base_url;             // e.g. "http://localhost:8080"
  std::string chat_path = "/v1/chat/completions";
  std::string model;
  SamplingConfig sampling;
  int max_tokens = 1;
  std::string api_key_env = "BANDITLAB_API_KEY";
  int max_retries = 3;              // total attempts, not extra tries
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds timeout{30000};
};

/// OpenAI-style chat-completions client. The API key is read from the
/// environment variable named in the config at construction time and is
/// never written to logs or output files. Transient failures retry with
/// exponential backoff; HTTP 401/403 raise LlmAuthError immediately.
class HttpChatProvider : public ChatProvider {
 public:
  HttpChatProvider(const HttpProviderConfig& config,
                   std::shared_ptr<RateLimiter> limiter = nullptr);
  ~HttpChatProvider() override;

  std::string complete(const std::string& system_prompt,
                       const std::string& user_prompt) override;

  /// Request body for one exchange, as sent on the wire.
  std::string build_request_body(const std::string& system_prompt,
                                 const std::string& user_prompt) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Replays completions from a script: one raw token per line (taken
/// verbatim, so leading spaces survive), consumed in order, one per call.
/// The sentinel line "<FAIL>" raises a transient LlmError instead, for
/// exercising retry paths. Running past the end throws LlmError. Lets the
/// full pipeline run without network access.
class ScriptedProvider : public ChatProvider {
 public:
  explicit ScriptedProvider(std::vector<std::string> tokens);
  static ScriptedProvider from_file(const std::string& path);

  std::string complete(const std::string& system_prompt,
                       const std::string& user_prompt) override;

  std::size_t consumed() const { return next_; }

 private:
  std::vector<std::string> tokens_;
  std::size_t next_ = 0;
};

/// Agent facade over a provider: renders the prompt pair for the next trial,
/// requests one completion, and parses it. The raw text of the last
/// completion is kept for logging.
class LlmAgent : public Agent {
 public:
  LlmAgent(std::shared_ptr<ChatProvider> provider, std::string name);

  Choice choose(const History& history) override;
  void observe(const TrialRecord&) override {}
  std::string name() const override { return name_; }

  const std::string& last_raw_token() const { return last_raw_; }

 private:
  std::shared_ptr<ChatProvider> provider_;
  std::string name_;
  std::string last_raw_;
};

}  // namespace banditlab
