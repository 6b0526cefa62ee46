#include "banditlab/llm.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

namespace banditlab {

std::string render_system_prompt() {
  return
      "You are a space explorer in a game. Your task is to choose between "
      "visiting Planet X or Planet Y in each round, aiming to find as many "
      "gold coins as possible. The probability of finding gold coins on each "
      "planet is unknown at the start, but you can learn and adjust your "
      "strategy based on the outcomes of your previous visits. Respond with "
      "'X' for Planet X or 'Y' for Planet Y.";
}

std::string render_user_prompt(const History& history, int next_trial) {
  std::string out;
  bool any = false;
  for (const HistoryEntry& entry : history) {
    if (!is_valid(entry.choice)) continue;
    if (!any) {
      out += "Your previous space travels went as follows:\n";
      any = true;
    }
    out += "- In Trial ";
    out += std::to_string(entry.trial);
    out += ", you went to Planet ";
    out += entry.choice == Choice::X ? 'X' : 'Y';
    out += " and found ";
    out += entry.reward ? "100 gold coins" : "nothing";
    out += ".\n";
  }
  if (any) out += "\n";
  out += "Q: Which planet do you want to go to in Trial ";
  out += std::to_string(next_trial);
  out += "?\nA: Planet";
  return out;
}

Choice parse_choice_token(const std::string& raw) {
  std::size_t begin = 0;
  std::size_t end = raw.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(raw[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(raw[end - 1]))) --end;
  const std::string_view core(raw.data() + begin, end - begin);
  if (core == "X") return Choice::X;
  if (core == "Y") return Choice::Y;
  return Choice::Invalid;
}

SamplingConfig sampling_preset(const std::string& name) {
  if (name == "strict") return {0.0, 0.5, "strict"};
  if (name == "moderate") return {1.0, 0.5, "moderate"};
  if (name == "default_like") return {1.0, 1.0, "default_like"};
  if (name == "exploratory") return {2.0, 1.0, "exploratory"};
  throw std::invalid_argument("unknown sampling preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Rate limiting.
// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(int max_in_flight, std::chrono::milliseconds min_interval)
    : max_in_flight_(max_in_flight),
      min_interval_(min_interval),
      last_start_(std::chrono::steady_clock::now() - min_interval) {
  if (max_in_flight < 1) throw std::invalid_argument("rate limiter: max_in_flight must be >= 1");
}

void RateLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
  ++in_flight_;
  // Space out request starts even when slots are free.
  const auto earliest = last_start_ + min_interval_;
  const auto now = std::chrono::steady_clock::now();
  if (now < earliest) {
    lock.unlock();
    std::this_thread::sleep_until(earliest);
    lock.lock();
    last_start_ = earliest;
  } else {
    last_start_ = now;
  }
}

void RateLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  cv_.notify_one();
}

// ---------------------------------------------------------------------------
// HTTP provider.
// ---------------------------------------------------------------------------

namespace {

struct HostPath {
  std::string host;  // scheme://authority
  std::string path_prefix;
};

HostPath split_base_url(const std::string& base_url) {
  // httplib takes scheme://host[:port]; any path suffix must move to the
  // request path.
  const auto scheme_end = base_url.find("://");
  const std::size_t authority_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto slash = base_url.find('/', authority_start);
  if (slash == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, slash), prefix};
}

}  // namespace

struct HttpChatProvider::Impl {
  HttpProviderConfig config;
  std::shared_ptr<RateLimiter> limiter;
  std::string api_key;
  HostPath target;
};

HttpChatProvider::HttpChatProvider(const HttpProviderConfig& config,
                                   std::shared_ptr<RateLimiter> limiter)
    : impl_(std::make_unique<Impl>()) {
  impl_->config = config;
  impl_->limiter = std::move(limiter);
  impl_->target = split_base_url(config.base_url);
  if (!config.api_key_env.empty()) {
    if (const char* key = std::getenv(config.api_key_env.c_str())) impl_->api_key = key;
  }
  if (config.max_retries < 1) {
    throw std::invalid_argument("http provider: max_retries must be >= 1");
  }
}

HttpChatProvider::~HttpChatProvider() = default;

std::string HttpChatProvider::build_request_body(const std::string& system_prompt,
                                                 const std::string& user_prompt) const {
  nlohmann::json body{
      {"model", impl_->config.model},
      {"messages",
       {{{"role", "system"}, {"content", system_prompt}},
        {{"role", "user"}, {"content", user_prompt}}}},
      {"temperature", impl_->config.sampling.temperature},
      {"top_p", impl_->config.sampling.top_p},
      {"max_tokens", impl_->config.max_tokens},
  };
  return body.dump();
}

std::string HttpChatProvider::complete(const std::string& system_prompt,
                                       const std::string& user_prompt) {
  const std::string body = build_request_body(system_prompt, user_prompt);
  httplib::Headers headers;
  if (!impl_->api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + impl_->api_key);
  }
  const std::string path = impl_->target.path_prefix + impl_->config.chat_path;

  auto backoff = impl_->config.initial_backoff;
  std::string last_error = "no attempt made";
  for (int attempt = 1; attempt <= impl_->config.max_retries; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    if (impl_->limiter) impl_->limiter->acquire();
    httplib::Client client(impl_->target.host);
    const auto secs =
        std::chrono::duration_cast<std::chrono::seconds>(impl_->config.timeout);
    client.set_connection_timeout(secs.count(), 0);
    client.set_read_timeout(secs.count(), 0);
    auto result = client.Post(path, headers, body, "application/json");
    if (impl_->limiter) impl_->limiter->release();

    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status == 401 || result->status == 403) {
      // The message deliberately omits the key and headers.
      throw LlmAuthError("authentication rejected (HTTP " +
                         std::to_string(result->status) + ") for model '" +
                         impl_->config.model + "'");
    }
    if (result->status == 408 || result->status == 429 || result->status >= 500) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200) {
      throw LlmError("chat request failed with HTTP " + std::to_string(result->status));
    }
    try {
      const auto json = nlohmann::json::parse(result->body);
      return json.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw LlmError(std::string("malformed chat response: ") + e.what());
    }
  }
  throw LlmError("chat request failed after " + std::to_string(impl_->config.max_retries) +
                 " attempts; last error: " + last_error);
}

// ---------------------------------------------------------------------------
// Scripted provider and retry decorator.
// ---------------------------------------------------------------------------

ScriptedProvider::ScriptedProvider(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {}

ScriptedProvider ScriptedProvider::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LlmError("cannot open script file '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return ScriptedProvider(std::move(tokens));
}

std::string ScriptedProvider::complete(const std::string&, const std::string&) {
  if (next_ >= tokens_.size()) {
    throw LlmError("script exhausted after " + std::to_string(tokens_.size()) + " completions");
  }
  std::string token = tokens_[next_++];
  if (token == "<FAIL>") throw LlmError("scripted transient failure");
  return token;
}

RetryingProvider::RetryingProvider(std::shared_ptr<ChatProvider> inner, int max_attempts,
                                   std::chrono::milliseconds initial_backoff)
    : inner_(std::move(inner)), max_attempts_(max_attempts), initial_backoff_(initial_backoff) {
  if (max_attempts < 1) throw std::invalid_argument("retry: max_attempts must be >= 1");
}

std::string RetryingProvider::complete(const std::string& system_prompt,
                                       const std::string& user_prompt) {
  auto backoff = initial_backoff_;
  last_attempts_ = 0;
  for (;;) {
    ++last_attempts_;
    try {
      return inner_->complete(system_prompt, user_prompt);
    } catch (const LlmAuthError&) {
      throw;
    } catch (const LlmError&) {
      if (last_attempts_ >= max_attempts_) throw;
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

// ---------------------------------------------------------------------------
// Agent facade.
// ---------------------------------------------------------------------------

ChatExchange complete_exchange(ChatProvider& provider, const History& history,
                               int next_trial) {
  ChatExchange exchange;
  exchange.system_text = render_system_prompt();
  exchange.user_text = render_user_prompt(history, next_trial);
  const auto start = std::chrono::steady_clock::now();
  exchange.raw_response = provider.complete(exchange.system_text, exchange.user_text);
  exchange.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  exchange.parsed = parse_choice_token(exchange.raw_response);
  return exchange;
}

LlmAgent::LlmAgent(std::shared_ptr<ChatProvider> provider, std::string name)
    : provider_(std::move(provider)), name_(std::move(name)) {}

Choice LlmAgent::choose(const History& history) {
  const int next_trial = static_cast<int>(history.size()) + 1;
  const ChatExchange exchange = complete_exchange(*provider_, history, next_trial);
  last_raw_ = exchange.raw_response;
  return exchange.parsed;
}

}  // namespace banditlab
