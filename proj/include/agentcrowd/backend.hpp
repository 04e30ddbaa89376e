#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agentcrowd/corpus.hpp"
#include "agentcrowd/error.hpp"
#include "agentcrowd/prompts.hpp"

namespace agentcrowd {

enum class Phase { Evidence, Questionnaire, Summary };

std::string_view phase_name(Phase p);
std::optional<Phase> phase_from_name(std::string_view name);

// Identifies one logical protocol step: "agent_id:claim_id:phase", or
// "summary:claim_id:page" for summarization.
struct RequestTag {
  std::string agent_id;
  std::string claim_id;
  Phase phase = Phase::Questionnaire;
  int page = -1;  // summary phase only

  std::string str() const;
  bool operator==(const RequestTag&) const = default;
};

struct ChatRequest {
  std::optional<PromptText> system;
  PromptText user;
  std::string model_id;
  double temperature = 0.0;
  int max_tokens = 1024;
  RequestTag tag;
};

// OpenAI-compatible chat-completions body.
nlohmann::json chat_request_body(const ChatRequest& request);

struct RawCompletion {
  std::string text;
  std::string model_id;
  std::chrono::milliseconds latency{0};
  int attempt = 1;
  nlohmann::json request_body;
  std::string response_body;
};

// HTTP 5xx or 429; retried by policy.
class HttpStatusError : public TransportError {
 public:
  HttpStatusError(int status, const std::string& what) : TransportError(what), status_(status) {}
  int status() const noexcept { return status_; }
  const char* kind() const noexcept override { return "HttpStatusError"; }

 private:
  int status_;
};

// One request, one attempt. Implementations are safe to call concurrently.
// Throws TransportError / HttpStatusError / TimeoutError / AuthError.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual RawCompletion complete(const ChatRequest& request) = 0;
  virtual std::string kind() const = 0;
};

struct RetryOn {
  bool transport = true;
  bool http_5xx = true;
  bool http_429 = true;
  bool parse_failure = true;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};
  double backoff_multiplier = 2.0;
  RetryOn retry_on;

  // Delay before attempt `next_attempt` (>= 2).
  std::chrono::milliseconds backoff_before(int next_attempt) const;
  void validate() const;  // throws ConfigError
};

struct FailureRecord {
  std::string kind;  // parse | transport | http_status | timeout | auth | backend | internal
  std::string reason;
  int attempts = 0;

  bool operator==(const FailureRecord&) const = default;
};

nlohmann::json failure_to_json(const FailureRecord& f);
FailureRecord failure_from_json(const nlohmann::json& j);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

// Instruction appended to the user prompt after a rejected reply.
std::string corrective_instruction(std::string_view violated_rule);

template <class T>
struct StepResult {
  std::optional<T> value;
  std::optional<FailureRecord> failure;
  int attempts = 0;
};

// Runs `step(attempt, corrective)` until it succeeds or the policy is
// exhausted. `corrective` is non-null after a parse failure and names the
// violated rule. Library errors never escape; they end in a FailureRecord.
template <class T, class Step>
StepResult<T> with_retries(const RetryPolicy& policy, Step&& step, const Sleeper& sleep = real_sleep) {
  StepResult<T> out;
  std::optional<std::string> corrective;
  FailureRecord last;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    out.attempts = attempt;
    bool retryable = false;
    try {
      out.value.emplace(step(attempt, corrective ? &*corrective : static_cast<const std::string*>(nullptr)));
      return out;
    } catch (const AuthError& e) {
      last = {"auth", e.what(), attempt};
    } catch (const TimeoutError& e) {
      last = {"timeout", e.what(), attempt};
      retryable = policy.retry_on.transport;
    } catch (const HttpStatusError& e) {
      last = {"http_status", e.what(), attempt};
      retryable = e.status() == 429 ? policy.retry_on.http_429 : policy.retry_on.http_5xx;
    } catch (const TransportError& e) {
      last = {"transport", e.what(), attempt};
      retryable = policy.retry_on.transport;
    } catch (const BackendError& e) {
      last = {"backend", e.what(), attempt};
    } catch (const ValidationError& e) {
      last = {"parse", e.what(), attempt};
      retryable = policy.retry_on.parse_failure;
      corrective = corrective_instruction(e.what());
    } catch (const Error& e) {
      last = {"internal", e.what(), attempt};
    }
    if (!retryable) break;
    if (attempt < policy.max_attempts && last.kind != "parse") sleep(policy.backoff_before(attempt + 1));
  }
  out.failure = last;
  return out;
}

// Retries transport-level failures only; throws the last error on exhaustion.
RawCompletion complete_with_policy(Backend& backend, const ChatRequest& request, const RetryPolicy& policy,
                                   const Sleeper& sleep = real_sleep);

enum class EvidenceRule { First, SeededUniform };

struct OracleConfig {
  std::uint64_t seed = 0;
  double truthfulness_noise = 0.0;  // probability of a uniform 0..5 answer
  std::array<double, kDimensionCount> dimension_bias{0.5, 0.0, 1.0, 0.0, -0.5, 0.0, 0.5};
  double dimension_spread = 0.75;  // sd of the rating noise
  // Added to every dimension mean: coupling * (truthfulness - 2.5) / 2.5.
  double truth_coupling = 0.0;
  EvidenceRule evidence_rule = EvidenceRule::First;
  // Probability that a reply is wrapped in prose or a Markdown fence.
  double wrap_rate = 0.0;

  void validate() const;  // throws ConfigError
};

nlohmann::json oracle_to_json(const OracleConfig& c);
OracleConfig oracle_from_json(const nlohmann::json& j);

// Deterministic stand-in model answering from the corpus ground truth.
// Replies are a pure function of (request tag, config).
class MockBackend final : public Backend {
 public:
  MockBackend(std::shared_ptr<const Corpus> corpus, OracleConfig config, std::string model_id = "mock-oracle");

  RawCompletion complete(const ChatRequest& request) override;
  std::string kind() const override { return "mock"; }

  const OracleConfig& config() const { return config_; }

 private:
  std::string evidence_reply(const Claim& claim, const RequestTag& tag) const;
  std::string questionnaire_reply(const Claim& claim, const RequestTag& tag) const;
  std::string summary_reply(const Claim& claim, const RequestTag& tag) const;
  std::string wrap(std::string reply, const RequestTag& tag) const;

  std::shared_ptr<const Corpus> corpus_;
  OracleConfig config_;
  std::string model_id_;
};

struct HttpBackendConfig {
  std::string endpoint;  // e.g. http://localhost:8000/v1
  std::string api_key;   // empty: no Authorization header
  std::chrono::seconds timeout{120};
  int max_in_flight = 4;
};

// OpenAI-compatible POST {endpoint}/chat/completions.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  RawCompletion complete(const ChatRequest& request) override;
  std::string kind() const override { return "http"; }

  int in_flight_peak() const;

 private:
  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
  int peak_ = 0;
};

// Parses choices[0].message.content; throws TransportError when absent.
std::string completion_content(std::string_view response_body);

}  // namespace agentcrowd
