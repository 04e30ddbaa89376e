#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agentcrowd/backend.hpp"
#include "agentcrowd/corpus.hpp"
#include "agentcrowd/crowd.hpp"
#include "agentcrowd/prompts.hpp"

namespace agentcrowd {

enum class EvidenceMode { Selected, None };

std::string_view evidence_mode_name(EvidenceMode m);
std::optional<EvidenceMode> evidence_mode_from_name(std::string_view name);

inline constexpr std::string_view kRunLogFormat = "agentcrowd-runlog/1";

struct RunConfig {
  std::shared_ptr<const Corpus> corpus;
  std::vector<AgentProfile> crowd;
  std::optional<int> per_agent_load;  // nullopt: balanced loads
  int per_claim_raters = 10;

  std::shared_ptr<Backend> backend;
  std::string model_id = "mock-oracle";
  double temperature = 0.0;
  int max_tokens = 1024;
  RetryPolicy retry;
  // Extra backend parameters recorded in the log header (endpoint, oracle...).
  nlohmann::json backend_params = nlohmann::json::object();

  EvidenceMode evidence_mode = EvidenceMode::Selected;
  std::uint64_t seed = 0;
  int parallelism = 4;
  std::filesystem::path output;

  // Stop once this many records are in the log (a deliberately partial run).
  std::optional<std::size_t> max_records;
  // Fixed timestamps and zero latency so logs are byte-reproducible.
  // Defaults to true for the mock backend.
  std::optional<bool> deterministic_clock;
  Sleeper sleep = real_sleep;
  // Called after each record is written: (records in log, planned records).
  std::function<void(std::size_t, std::size_t)> progress;
};

struct Exchange {
  int attempt = 0;
  nlohmann::json request;
  std::string response;  // raw response body, or empty when the call failed
  std::string error;     // transport-level error, if any
};

struct RunRecord {
  std::uint64_t seq = 0;
  std::string agent_id;
  std::string claim_id;
  Phase phase = Phase::Questionnaire;
  std::string prompt_digest;
  std::string model_id;
  std::string started_at;
  std::string finished_at;
  long long latency_ms = 0;
  int attempts = 0;
  std::vector<Exchange> exchanges;
  std::string reply;  // last raw completion text
  std::optional<EvidenceChoice> evidence;
  std::optional<QuestionnaireResponse> questionnaire;
  std::optional<FailureRecord> failure;
  bool fallback = false;  // evidence phase fell back to the first candidate
  std::vector<std::string> warnings;
};

nlohmann::json record_to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

struct RunLog {
  nlohmann::json header;
  std::vector<RunRecord> records;

  std::size_t count(Phase p) const;
};

// Reads a JSON-lines log (plain or gzip). A truncated trailing line is
// dropped; any other malformed line throws CorruptLogError.
RunLog read_run_log(const std::filesystem::path& path);

struct RunSummary {
  std::size_t records = 0;
  std::size_t evidence_records = 0;
  std::size_t questionnaire_records = 0;
  std::size_t assigned_pairs = 0;
  std::size_t requests_issued = 0;  // by this execution
  std::size_t fallbacks = 0;
  std::map<std::string, std::size_t> failures;  // by kind
  bool complete = false;
  double wall_seconds = 0.0;

  std::size_t failure_count() const;
  // Failures caused by the backend rather than by the model's replies.
  std::size_t backend_failure_count() const;
  nlohmann::json to_json() const;
};

struct RunResult {
  RunLog log;
  RunSummary summary;
};

// Header snapshot excludes parallelism, output path and max_records.
nlohmann::json run_header(const RunConfig& config);

// Throws ConfigError / InfeasibleDesignError before any request is issued.
RunResult run_simulation(const RunConfig& config);

// Completes only the steps missing from an existing log. Throws
// DigestMismatchError when the log header does not match `config`.
RunResult resume(const std::filesystem::path& log_path, RunConfig config);

struct SummarizeOptions {
  std::string model_id = "mock-oracle";
  double temperature = 0.0;
  int max_tokens = 1024;
  RetryPolicy retry;
  std::size_t segment_chars = kDefaultSegmentChars;
  Sleeper sleep = real_sleep;
};

struct PageFailure {
  std::string claim_id;
  int page = 0;
  FailureRecord failure;
};

struct SummarizeResult {
  Corpus corpus;
  std::vector<PageFailure> failures;
  std::vector<std::string> warnings;
  std::size_t requests_issued = 0;
};

// Fills missing summaries from page text; existing summaries are untouched.
SummarizeResult summarize_corpus(const Corpus& corpus, Backend& backend, const SummarizeOptions& options);

}  // namespace agentcrowd
