#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agentcrowd/backend.hpp"
#include "agentcrowd/corpus.hpp"
#include "agentcrowd/crowd.hpp"
#include "agentcrowd/metrics/report.hpp"
#include "agentcrowd/runner.hpp"

namespace agentcrowd {

enum class BackendKind { Mock, Http };

struct BackendSection {
  BackendKind kind = BackendKind::Mock;
  std::string endpoint;
  std::string model_id = "mock-oracle";
  double temperature = 0.0;
  int max_tokens = 1024;
  std::chrono::seconds timeout{120};
  RetryPolicy retry;
  OracleConfig oracle;
  // Without an explicit oracle seed the mock follows run.seed.
  bool oracle_seed_explicit = false;
};

struct RunSection {
  int raters_per_claim = 10;
  std::optional<int> agent_load;  // nullopt: balanced
  EvidenceMode evidence_mode = EvidenceMode::Selected;
  std::uint64_t seed = 0;
  int parallelism = 4;
  std::string log_name = "run.jsonl";
};

struct ReportSection {
  std::vector<Scale> scales = {Scale::Two, Scale::Six};
  std::vector<std::string> groupings;
  bool csv = true;
  bool markdown = true;
  EvalOptions eval;
  CorrelationMode correlation = CorrelationMode::Response;
  std::string crowd_label;  // default: the run's model id
};

// Relative paths are resolved against the config file's directory.
struct AppConfig {
  std::filesystem::path corpus;
  CorpusFilter corpus_filter;
  std::optional<std::filesystem::path> crowd_spec;
  std::optional<std::filesystem::path> crowd_profiles;
  BackendSection backend;
  RunSection run;
  ReportSection report;
  std::filesystem::path output_dir = "out";

  std::filesystem::path prepared_corpus_path() const { return output_dir / "corpus.prepared.json"; }
  std::filesystem::path log_path() const { return output_dir / run.log_name; }
  std::filesystem::path report_dir() const { return output_dir / "report"; }
};

// Throws ConfigError (also for unknown keys). A seed is mandatory.
AppConfig app_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
AppConfig load_app_config(const std::filesystem::path& path);
nlohmann::json app_config_to_json(const AppConfig& c);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<std::string> evidence_mode;
  std::optional<int> raters;
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> output_dir;
};

void apply_overrides(AppConfig& config, const Overrides& o);

// API key comes from LLM_API_KEY; the mock backend needs the corpus.
std::shared_ptr<Backend> make_backend(const AppConfig& config, std::shared_ptr<const Corpus> corpus);

// Corpus used by simulate: the prepared file when it exists, otherwise the
// configured corpus; the configured filter is applied either way.
Corpus load_run_corpus(const AppConfig& config);

// Crowd from explicit profiles, or built from the spec with the run seed.
std::vector<AgentProfile> load_crowd(const AppConfig& config);

RunConfig make_run_config(const AppConfig& config, std::shared_ptr<const Corpus> corpus,
                          std::vector<AgentProfile> crowd, std::shared_ptr<Backend> backend);

struct PrepareResult {
  std::filesystem::path output;
  SummarizeResult summary;
};

PrepareResult cmd_prepare(const AppConfig& config, std::ostream& log);

struct SimulateOptions {
  bool resume = false;
  std::optional<std::size_t> max_records;
};

RunResult cmd_simulate(const AppConfig& config, const SimulateOptions& options, std::ostream& log);

struct LabeledPath {
  std::string label;  // empty: derived
  std::filesystem::path path;
};

struct EvaluateInputs {
  std::vector<LabeledPath> logs;    // empty: the configured run log
  std::vector<LabeledPath> humans;  // human annotation CSV files
};

ReportBundle evaluate_sets(const AppConfig& config, const Corpus& corpus, std::span<const AnnotationSet> sets,
                           std::span<const AgentProfile> crowd);

ReportBundle cmd_evaluate(const AppConfig& config, const EvaluateInputs& inputs, std::ostream& log);

// Writes bundle.json plus the requested CSV / Markdown files into `dir`.
std::vector<std::filesystem::path> write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir,
                                                bool csv, bool markdown);

// Throws MissingInputError for an empty list or missing files.
ReportBundle cmd_report(std::span<const std::filesystem::path> bundles, const std::filesystem::path& out_dir,
                        std::ostream& log);

// Exit codes: 0 success, 1 validation, 2 backend, 3 internal.
int exit_code_for(const std::exception& e);
nlohmann::json error_report(const std::exception& e);

int run_cli(int argc, char** argv);

}  // namespace agentcrowd
