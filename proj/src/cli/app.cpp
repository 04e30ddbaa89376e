#include <CLI11.hpp>

#include <iostream>

#include "agentcrowd/cli.hpp"
#include "agentcrowd/util.hpp"

namespace agentcrowd {

namespace {

LabeledPath labeled(const std::string& arg) {
  // "label=path"; a bare path keeps the default label.
  const auto eq = arg.find('=');
  if (eq == std::string::npos) return {"", arg};
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

struct CommonArgs {
  std::string config;
  Overrides overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<std::string> evidence_mode;
  std::optional<int> raters;
  std::optional<std::string> corpus;
  std::optional<std::string> output_dir;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "experiment config (JSON)")->required();
    cmd->add_option("--seed", seed, "override run.seed");
    cmd->add_option("--backend", backend, "override backend.kind (mock|http)");
    cmd->add_option("--evidence-mode", evidence_mode, "override run.evidence_mode (selected|none)");
    cmd->add_option("--raters", raters, "override run.raters_per_claim (balanced loads)");
    cmd->add_option("--corpus", corpus, "override the corpus path");
    cmd->add_option("--output-dir", output_dir, "override output_dir");
  }

  AppConfig load() const {
    auto c = load_app_config(config);
    Overrides o;
    o.seed = seed;
    o.backend = backend;
    o.evidence_mode = evidence_mode;
    o.raters = raters;
    if (corpus) o.corpus = *corpus;
    if (output_dir) o.output_dir = *output_dir;
    apply_overrides(c, o);
    return c;
  }
};

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Simulated crowds of LLM agents for fact-checking, and the metrics to judge them."};
  app.require_subcommand(1);

  CommonArgs prepare_args, crowd_args, simulate_args, evaluate_args;

  auto* prepare = app.add_subcommand("prepare", "fill missing evidence summaries into a prepared corpus");
  prepare_args.attach(prepare);

  auto* crowd = app.add_subcommand("crowd", "build agent profiles and print the crowd's composition");
  crowd_args.attach(crowd);

  auto* simulate = app.add_subcommand("simulate", "run the two-phase protocol and write the run log");
  simulate_args.attach(simulate);
  bool resume_flag = false;
  std::optional<std::size_t> max_records;
  simulate->add_flag("--resume", resume_flag, "complete an interrupted run log");
  simulate->add_option("--max-records", max_records, "stop after this many log records");

  auto* evaluate = app.add_subcommand("evaluate", "compute metric reports from run logs and human annotations");
  evaluate_args.attach(evaluate);
  std::vector<std::string> log_args, human_args;
  evaluate->add_option("--log", log_args, "run log, optionally label=path (repeatable)");
  evaluate->add_option("--human", human_args, "human annotation CSV, optionally label=path (repeatable)");

  auto* report = app.add_subcommand("report", "merge report bundles into Markdown and CSV tables");
  std::vector<std::string> bundle_args;
  std::string report_out = "report";
  report->add_option("bundles", bundle_args, "bundle.json files written by evaluate");
  report->add_option("-o,--output-dir", report_out, "directory for the merged tables");

  auto* synth = app.add_subcommand("synth-corpus", "write the synthetic fixture corpus");
  std::string synth_out;
  std::uint64_t synth_seed = 2022;
  bool no_summaries = false;
  synth->add_option("-o,--output", synth_out, "output corpus path")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_flag("--no-summaries", no_summaries, "leave evidence summaries empty");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (prepare->parsed()) {
      const auto result = cmd_prepare(prepare_args.load(), std::cerr);
      nlohmann::json failures = nlohmann::json::array();
      for (const auto& f : result.summary.failures) {
        failures.push_back({{"claim_id", f.claim_id}, {"page", f.page}, {"failure", failure_to_json(f.failure)}});
      }
      std::cout << nlohmann::json{{"output", result.output.string()},
                                  {"requests_issued", result.summary.requests_issued},
                                  {"failures", failures},
                                  {"warnings", result.summary.warnings}}
                       .dump(2)
                << "\n";
      return result.summary.failures.empty() ? 0 : 2;
    }
    if (crowd->parsed()) {
      const auto config = crowd_args.load();
      const auto profiles = load_crowd(config);
      const auto path = config.output_dir / "crowd.json";
      write_text_file(path, profiles_to_json(profiles).dump(2) + "\n");
      nlohmann::json traits = nlohmann::json::array();
      for (const auto& comp : marginal_report(profiles)) {
        nlohmann::json shares = nlohmann::json::array();
        for (const auto& s : comp.shares) shares.push_back({{"category", s.category}, {"count", s.count}, {"percent", s.percent}});
        traits.push_back({{"trait", trait_info(comp.trait).key}, {"shares", shares}});
      }
      std::cout << nlohmann::json{{"output", path.string()}, {"agents", profiles.size()}, {"marginals", traits}}.dump(2)
                << "\n";
      return 0;
    }
    if (simulate->parsed()) {
      const auto result = cmd_simulate(simulate_args.load(), {resume_flag, max_records}, std::cerr);
      std::cout << result.summary.to_json().dump(2) << "\n";
      return result.summary.backend_failure_count() == 0 ? 0 : 2;
    }
    if (evaluate->parsed()) {
      EvaluateInputs inputs;
      for (const auto& a : log_args) inputs.logs.push_back(labeled(a));
      for (const auto& a : human_args) inputs.humans.push_back(labeled(a));
      const auto config = evaluate_args.load();
      const auto bundle = cmd_evaluate(config, inputs, std::cerr);
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& r : bundle.reports) {
        if (r.group_key.empty()) rows.push_back(report_to_json(r));
      }
      std::cout << nlohmann::json{{"report_dir", config.report_dir().string()}, {"overall", rows}}.dump(2) << "\n";
      return 0;
    }
    if (report->parsed()) {
      std::vector<std::filesystem::path> paths(bundle_args.begin(), bundle_args.end());
      const auto merged = cmd_report(paths, report_out, std::cerr);
      std::cout << nlohmann::json{{"output_dir", report_out}, {"reports", merged.reports.size()}}.dump(2) << "\n";
      return 0;
    }
    if (synth->parsed()) {
      SyntheticCorpusOptions options;
      options.seed = synth_seed;
      options.with_summaries = !no_summaries;
      const auto corpus = synthetic_corpus(options);
      save_corpus(corpus, synth_out);
      std::cout << nlohmann::json{{"output", synth_out}, {"claims", corpus.claims.size()}}.dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << error_report(e).dump() << "\n";
    return exit_code_for(e);
  }
  return 3;
}

}  // namespace agentcrowd
