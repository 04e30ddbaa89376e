#include <ostream>

#include "agentcrowd/cli.hpp"
#include "agentcrowd/util.hpp"

namespace agentcrowd {

using nlohmann::json;

namespace {

std::vector<std::string> claim_ids(const Corpus& c) {
  std::vector<std::string> ids;
  for (const auto& claim : c.claims) ids.push_back(claim.id);
  return ids;
}

std::filesystem::path crowd_file(const AppConfig& config) { return config.output_dir / "crowd.json"; }

}  // namespace

Corpus load_run_corpus(const AppConfig& config) {
  Corpus base = load_corpus(config.corpus);
  const auto prepared = config.prepared_corpus_path();
  if (std::filesystem::exists(prepared)) {
    Corpus p = load_corpus(prepared);
    // A prepared file left over from a different corpus is ignored.
    if (claim_ids(p) == claim_ids(base)) base = std::move(p);
  }
  const auto& f = config.corpus_filter;
  if (f.topics.empty() && !f.date_from && !f.date_to) return base;
  return filter_corpus(base, f);
}

std::vector<AgentProfile> load_crowd(const AppConfig& config) {
  if (config.crowd_profiles) return load_profiles(*config.crowd_profiles);
  if (!config.crowd_spec) throw ConfigError("no crowd spec or profiles configured");
  return build_crowd(load_demographic_spec(*config.crowd_spec), derive_seed(config.run.seed, "crowd"));
}

RunConfig make_run_config(const AppConfig& config, std::shared_ptr<const Corpus> corpus,
                          std::vector<AgentProfile> crowd, std::shared_ptr<Backend> backend) {
  RunConfig rc;
  rc.corpus = std::move(corpus);
  rc.crowd = std::move(crowd);
  rc.per_agent_load = config.run.agent_load;
  rc.per_claim_raters = config.run.raters_per_claim;
  rc.backend = std::move(backend);
  rc.model_id = config.backend.model_id;
  rc.temperature = config.backend.temperature;
  rc.max_tokens = config.backend.max_tokens;
  rc.retry = config.backend.retry;
  if (config.backend.kind == BackendKind::Mock) {
    auto oracle = config.backend.oracle;
    if (!config.backend.oracle_seed_explicit) oracle.seed = config.run.seed;
    rc.backend_params["oracle"] = oracle_to_json(oracle);
  } else {
    rc.backend_params["endpoint"] = config.backend.endpoint;
  }
  rc.evidence_mode = config.run.evidence_mode;
  rc.seed = config.run.seed;
  rc.parallelism = config.run.parallelism;
  rc.output = config.log_path();
  return rc;
}

PrepareResult cmd_prepare(const AppConfig& config, std::ostream& log) {
  auto source = load_corpus(config.corpus);
  // Continue from an earlier prepared file of the same corpus.
  if (std::filesystem::exists(config.prepared_corpus_path())) {
    auto prepared = load_corpus(config.prepared_corpus_path());
    if (claim_ids(prepared) == claim_ids(source)) {
      source = std::move(prepared);
    } else {
      log << "warning: existing prepared corpus has different claims; starting over\n";
    }
  }
  auto corpus = std::make_shared<const Corpus>(std::move(source));
  auto backend = make_backend(config, corpus);
  SummarizeOptions options;
  options.model_id = config.backend.model_id;
  options.temperature = config.backend.temperature;
  options.max_tokens = config.backend.max_tokens;
  options.retry = config.backend.retry;

  PrepareResult out;
  out.summary = summarize_corpus(*corpus, *backend, options);
  out.output = config.prepared_corpus_path();
  save_corpus(out.summary.corpus, out.output);
  for (const auto& w : out.summary.warnings) log << "warning: " << w << "\n";
  log << "prepared corpus written to " << out.output.string() << " (" << out.summary.requests_issued
      << " summary requests)\n";
  return out;
}

RunResult cmd_simulate(const AppConfig& config, const SimulateOptions& options, std::ostream& log) {
  auto corpus = std::make_shared<const Corpus>(load_run_corpus(config));
  auto crowd = load_crowd(config);
  auto backend = make_backend(config, corpus);
  auto rc = make_run_config(config, corpus, crowd, backend);
  rc.max_records = options.max_records;

  std::size_t last_tenth = 0;
  rc.progress = [&](std::size_t done, std::size_t total) {
    const std::size_t tenth = total == 0 ? 10 : done * 10 / total;
    if (tenth != last_tenth || done == total) {
      last_tenth = tenth;
      log << "progress: " << done << "/" << total << " records\n" << std::flush;
    }
  };

  write_text_file(crowd_file(config), profiles_to_json(crowd).dump(2) + "\n");
  auto result = options.resume ? resume(config.log_path(), rc) : run_simulation(rc);
  log << "run log written to " << config.log_path().string() << "\n";
  return result;
}

ReportBundle evaluate_sets(const AppConfig& config, const Corpus& corpus, std::span<const AnnotationSet> sets,
                           std::span<const AgentProfile> crowd) {
  ReportBundle bundle;
  for (const auto& set : sets) {
    for (const auto& w : set.warnings) bundle.warnings.push_back(set.crowd + ": " + w);
    for (auto scale : config.report.scales) {
      auto r = evaluate(set, corpus, scale, config.report.eval);
      for (const auto& w : r.warnings) bundle.warnings.push_back(set.crowd + " " + std::string(scale_name(scale)) + ": " + w);
      bundle.reports.push_back(std::move(r));
    }
    for (const auto& grouping : config.report.groupings) {
      const auto key = group_key_from_string(grouping);
      if (key.kind == GroupKind::Trait && set.provenance == Provenance::HumanCsv) {
        bundle.warnings.push_back(set.crowd + ": no rater profiles for human annotations; grouping '" + grouping +
                                  "' skipped");
        continue;
      }
      for (auto scale : config.report.scales) {
        auto reports = breakdown(set, corpus, crowd, key, scale, config.report.eval, config.run.seed, &bundle.warnings);
        bundle.reports.insert(bundle.reports.end(), reports.begin(), reports.end());
        if (key.kind == GroupKind::Trait) {
          if (auto t = trait_test(set, corpus, crowd, *key.trait, scale)) bundle.trait_tests.push_back(std::move(*t));
        }
      }
    }
    const bool has_dimensions =
        std::any_of(set.entries.begin(), set.entries.end(), [](const Annotation& a) { return a.dimensions.has_value(); });
    if (has_dimensions) bundle.correlations.push_back(dimension_correlations(set, config.report.correlation));
    auto dist = rating_distribution(set, corpus);
    bundle.distributions.insert(bundle.distributions.end(), dist.begin(), dist.end());
  }
  return bundle;
}

ReportBundle cmd_evaluate(const AppConfig& config, const EvaluateInputs& inputs, std::ostream& log) {
  const Corpus corpus = load_run_corpus(config);
  std::vector<AgentProfile> crowd =
      std::filesystem::exists(crowd_file(config)) ? load_profiles(crowd_file(config)) : load_crowd(config);

  auto logs = inputs.logs;
  if (logs.empty() && inputs.humans.empty()) logs.push_back({"", config.log_path()});

  std::vector<AnnotationSet> sets;
  for (const auto& [label, path] : logs) {
    const auto run = read_run_log(path);
    std::string name = label;
    if (name.empty()) name = config.report.crowd_label;
    if (name.empty()) name = run.header.at("config").at("backend").value("model_id", "agents");
    sets.push_back(annotations_from_run_log(run, corpus, name));
    log << "loaded " << sets.back().entries.size() << " judgments from " << path.string() << "\n";
  }
  for (const auto& [label, path] : inputs.humans) {
    sets.push_back(annotations_from_csv(path, corpus, label.empty() ? "Humans" : label));
    log << "loaded " << sets.back().entries.size() << " human judgments from " << path.string() << "\n";
  }

  auto bundle = evaluate_sets(config, corpus, sets, crowd);
  for (const auto& p : write_bundle(bundle, config.report_dir(), config.report.csv, config.report.markdown)) {
    log << "wrote " << p.string() << "\n";
  }
  return bundle;
}

std::vector<std::filesystem::path> write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir,
                                                bool csv, bool markdown) {
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    write_text_file(dir / name, text);
    written.push_back(dir / name);
  };
  put("bundle.json", bundle_to_json(bundle).dump(2) + "\n");
  if (csv) {
    put("reports.csv", reports_to_csv(bundle.reports));
    put("distributions.csv", distributions_to_csv(bundle.distributions));
    put("correlations.csv", correlations_to_csv(bundle.correlations));
    put("trait_tests.csv", trait_tests_to_csv(bundle.trait_tests));
  }
  if (markdown) put("report.md", bundle_to_markdown(bundle));
  return written;
}

ReportBundle cmd_report(std::span<const std::filesystem::path> bundles, const std::filesystem::path& out_dir,
                        std::ostream& log) {
  if (bundles.empty()) throw MissingInputError("report: no report bundles given");
  std::vector<ReportBundle> loaded;
  for (const auto& path : bundles) {
    if (!std::filesystem::exists(path)) throw MissingInputError("report bundle not found: " + path.string());
    const auto doc = json::parse(read_text_file(path), nullptr, false);
    if (doc.is_discarded()) throw ParseError("report bundle is not valid JSON: " + path.string());
    loaded.push_back(bundle_from_json(doc));
  }
  auto merged = merge_bundles(loaded);
  for (const auto& p : write_bundle(merged, out_dir, true, true)) log << "wrote " << p.string() << "\n";
  return merged;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) != nullptr) return 1;
  if (dynamic_cast<const BackendError*>(&e) != nullptr) return 2;
  return 3;
}

json error_report(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  return {{"error",
           {{"kind", err != nullptr ? err->kind() : "InternalError"},
            {"message", e.what()},
            {"exit_code", exit_code_for(e)}}}};
}

}  // namespace agentcrowd
