#include <cstdlib>

#include "agentcrowd/cli.hpp"
#include "agentcrowd/util.hpp"

namespace agentcrowd {

using nlohmann::json;

namespace {

void only_keys(const json& j, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + ": expected an object");
  for (const auto& [key, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(std::string(section) + ": unexpected field '" + key + "'");
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

template <class T>
T get(const json& j, std::string_view section, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(section) + "." + key + ": missing or wrong type");
  }
}

RetryPolicy retry_from_json(const json& j) {
  only_keys(j, "backend.retry", {"max_attempts", "backoff_base_ms", "backoff_multiplier", "retry_on"});
  RetryPolicy r;
  if (j.contains("max_attempts")) r.max_attempts = get<int>(j, "backend.retry", "max_attempts");
  if (j.contains("backoff_base_ms")) {
    r.backoff_base = std::chrono::milliseconds(get<long long>(j, "backend.retry", "backoff_base_ms"));
  }
  if (j.contains("backoff_multiplier")) r.backoff_multiplier = get<double>(j, "backend.retry", "backoff_multiplier");
  if (j.contains("retry_on")) {
    const auto& on = j.at("retry_on");
    only_keys(on, "backend.retry.retry_on", {"transport", "http_5xx", "http_429", "parse_failure"});
    r.retry_on.transport = on.value("transport", true);
    r.retry_on.http_5xx = on.value("http_5xx", true);
    r.retry_on.http_429 = on.value("http_429", true);
    r.retry_on.parse_failure = on.value("parse_failure", true);
  }
  r.validate();
  return r;
}

json retry_to_json(const RetryPolicy& r) {
  return {{"max_attempts", r.max_attempts},
          {"backoff_base_ms", r.backoff_base.count()},
          {"backoff_multiplier", r.backoff_multiplier},
          {"retry_on",
           {{"transport", r.retry_on.transport},
            {"http_5xx", r.retry_on.http_5xx},
            {"http_429", r.retry_on.http_429},
            {"parse_failure", r.retry_on.parse_failure}}}};
}

Scale parse_scale(const std::string& s) {
  const auto scale = scale_from_name(s);
  if (!scale) throw ConfigError("report.scales: unknown scale '" + s + "'");
  return *scale;
}

}  // namespace

AppConfig app_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  only_keys(j, "config", {"corpus", "corpus_filter", "crowd", "backend", "run", "report", "output_dir"});
  AppConfig c;
  c.corpus = resolve(base_dir, get<std::string>(j, "config", "corpus"));

  if (j.contains("corpus_filter")) {
    const auto& f = j.at("corpus_filter");
    only_keys(f, "corpus_filter", {"topics", "date_from", "date_to"});
    c.corpus_filter.topics = f.value("topics", std::vector<std::string>{});
    try {
      if (f.contains("date_from")) c.corpus_filter.date_from = parse_iso_date(f.at("date_from").get<std::string>());
      if (f.contains("date_to")) c.corpus_filter.date_to = parse_iso_date(f.at("date_to").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("corpus_filter: ") + e.what());
    }
  }

  if (!j.contains("crowd")) throw ConfigError("config: missing 'crowd' section");
  const auto& crowd = j.at("crowd");
  only_keys(crowd, "crowd", {"spec", "profiles"});
  if (crowd.contains("spec") == crowd.contains("profiles")) {
    throw ConfigError("crowd: give exactly one of 'spec' or 'profiles'");
  }
  if (crowd.contains("spec")) c.crowd_spec = resolve(base_dir, get<std::string>(crowd, "crowd", "spec"));
  if (crowd.contains("profiles")) c.crowd_profiles = resolve(base_dir, get<std::string>(crowd, "crowd", "profiles"));

  if (j.contains("backend")) {
    const auto& b = j.at("backend");
    only_keys(b, "backend", {"kind", "endpoint", "model_id", "temperature", "max_tokens", "timeout_seconds", "retry",
                             "oracle"});
    const auto kind = get<std::string>(b, "backend", "kind");
    if (kind == "mock") {
      c.backend.kind = BackendKind::Mock;
    } else if (kind == "http") {
      c.backend.kind = BackendKind::Http;
    } else {
      throw ConfigError("backend.kind must be 'mock' or 'http', not '" + kind + "'");
    }
    if (b.contains("endpoint")) c.backend.endpoint = get<std::string>(b, "backend", "endpoint");
    if (b.contains("model_id")) c.backend.model_id = get<std::string>(b, "backend", "model_id");
    if (b.contains("temperature")) c.backend.temperature = get<double>(b, "backend", "temperature");
    if (b.contains("max_tokens")) c.backend.max_tokens = get<int>(b, "backend", "max_tokens");
    if (b.contains("timeout_seconds")) c.backend.timeout = std::chrono::seconds(get<int>(b, "backend", "timeout_seconds"));
    if (b.contains("retry")) c.backend.retry = retry_from_json(b.at("retry"));
    if (b.contains("oracle")) {
      try {
        c.backend.oracle = oracle_from_json(b.at("oracle"));
        c.backend.oracle_seed_explicit = b.at("oracle").contains("seed");
      } catch (const json::exception& e) {
        throw ConfigError(std::string("backend.oracle: ") + e.what());
      }
    }
  }

  if (!j.contains("run")) throw ConfigError("config: missing 'run' section");
  const auto& r = j.at("run");
  only_keys(r, "run", {"raters_per_claim", "agent_load", "evidence_mode", "seed", "parallelism", "log"});
  if (!r.contains("seed")) throw ConfigError("run.seed is required");
  c.run.seed = get<std::uint64_t>(r, "run", "seed");
  if (r.contains("raters_per_claim")) c.run.raters_per_claim = get<int>(r, "run", "raters_per_claim");
  if (r.contains("agent_load")) {
    const auto& load = r.at("agent_load");
    if (load.is_string() && load.get<std::string>() == "balanced") {
      c.run.agent_load.reset();
    } else if (load.is_number_integer()) {
      c.run.agent_load = load.get<int>();
    } else {
      throw ConfigError("run.agent_load must be an integer or \"balanced\"");
    }
  }
  if (r.contains("evidence_mode")) {
    const auto mode = evidence_mode_from_name(get<std::string>(r, "run", "evidence_mode"));
    if (!mode) throw ConfigError("run.evidence_mode must be 'selected' or 'none'");
    c.run.evidence_mode = *mode;
  }
  if (r.contains("parallelism")) c.run.parallelism = get<int>(r, "run", "parallelism");
  if (r.contains("log")) c.run.log_name = get<std::string>(r, "run", "log");

  if (j.contains("report")) {
    const auto& rep = j.at("report");
    only_keys(rep, "report", {"scales", "groupings", "formats", "difference", "averaging", "pairwise", "correlation",
                              "crowd_label"});
    if (rep.contains("scales")) {
      c.report.scales.clear();
      for (const auto& s : get<std::vector<std::string>>(rep, "report", "scales")) c.report.scales.push_back(parse_scale(s));
      if (c.report.scales.empty()) throw ConfigError("report.scales must not be empty");
    }
    if (rep.contains("groupings")) {
      c.report.groupings = get<std::vector<std::string>>(rep, "report", "groupings");
      for (const auto& g : c.report.groupings) {
        try {
          group_key_from_string(g);
        } catch (const UnknownKeyError& e) {
          throw ConfigError(std::string("report.groupings: ") + e.what());
        }
      }
    }
    if (rep.contains("formats")) {
      c.report.csv = c.report.markdown = false;
      for (const auto& f : get<std::vector<std::string>>(rep, "report", "formats")) {
        if (f == "csv") {
          c.report.csv = true;
        } else if (f == "markdown") {
          c.report.markdown = true;
        } else {
          throw ConfigError("report.formats: unknown format '" + f + "'");
        }
      }
    }
    if (rep.contains("difference")) {
      const auto d = difference_from_name(get<std::string>(rep, "report", "difference"));
      if (!d) throw ConfigError("report.difference must be nominal, ordinal or interval");
      c.report.eval.difference = *d;
    }
    if (rep.contains("averaging")) {
      const auto a = averaging_from_name(get<std::string>(rep, "report", "averaging"));
      if (!a || *a == Averaging::Binary) throw ConfigError("report.averaging must be weighted or macro");
      c.report.eval.averaging = *a;
    }
    if (rep.contains("pairwise")) {
      const auto p = get<std::string>(rep, "report", "pairwise");
      if (p == "aggregated") {
        c.report.eval.pairwise = PairwiseMode::Aggregated;
      } else if (p == "per-rater") {
        c.report.eval.pairwise = PairwiseMode::PerRater;
      } else {
        throw ConfigError("report.pairwise must be 'aggregated' or 'per-rater'");
      }
    }
    if (rep.contains("correlation")) {
      const auto m = get<std::string>(rep, "report", "correlation");
      if (m == "response") {
        c.report.correlation = CorrelationMode::Response;
      } else if (m == "claim-mean") {
        c.report.correlation = CorrelationMode::ClaimMean;
      } else {
        throw ConfigError("report.correlation must be 'response' or 'claim-mean'");
      }
    }
    if (rep.contains("crowd_label")) c.report.crowd_label = get<std::string>(rep, "report", "crowd_label");
  }

  c.output_dir = resolve(base_dir, j.value("output_dir", std::string("out")));
  if (c.backend.kind == BackendKind::Http && c.backend.endpoint.empty()) {
    throw ConfigError("backend.endpoint is required for the http backend");
  }
  if (c.run.parallelism < 1) throw ConfigError("run.parallelism must be at least 1");
  if (c.run.raters_per_claim < 1) throw ConfigError("run.raters_per_claim must be at least 1");
  return c;
}

AppConfig load_app_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  const auto doc = json::parse(read_text_file(path), nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
  return app_config_from_json(doc, path.parent_path());
}

json app_config_to_json(const AppConfig& c) {
  json filter = json::object();
  if (!c.corpus_filter.topics.empty()) filter["topics"] = c.corpus_filter.topics;
  if (c.corpus_filter.date_from) filter["date_from"] = format_iso_date(*c.corpus_filter.date_from);
  if (c.corpus_filter.date_to) filter["date_to"] = format_iso_date(*c.corpus_filter.date_to);
  json crowd = c.crowd_spec ? json{{"spec", c.crowd_spec->string()}} : json{{"profiles", c.crowd_profiles->string()}};
  json backend = {{"kind", c.backend.kind == BackendKind::Mock ? "mock" : "http"},
                  {"model_id", c.backend.model_id},
                  {"temperature", c.backend.temperature},
                  {"max_tokens", c.backend.max_tokens},
                  {"timeout_seconds", c.backend.timeout.count()},
                  {"retry", retry_to_json(c.backend.retry)},
                  {"oracle", oracle_to_json(c.backend.oracle)}};
  if (!c.backend.oracle_seed_explicit) backend["oracle"].erase("seed");
  if (!c.backend.endpoint.empty()) backend["endpoint"] = c.backend.endpoint;
  json scales = json::array();
  for (auto s : c.report.scales) scales.push_back(scale_name(s));
  json formats = json::array();
  if (c.report.csv) formats.push_back("csv");
  if (c.report.markdown) formats.push_back("markdown");
  json report = {{"scales", scales},
                 {"groupings", c.report.groupings},
                 {"formats", formats},
                 {"difference", difference_name(c.report.eval.difference)},
                 {"averaging", averaging_name(c.report.eval.averaging)},
                 {"pairwise", c.report.eval.pairwise == PairwiseMode::Aggregated ? "aggregated" : "per-rater"},
                 {"correlation", c.report.correlation == CorrelationMode::Response ? "response" : "claim-mean"}};
  if (!c.report.crowd_label.empty()) report["crowd_label"] = c.report.crowd_label;
  return {{"corpus", c.corpus.string()},
          {"corpus_filter", filter},
          {"crowd", crowd},
          {"backend", backend},
          {"run",
           {{"raters_per_claim", c.run.raters_per_claim},
            {"agent_load", c.run.agent_load ? json(*c.run.agent_load) : json("balanced")},
            {"evidence_mode", evidence_mode_name(c.run.evidence_mode)},
            {"seed", c.run.seed},
            {"parallelism", c.run.parallelism},
            {"log", c.run.log_name}}},
          {"report", report},
          {"output_dir", c.output_dir.string()}};
}

void apply_overrides(AppConfig& c, const Overrides& o) {
  if (o.seed) c.run.seed = *o.seed;
  if (o.backend) {
    if (*o.backend == "mock") {
      c.backend.kind = BackendKind::Mock;
    } else if (*o.backend == "http") {
      c.backend.kind = BackendKind::Http;
      if (c.backend.endpoint.empty()) throw ConfigError("--backend http needs backend.endpoint in the config");
    } else {
      throw ConfigError("--backend must be 'mock' or 'http'");
    }
  }
  if (o.evidence_mode) {
    const auto mode = evidence_mode_from_name(*o.evidence_mode);
    if (!mode) throw ConfigError("--evidence-mode must be 'selected' or 'none'");
    c.run.evidence_mode = *mode;
  }
  if (o.raters) {
    if (*o.raters < 1) throw ConfigError("--raters must be at least 1");
    c.run.raters_per_claim = *o.raters;
    // A fixed agent load is tied to the rater count; fall back to balanced.
    c.run.agent_load.reset();
  }
  if (o.corpus) c.corpus = *o.corpus;
  if (o.output_dir) c.output_dir = *o.output_dir;
}

std::shared_ptr<Backend> make_backend(const AppConfig& config, std::shared_ptr<const Corpus> corpus) {
  if (config.backend.kind == BackendKind::Mock) {
    OracleConfig oracle = config.backend.oracle;
    if (!config.backend.oracle_seed_explicit) oracle.seed = config.run.seed;
    return std::make_shared<MockBackend>(std::move(corpus), oracle, config.backend.model_id);
  }
  HttpBackendConfig http;
  http.endpoint = config.backend.endpoint;
  if (const char* key = std::getenv("LLM_API_KEY")) http.api_key = key;
  http.timeout = config.backend.timeout;
  http.max_in_flight = config.run.parallelism;
  return std::make_shared<HttpBackend>(http);
}

}  // namespace agentcrowd
