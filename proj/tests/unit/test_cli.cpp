#include <doctest.h>

#include <sstream>

#include "agentcrowd/cli.hpp"
#include "agentcrowd/error.hpp"
#include "agentcrowd/util.hpp"
#include "doubles.hpp"

using namespace agentcrowd;
using nlohmann::json;

namespace {

json base_config(const std::filesystem::path& out) {
  const auto data = testing::source_dir() / "data";
  return json{{"corpus", (data / "synthetic_2022.json").string()},
              {"crowd", {{"spec", (data / "crowd_table2.json").string()}}},
              {"backend", {{"kind", "mock"}, {"oracle", {{"truthfulness_noise", 0.3}}}}},
              {"run", {{"raters_per_claim", 10}, {"agent_load", 14}, {"seed", 7}, {"parallelism", 3}}},
              {"report", {{"groupings", {"topic", "gender"}}}},
              {"output_dir", out.string()}};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "agentcrowd");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config parsing") {
    testing::TempDir tmp;
    auto c = app_config_from_json(base_config(tmp.path()));
    CHECK(c.run.seed == 7);
    CHECK(c.run.agent_load == 14);
    CHECK(c.backend.kind == BackendKind::Mock);
    CHECK(c.backend.oracle.truthfulness_noise == doctest::Approx(0.3));
    CHECK(c.report.groupings.size() == 2);
    CHECK(c.log_path() == tmp.path() / "run.jsonl");

    auto relative = base_config(tmp.path());
    relative["corpus"] = "c.json";
    CHECK(app_config_from_json(relative, "/base").corpus == std::filesystem::path("/base/c.json"));

    auto unknown = base_config(tmp.path());
    unknown["run"]["sede"] = 1;
    CHECK_THROWS_AS(app_config_from_json(unknown), ConfigError);
    auto no_seed = base_config(tmp.path());
    no_seed["run"].erase("seed");
    CHECK_THROWS_AS(app_config_from_json(no_seed), ConfigError);
    auto bad_kind = base_config(tmp.path());
    bad_kind["backend"]["kind"] = "carrier-pigeon";
    CHECK_THROWS_AS(app_config_from_json(bad_kind), ConfigError);
  }

  TEST_CASE("shipped configs load") {
    for (const char* name : {"mock_table2.json", "http_example.json"}) {
      CHECK_NOTHROW(load_app_config(testing::source_dir() / "configs" / name));
    }
  }

  TEST_CASE("overrides") {
    testing::TempDir tmp;
    auto c = app_config_from_json(base_config(tmp.path()));
    Overrides o;
    o.seed = 99;
    o.evidence_mode = "none";
    o.raters = 5;
    o.output_dir = tmp.path() / "other";
    apply_overrides(c, o);
    CHECK(c.run.seed == 99);
    CHECK(c.run.evidence_mode == EvidenceMode::None);
    CHECK(c.run.raters_per_claim == 5);
    CHECK_FALSE(c.run.agent_load.has_value());
    CHECK(c.output_dir == tmp.path() / "other");
    Overrides bad;
    bad.backend = "nope";
    CHECK_THROWS_AS(apply_overrides(c, bad), ConfigError);
  }

  TEST_CASE("http backend builds with or without a key") {
    testing::TempDir tmp;
    auto j = base_config(tmp.path());
    j["backend"] = {{"kind", "http"}, {"endpoint", "http://127.0.0.1:9"}, {"model_id", "m"}};
    auto c = app_config_from_json(j);
    ::unsetenv("LLM_API_KEY");
    CHECK(make_backend(c, nullptr) != nullptr);
    ::setenv("LLM_API_KEY", "k", 1);
    CHECK(make_backend(c, nullptr) != nullptr);
    ::unsetenv("LLM_API_KEY");
  }

  TEST_CASE("exit codes") {
    CHECK(exit_code_for(SchemaError("x")) == 1);
    CHECK(exit_code_for(ConfigError("x")) == 1);
    CHECK(exit_code_for(AuthError("x")) == 2);
    CHECK(exit_code_for(TimeoutError("x")) == 2);
    CHECK(exit_code_for(std::logic_error("x")) == 3);
    CHECK(error_report(DuplicateIdError("dup")).at("error").at("kind") == "DuplicateIdError");
  }

  TEST_CASE("simulate, evaluate and report") {
    testing::TempDir tmp;
    const auto config = app_config_from_json(base_config(tmp.path() / "a"));
    std::ostringstream log;
    auto result = cmd_simulate(config, {}, log);
    CHECK(result.summary.records == 1400);
    CHECK(result.summary.complete);
    CHECK(result.summary.failure_count() == 0);

    const auto again = app_config_from_json(base_config(tmp.path() / "b"));
    cmd_simulate(again, {}, log);
    CHECK(testing::slurp(config.log_path()) == testing::slurp(again.log_path()));

    auto bundle = cmd_evaluate(config, {}, log);
    CHECK_FALSE(bundle.reports.empty());
    for (const char* f : {"bundle.json", "reports.csv", "report.md"}) {
      CHECK(std::filesystem::exists(config.report_dir() / f));
    }

    const std::vector<std::filesystem::path> bundles{config.report_dir() / "bundle.json"};
    auto merged = cmd_report(bundles, tmp.path() / "merged", log);
    CHECK(merged.reports.size() == bundle.reports.size());
    CHECK_THROWS_AS(cmd_report({}, tmp.path() / "merged", log), MissingInputError);
    const std::vector<std::filesystem::path> missing{tmp.path() / "nope.json"};
    CHECK_THROWS_AS(cmd_report(missing, tmp.path() / "merged", log), MissingInputError);
  }

  TEST_CASE("prepare is idempotent") {
    testing::TempDir tmp;
    auto j = base_config(tmp.path());
    j["corpus"] = (testing::source_dir() / "data" / "synthetic_2022_raw.json").string();
    const auto config = app_config_from_json(j);
    std::ostringstream log;
    auto first = cmd_prepare(config, log);
    CHECK(first.summary.requests_issued > 0);
    CHECK(first.summary.failures.empty());
    const auto text = testing::slurp(first.output);
    auto second = cmd_prepare(config, log);
    CHECK(second.summary.requests_issued == 0);
    CHECK(testing::slurp(second.output) == text);
    for (const auto& c : load_run_corpus(config).claims) {
      for (const auto& e : c.evidence) CHECK((e.summary && !e.summary->empty()));
    }
  }

  TEST_CASE("run_cli exit codes") {
    testing::TempDir tmp;
    const auto cfg = tmp.path() / "c.json";
    write_text_file(cfg, base_config(tmp.path() / "out").dump());
    CHECK(cli({"simulate", "-c", cfg.string(), "--raters", "1", "--max-records", "5"}) == 0);
    CHECK(cli({"simulate", "-c", (tmp.path() / "absent.json").string()}) == 1);
    CHECK(cli({"simulate"}) == 1);
    CHECK(cli({"report"}) == 1);

    auto bad = base_config(tmp.path() / "out2");
    const auto corpus = tmp.path() / "bad_corpus.json";
    write_text_file(corpus, R"({"metadata": {}, "claims": [{"id": 3}]})");
    bad["corpus"] = corpus.string();
    write_text_file(cfg, bad.dump());
    CHECK(cli({"simulate", "-c", cfg.string()}) == 1);
  }
}
