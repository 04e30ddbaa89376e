#include <doctest.h>

#include <fstream>
#include <map>
#include <memory>
#include <set>

#include "agentcrowd/backend.hpp"
#include "agentcrowd/crowd.hpp"
#include "agentcrowd/error.hpp"
#include "agentcrowd/metrics.hpp"
#include "agentcrowd/runner.hpp"
#include "agentcrowd/util.hpp"
#include "doubles.hpp"

using namespace agentcrowd;
using testing::ScriptedBackend;

namespace {

std::shared_ptr<const Corpus> shared_corpus(std::size_t claims = 70) {
  auto c = synthetic_corpus();
  c.claims.resize(std::min(claims, c.claims.size()));
  return std::make_shared<const Corpus>(std::move(c));
}

std::vector<AgentProfile> table2_crowd(std::uint64_t seed = 1) {
  return build_crowd(load_demographic_spec(testing::source_dir() / "data/crowd_table2.json"), seed);
}

std::vector<AgentProfile> small_crowd(int n) {
  std::vector<AgentProfile> out(n);
  for (int i = 0; i < n; ++i) out[i].agent_id = "agent_" + std::to_string(i);
  return out;
}

RunConfig mock_config(std::shared_ptr<const Corpus> corpus, std::vector<AgentProfile> crowd,
                      const std::filesystem::path& out, double noise = 0.0, std::uint64_t seed = 7) {
  RunConfig rc;
  rc.corpus = corpus;
  rc.crowd = std::move(crowd);
  OracleConfig oracle;
  oracle.seed = seed;
  oracle.truthfulness_noise = noise;
  rc.backend = std::make_shared<MockBackend>(corpus, oracle);
  rc.backend_params["oracle"] = oracle_to_json(oracle);
  rc.seed = seed;
  rc.output = out;
  rc.sleep = testing::no_sleep;
  return rc;
}

std::string prompt_text(const RunRecord& r) {
  std::string out;
  for (const auto& ex : r.exchanges) {
    for (const auto& m : ex.request.at("messages")) out += m.at("content").get<std::string>() + "\n";
  }
  return out;
}

}  // namespace

TEST_SUITE("runner") {
  TEST_CASE("50 x 70 x 10 run produces 700 + 700 records") {
    testing::TempDir dir;
    auto rc = mock_config(shared_corpus(), table2_crowd(), dir / "run.jsonl");
    rc.per_agent_load = 14;
    auto result = run_simulation(rc);
    CHECK(result.summary.assigned_pairs == 700);
    CHECK(result.log.count(Phase::Evidence) == 700);
    CHECK(result.log.count(Phase::Questionnaire) == 700);
    CHECK(result.summary.complete);
    CHECK(result.summary.failure_count() == 0);
    CHECK(result.summary.requests_issued == 1400);

    const auto back = read_run_log(dir / "run.jsonl");
    CHECK(back.records.size() == 1400);
    for (std::size_t i = 0; i < back.records.size(); ++i) CHECK(back.records[i].seq == i);
    CHECK(back.header.at("format") == kRunLogFormat);
    CHECK(back.header.at("corpus_digest") == corpus_digest(*rc.corpus));

    auto set = annotations_from_run_log(back, *rc.corpus, "mock");
    CHECK(evaluate(set, *rc.corpus, Scale::Two).accuracy == 1.0);
    CHECK(evaluate(set, *rc.corpus, Scale::Six).accuracy == 1.0);
  }

  TEST_CASE("evidence_mode none skips phase one") {
    testing::TempDir dir;
    auto rc = mock_config(shared_corpus(), table2_crowd(), dir / "run.jsonl");
    rc.evidence_mode = EvidenceMode::None;
    auto result = run_simulation(rc);
    CHECK(result.log.count(Phase::Evidence) == 0);
    CHECK(result.log.count(Phase::Questionnaire) == 700);
    for (const auto& r : result.log.records) CHECK(prompt_text(r).find("Related Article") == std::string::npos);
  }

  TEST_CASE("one agent, one claim") {
    testing::TempDir dir;
    auto rc = mock_config(shared_corpus(1), small_crowd(1), dir / "run.jsonl");
    rc.per_claim_raters = 1;
    rc.evidence_mode = EvidenceMode::None;
    auto result = run_simulation(rc);
    REQUIRE(result.log.records.size() == 1);
    CHECK(result.log.records[0].phase == Phase::Questionnaire);
  }

  TEST_CASE("questionnaire embeds the summary of the chosen page") {
    testing::TempDir dir;
    auto corpus = shared_corpus(3);
    auto rc = mock_config(corpus, small_crowd(3), dir / "run.jsonl");
    rc.per_claim_raters = 3;
    auto result = run_simulation(rc);
    for (const auto& r : result.log.records) {
      if (r.phase != Phase::Questionnaire) continue;
      const auto* claim = corpus->find(r.claim_id);
      CHECK(prompt_text(r).find(*claim->evidence[0].summary) != std::string::npos);
    }
  }

  TEST_CASE("byte-identical reruns regardless of parallelism") {
    testing::TempDir dir;
    auto corpus = shared_corpus(20);
    auto a = mock_config(corpus, small_crowd(10), dir / "a.jsonl", 0.3);
    a.per_claim_raters = 5;
    a.parallelism = 1;
    auto b = a;
    b.output = dir / "b.jsonl";
    b.parallelism = 8;
    run_simulation(a);
    run_simulation(b);
    CHECK(testing::slurp(dir / "a.jsonl") == testing::slurp(dir / "b.jsonl"));
  }

  TEST_CASE("resume after interruption reproduces the full log") {
    testing::TempDir dir;
    auto corpus = shared_corpus(20);
    auto full = mock_config(corpus, small_crowd(10), dir / "full.jsonl", 0.3);
    full.per_claim_raters = 5;
    run_simulation(full);

    for (const std::string name : {"part.jsonl", "part.jsonl.gz"}) {
      auto part = full;
      part.output = dir / name;
      part.max_records = 37;
      auto first = run_simulation(part);
      CHECK(first.log.records.size() == 37);
      CHECK_FALSE(first.summary.complete);

      part.max_records.reset();
      auto second = resume(dir / name, part);
      CHECK(second.summary.complete);
      CHECK(second.summary.requests_issued == 200 - 37);
      CHECK(testing::slurp(dir / name) == testing::slurp(dir / "full.jsonl"));
    }
  }

  TEST_CASE("resume drops a torn trailing line") {
    testing::TempDir dir;
    auto corpus = shared_corpus(10);
    auto full = mock_config(corpus, small_crowd(5), dir / "full.jsonl");
    full.per_claim_raters = 3;
    run_simulation(full);

    auto part = full;
    part.output = dir / "part.jsonl";
    part.max_records = 11;
    run_simulation(part);
    {
      std::ofstream out(dir / "part.jsonl", std::ios::app | std::ios::binary);
      out << "{\"type\":\"record\",\"seq\":11,\"agent";
    }
    CHECK(read_run_log(dir / "part.jsonl").records.size() == 11);
    part.max_records.reset();
    resume(dir / "part.jsonl", part);
    CHECK(testing::slurp(dir / "part.jsonl") == testing::slurp(dir / "full.jsonl"));
  }

  TEST_CASE("resuming a complete log issues no requests") {
    testing::TempDir dir;
    auto corpus = shared_corpus(10);
    auto rc = mock_config(corpus, small_crowd(5), dir / "run.jsonl");
    rc.per_claim_raters = 3;
    run_simulation(rc);
    const auto before = testing::slurp(dir / "run.jsonl");
    auto counting = std::make_shared<testing::CountingBackend>(rc.backend);
    rc.backend = counting;
    auto again = resume(dir / "run.jsonl", rc);
    CHECK(counting->calls() == 0);
    CHECK(again.summary.requests_issued == 0);
    CHECK(testing::slurp(dir / "run.jsonl") == before);
  }

  TEST_CASE("resume refuses a different corpus or seed") {
    testing::TempDir dir;
    auto corpus = shared_corpus(10);
    auto rc = mock_config(corpus, small_crowd(5), dir / "run.jsonl");
    rc.per_claim_raters = 3;
    rc.max_records = 5;
    run_simulation(rc);
    rc.max_records.reset();

    auto altered = *corpus;
    altered.claims[0].text += " (edited)";
    auto other = rc;
    other.corpus = std::make_shared<const Corpus>(altered);
    CHECK_THROWS_AS(resume(dir / "run.jsonl", other), DigestMismatchError);

    auto reseeded = rc;
    reseeded.seed = 8;
    CHECK_THROWS_AS(resume(dir / "run.jsonl", reseeded), DigestMismatchError);
  }

  TEST_CASE("corrupt interior line") {
    testing::TempDir dir;
    auto rc = mock_config(shared_corpus(5), small_crowd(3), dir / "run.jsonl");
    rc.per_claim_raters = 2;
    run_simulation(rc);
    auto text = testing::slurp(dir / "run.jsonl");
    text.replace(text.find("\n{") + 1, 1, "#");
    write_text_file(dir / "bad.jsonl", text);
    CHECK_THROWS_AS(read_run_log(dir / "bad.jsonl"), CorruptLogError);
  }

  TEST_CASE("agents never see other agents' replies") {
    testing::TempDir dir;
    auto corpus = shared_corpus(8);
    auto rc = mock_config(corpus, small_crowd(12), dir / "run.jsonl", 0.5);
    rc.per_claim_raters = 3;
    auto log = run_simulation(rc).log;
    // Questionnaire replies carry the request tag, so each one is unique.
    std::set<std::string> digests;
    for (const auto& r : log.records) {
      if (r.phase == Phase::Questionnaire) digests.insert(sha256_hex(r.reply));
    }
    CHECK(digests.size() == log.count(Phase::Questionnaire));
    for (std::size_t i = 0; i < log.records.size(); ++i) {
      const auto prompt = prompt_text(log.records[i]);
      for (std::size_t j = 0; j < log.records.size(); ++j) {
        if (i == j) continue;
        CHECK_MESSAGE(prompt.find(log.records[j].reply) == std::string::npos, "record ", i, " saw reply ", j);
      }
      // Digest of the prompt matches what was sent.
      const auto& m = log.records[i].exchanges.front().request.at("messages");
      const std::string sys = m.size() == 2 ? m[0].at("content").get<std::string>() : "";
      const std::string user = m.back().at("content").get<std::string>();
      CHECK(log.records[i].prompt_digest == sha256_hex(sys + "\n\x1e\n" + user));
    }
  }

  TEST_CASE("attempts are bounded and failures are recorded") {
    testing::TempDir dir;
    auto corpus = shared_corpus(2);
    auto rc = mock_config(corpus, small_crowd(2), dir / "run.jsonl");
    rc.per_claim_raters = 2;
    rc.retry.max_attempts = 3;
    auto scripted = std::make_shared<ScriptedBackend>(std::vector<ScriptedBackend::Step>{}, "no idea, sorry");
    rc.backend = scripted;
    auto result = run_simulation(rc);
    CHECK(result.log.records.size() == 8);
    CHECK(scripted->requests().size() == 8 * 3);
    for (const auto& r : result.log.records) {
      CHECK(r.attempts <= 3);
      CHECK(r.exchanges.size() == static_cast<std::size_t>(r.attempts));
      if (r.phase == Phase::Evidence) {
        CHECK(r.fallback);
        REQUIRE(r.evidence.has_value());
        CHECK(r.evidence->index == 0);
      } else {
        REQUIRE(r.failure.has_value());
        CHECK(r.failure->kind == "parse");
        CHECK_FALSE(r.questionnaire.has_value());
      }
    }
    CHECK(result.summary.fallbacks == 4);
    CHECK(result.summary.backend_failure_count() == 0);
    // second attempt of each step carries a corrective instruction
    const auto reqs = scripted->requests();
    CHECK(reqs[1].user.text.size() > reqs[0].user.text.size());

    auto set = annotations_from_run_log(result.log, *corpus, "x");
    CHECK(set.entries.empty());
    CHECK(set.missing == 4);
  }

  TEST_CASE("transport failures are backend failures") {
    testing::TempDir dir;
    auto corpus = shared_corpus(1);
    auto rc = mock_config(corpus, small_crowd(1), dir / "run.jsonl");
    rc.per_claim_raters = 1;
    rc.evidence_mode = EvidenceMode::None;
    rc.retry.max_attempts = 2;
    rc.backend = std::make_shared<ScriptedBackend>(
        std::vector<ScriptedBackend::Step>{ScriptedBackend::transport(), ScriptedBackend::status(503)});
    auto result = run_simulation(rc);
    REQUIRE(result.log.records.size() == 1);
    CHECK(result.log.records[0].failure->kind == "http_status");
    CHECK(result.log.records[0].exchanges.size() == 2);
    CHECK(result.summary.backend_failure_count() == 1);
  }

  TEST_CASE("infeasible designs are rejected before any request") {
    testing::TempDir dir;
    auto rc = mock_config(shared_corpus(), table2_crowd(), dir / "run.jsonl");
    auto counting = std::make_shared<testing::CountingBackend>(rc.backend);
    rc.backend = counting;
    rc.per_agent_load = 13;
    CHECK_THROWS_AS(run_simulation(rc), InfeasibleDesignError);
    rc.per_agent_load = 14;
    rc.per_claim_raters = 3;
    CHECK_THROWS_AS(run_simulation(rc), InfeasibleDesignError);
    CHECK(counting->calls() == 0);
    CHECK_FALSE(std::filesystem::exists(dir / "run.jsonl"));
  }

  TEST_CASE("selected evidence needs summaries") {
    testing::TempDir dir;
    SyntheticCorpusOptions raw;
    raw.with_summaries = false;
    auto corpus = std::make_shared<const Corpus>(synthetic_corpus(raw));
    auto rc = mock_config(corpus, table2_crowd(), dir / "run.jsonl");
    CHECK_THROWS_AS(run_simulation(rc), ConfigError);
    rc.evidence_mode = EvidenceMode::None;
    CHECK_NOTHROW(run_simulation(rc));
  }

  TEST_CASE("record json round trip") {
    testing::TempDir dir;
    auto rc = mock_config(shared_corpus(2), small_crowd(2), dir / "run.jsonl", 0.5);
    rc.per_claim_raters = 2;
    for (const auto& r : run_simulation(rc).log.records) {
      CHECK(record_to_json(record_from_json(record_to_json(r))) == record_to_json(r));
    }
  }
}

TEST_SUITE("summarize") {
  TEST_CASE("already summarized corpus is untouched") {
    const auto corpus = synthetic_corpus();
    testing::CountingBackend backend(std::make_shared<MockBackend>(std::make_shared<const Corpus>(corpus),
                                                                    OracleConfig{}));
    auto r = summarize_corpus(corpus, backend, {});
    CHECK(r.requests_issued == 0);
    CHECK(backend.calls() == 0);
    CHECK(r.corpus == corpus);
  }

  TEST_CASE("one missing summary costs one request") {
    auto corpus = synthetic_corpus();
    corpus.claims[4].evidence[6].summary.reset();
    auto shared = std::make_shared<const Corpus>(corpus);
    testing::CountingBackend backend(std::make_shared<MockBackend>(shared, OracleConfig{}));
    auto r = summarize_corpus(corpus, backend, {});
    CHECK(r.requests_issued == 1);
    CHECK(backend.calls() == 1);
    REQUIRE(r.corpus.claims[4].evidence[6].summary.has_value());
    auto again = summarize_corpus(corpus, backend, {});
    CHECK(again.corpus == r.corpus);
  }

  TEST_CASE("pages without text are skipped with a warning") {
    auto corpus = synthetic_corpus();
    corpus.claims[0].evidence[0].summary.reset();
    corpus.claims[0].evidence[0].page_text.reset();
    testing::CountingBackend backend(std::make_shared<MockBackend>(std::make_shared<const Corpus>(corpus),
                                                                    OracleConfig{}));
    auto r = summarize_corpus(corpus, backend, {});
    CHECK(backend.calls() == 0);
    CHECK_FALSE(r.warnings.empty());
  }

  TEST_CASE("backend failures are collected per page") {
    auto corpus = synthetic_corpus();
    corpus.claims[0].evidence[1].summary.reset();
    ScriptedBackend backend({ScriptedBackend::transport(), ScriptedBackend::transport()});
    SummarizeOptions opt;
    opt.retry.max_attempts = 2;
    opt.sleep = testing::no_sleep;
    auto r = summarize_corpus(corpus, backend, opt);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].page == 1);
    CHECK(r.failures[0].failure.attempts == 2);
  }
}
