#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <memory>
#include <thread>

#include "agentcrowd/backend.hpp"
#include "agentcrowd/corpus.hpp"
#include "agentcrowd/crowd.hpp"
#include "agentcrowd/error.hpp"
#include "agentcrowd/prompts.hpp"
#include "doubles.hpp"

using namespace agentcrowd;
using nlohmann::json;

namespace {

AgentProfile full_profile() {
  AgentProfile p;
  p.agent_id = "agent_01";
  p.age_band = "36-50";
  p.gender = "Female";
  p.ethnicity = "White";
  p.birth_country = "Canada";
  p.residence_country = "United States";
  p.political_party = "Independent";
  p.political_views = "Moderate";
  p.education_level = "Bachelor's Degree";
  p.income_range = "$50,000 - $74,999";
  p.climate_change_stance = "Agree";
  p.border_wall_stance = "Disagree";
  p.languages = {"English"};
  p.student_status = "No";
  p.employment_status = "Full-Time";
  return p;
}

const Claim& first_claim() {
  static const Corpus c = synthetic_corpus();
  return c.claims.front();
}

json valid_reply(int truth = 5) {
  QuestionnaireResponse r;
  for (auto d : kAllDimensions) {
    r[d].value = 1;
    r[d].meaning = "partially agree";
    r[d].reason = "because";
  }
  r.truthfulness = static_cast<TruthLevel>(truth);
  r.truthfulness_meaning = std::string(truth_level_name(r.truthfulness));
  r.truthfulness_reason = "checked";
  return questionnaire_to_json(r);
}

ChatRequest request_for(const std::string& agent, const std::string& claim, Phase phase, int page = -1) {
  ChatRequest r;
  r.user = {Role::User, "x"};
  r.model_id = "m";
  r.tag = {agent, claim, phase, page};
  return r;
}

}  // namespace

TEST_SUITE("prompts") {
  TEST_CASE("system prompt") {
    const auto p = render_system_prompt(full_profile());
    CHECK(p.role == Role::System);
    CHECK(p.text.find("critically evaluate information") != std::string::npos);
    CHECK(p.text.find("fluent in English") != std::string::npos);
    CHECK(p.text.find("Independent") != std::string::npos);
    CHECK(render_system_prompt(full_profile()) == p);
    CHECK_FALSE(has_placeholder_leak(p.text));
  }

  TEST_CASE("unspecified traits render without placeholders") {
    AgentProfile p;
    p.agent_id = "a";
    const auto text = render_system_prompt(p).text;
    CHECK_FALSE(has_placeholder_leak(text));
    CHECK(text.find(std::string(kUnspecified)) == std::string::npos);
  }

  TEST_CASE("blank profile field") {
    auto p = full_profile();
    p.gender = "  ";
    CHECK_THROWS_AS(render_system_prompt(p), MissingFieldError);
  }

  TEST_CASE("evidence prompt enumerates candidates") {
    const auto& claim = first_claim();
    const auto p = render_evidence_prompt(claim, claim.evidence);
    for (std::size_t i = 0; i < claim.evidence.size(); ++i) {
      CHECK(p.text.find(claim.evidence[i].url) != std::string::npos);
      CHECK(p.text.find(std::to_string(i + 1) + ".") != std::string::npos);
    }
    const std::vector<EvidencePage> one(claim.evidence.begin(), claim.evidence.begin() + 1);
    const auto single = render_evidence_prompt(claim, one);
    CHECK(single.text.find(claim.evidence[1].url) == std::string::npos);
    CHECK_FALSE(has_placeholder_leak(single.text));

    CHECK_THROWS_AS(render_evidence_prompt(claim, std::vector<EvidencePage>{}), NoEvidenceError);
    auto blank = one;
    blank[0].url = "";
    CHECK_THROWS_AS(render_evidence_prompt(claim, blank), NoEvidenceError);
  }

  TEST_CASE("questionnaire prompt with and without article") {
    const auto& claim = first_claim();
    const auto with = render_questionnaire_prompt(claim, std::string("SUMMARY-TEXT"));
    const auto without = render_questionnaire_prompt(claim, std::nullopt);
    CHECK(with.text.find("SUMMARY-TEXT") != std::string::npos);
    CHECK(with.text.find("JSON") != std::string::npos);
    for (auto d : kAllDimensions) {
      CHECK(with.text.find(std::string(dimension_key(d)) + "_value") != std::string::npos);
      CHECK(without.text.find(std::string(dimension_key(d)) + "_value") != std::string::npos);
    }
    CHECK(with.text.find("truthfulness_value") != std::string::npos);
    CHECK(with.text.find("Article") != std::string::npos);
    CHECK(without.text.find("Related Article") == std::string::npos);
    CHECK(without.text.find(claim.text) != std::string::npos);
    CHECK(render_questionnaire_prompt(claim, std::nullopt) == without);
    CHECK_FALSE(has_placeholder_leak(with.text));
    CHECK_FALSE(has_placeholder_leak(without.text));
  }

  TEST_CASE("summary prompt") {
    const auto& claim = first_claim();
    const auto p = render_summary_prompt(claim, "Some page text.");
    CHECK(p.text.find("Reference Statement: " + claim.text) != std::string::npos);
    CHECK_THROWS_AS(render_summary_prompt(claim, " \n\t "), EmptyTextError);
    const std::string long_text(30000, 'x');
    const auto seg = render_summary_prompt(claim, long_text, 12000);
    CHECK(seg.text.find("[Segment 1 of 3]") != std::string::npos);
    CHECK(seg.text.find("[Segment 3 of 3]") != std::string::npos);
  }

  TEST_CASE("json extraction") {
    CHECK(extract_json_object("```json\n{\"a\": 1}\n```")->at("a") == 1);
    CHECK(extract_json_object("noise {bad} then {\"b\": \"}\"}")->at("b") == "}");
    CHECK_FALSE(extract_json_object("no json here").has_value());
    CHECK_FALSE(extract_json_object("[1, 2]").has_value());
  }

  TEST_CASE("evidence choice") {
    const auto& claim = first_claim();
    const auto raw = json{{"url", claim.evidence[2].url}, {"title", "t"}, {"snippet", "s"}}.dump();
    const auto c = parse_evidence_choice(raw, claim.evidence);
    CHECK(c.index == 2);
    CHECK(c.url == claim.evidence[2].url);
    CHECK(c.title == claim.evidence[2].title);
    CHECK(parse_evidence_choice("```json\n" + raw + "\n```", claim.evidence) == c);
    CHECK_THROWS_AS(parse_evidence_choice(R"({"url": "https://made.up/page"})", claim.evidence), UnknownUrlError);
    CHECK_THROWS_AS(parse_evidence_choice(R"({"title": "x"})", claim.evidence), MissingFieldError);
    CHECK_THROWS_AS(parse_evidence_choice("I cannot decide.", claim.evidence), JsonError);
  }

  TEST_CASE("malformed-wrapper fixture") {
    const auto doc = json::parse(testing::slurp(testing::source_dir() / "tests/fixtures/evidence_replies.json"));
    std::vector<EvidencePage> candidates;
    for (const auto& c : doc.at("candidates")) {
      candidates.push_back({c.at("url"), c.at("title"), c.at("snippet"), std::nullopt, std::nullopt});
    }
    REQUIRE(doc.at("replies").size() == 20);
    int ok = 0, false_accept = 0;
    for (const auto& r : doc.at("replies")) {
      const auto raw = r.at("raw").get<std::string>();
      std::optional<std::string> got;
      try {
        got = parse_evidence_choice(raw, candidates).url;
      } catch (const ValidationError&) {
      }
      if (r.at("expected_url").is_null()) {
        if (got) ++false_accept;
        else ++ok;
      } else if (got && *got == r.at("expected_url").get<std::string>()) {
        ++ok;
      } else {
        MESSAGE("not parsed: " << r.at("name").get<std::string>());
      }
    }
    CHECK(ok >= 19);
    CHECK(false_accept == 0);
  }

  TEST_CASE("questionnaire parsing") {
    const auto r = parse_questionnaire("Here you go:\n" + valid_reply(5).dump() + "\nBye");
    CHECK(r.truthfulness == TruthLevel::True);
    CHECK(r.warnings.empty());

    auto bad = valid_reply();
    bad["accuracy_value"] = 3;
    CHECK_THROWS_AS(parse_questionnaire(bad.dump()), RangeError);
    auto bad_truth = valid_reply();
    bad_truth["truthfulness_value"] = 6;
    CHECK_THROWS_AS(parse_questionnaire(bad_truth.dump()), RangeError);
    auto missing = valid_reply();
    missing.erase("informativeness_reason");
    CHECK_THROWS_AS(parse_questionnaire(missing.dump()), MissingFieldError);
    CHECK_THROWS_AS(parse_questionnaire("nothing"), JsonError);
  }

  TEST_CASE("value wins over a disagreeing meaning") {
    // Two mismatches planted: accuracy and truthfulness.
    auto j = valid_reply(4);
    j["accuracy_value"] = 2;
    j["accuracy_meaning"] = "partially agree";
    j["truthfulness_meaning"] = "False";
    const auto r = parse_questionnaire(j.dump());
    CHECK(r[QualityDimension::Accuracy].value == 2);
    CHECK(r.truthfulness == TruthLevel::MostlyTrue);
    CHECK(r.warnings.size() == 2);
  }

  TEST_CASE("serialize then parse is the identity") {
    const auto j = valid_reply(2);
    const auto r = questionnaire_from_json(j);
    CHECK(parse_questionnaire(questionnaire_to_json(r).dump()) == r);
  }
}

TEST_SUITE("backend") {
  TEST_CASE("noiseless mock answers the ground truth") {
    auto corpus = std::make_shared<const Corpus>(synthetic_corpus());
    MockBackend mock(corpus, OracleConfig{});
    for (const auto& claim : corpus->claims) {
      auto reply = mock.complete(request_for("agent_01", claim.id, Phase::Questionnaire));
      CHECK(parse_questionnaire(reply.text).truthfulness == claim.ground_truth);
      CHECK(completion_content(reply.response_body) == reply.text);
    }
  }

  TEST_CASE("mock is deterministic in tag and config") {
    auto corpus = std::make_shared<const Corpus>(synthetic_corpus());
    OracleConfig cfg;
    cfg.truthfulness_noise = 0.5;
    cfg.wrap_rate = 0.5;
    cfg.evidence_rule = EvidenceRule::SeededUniform;
    MockBackend a(corpus, cfg), b(corpus, cfg);
    for (auto phase : {Phase::Evidence, Phase::Questionnaire}) {
      auto req = request_for("agent_07", "c010", phase);
      CHECK(a.complete(req).text == b.complete(req).text);
      CHECK(a.complete(req).text == a.complete(req).text);
    }
    cfg.seed = 1;
    MockBackend c(corpus, cfg);
    int differ = 0;
    for (int i = 0; i < 20; ++i) {
      auto req = request_for("agent_" + std::to_string(i), "c010", Phase::Questionnaire);
      differ += a.complete(req).text != c.complete(req).text;
    }
    CHECK(differ > 0);
  }

  TEST_CASE("mock noise follows the mixture") {
    auto corpus = std::make_shared<const Corpus>(synthetic_corpus());
    const Claim* top = nullptr;
    for (const auto& c : corpus->claims) {
      if (c.ground_truth == TruthLevel::True) top = &c;
    }
    REQUIRE(top != nullptr);
    OracleConfig cfg;
    cfg.truthfulness_noise = 0.5;
    MockBackend mock(corpus, cfg);
    int hits = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      auto reply = mock.complete(request_for("agent_" + std::to_string(i), top->id, Phase::Questionnaire));
      hits += parse_questionnaire(reply.text).truthfulness == TruthLevel::True;
    }
    CHECK(std::abs(static_cast<double>(hits) / n - (0.5 + 0.5 / 6.0)) <= 0.02);
  }

  TEST_CASE("mock summaries and evidence") {
    auto corpus = std::make_shared<const Corpus>(synthetic_corpus());
    MockBackend mock(corpus, OracleConfig{});
    const auto& claim = corpus->claims[3];
    auto ev = mock.complete(request_for("a", claim.id, Phase::Evidence));
    CHECK(parse_evidence_choice(ev.text, claim.evidence).index == 0);
    auto s1 = mock.complete(request_for("", claim.id, Phase::Summary, 2));
    auto s2 = mock.complete(request_for("", claim.id, Phase::Summary, 2));
    CHECK(s1.text == s2.text);
    CHECK(s1.text.find(claim.evidence[2].url) != std::string::npos);
    CHECK_THROWS_AS(mock.complete(request_for("a", "nope", Phase::Evidence)), ConfigError);
  }

  TEST_CASE("oracle config round trip and validation") {
    OracleConfig c;
    c.seed = 9;
    c.truthfulness_noise = 0.25;
    c.evidence_rule = EvidenceRule::SeededUniform;
    const auto back = oracle_from_json(oracle_to_json(c));
    CHECK(back.seed == 9);
    CHECK(back.truthfulness_noise == 0.25);
    CHECK(back.evidence_rule == EvidenceRule::SeededUniform);
    CHECK_THROWS_AS(oracle_from_json(json{{"truthfulness_noise", 1.5}}), ConfigError);
    CHECK_THROWS_AS(oracle_from_json(json{{"bogus", 1}}), ConfigError);
  }

  TEST_CASE("retry succeeds first time") {
    RetryPolicy policy;
    int calls = 0;
    auto r = with_retries<int>(policy, [&](int, const std::string*) { return ++calls; }, testing::no_sleep);
    CHECK(r.value == 1);
    CHECK(r.attempts == 1);
    CHECK_FALSE(r.failure.has_value());
  }

  TEST_CASE("retry exhaustion") {
    RetryPolicy policy;
    policy.max_attempts = 4;
    int calls = 0;
    std::vector<std::chrono::milliseconds> sleeps;
    auto r = with_retries<int>(
        policy,
        [&](int, const std::string*) -> int {
          ++calls;
          throw TransportError("down");
        },
        [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
    CHECK(calls == 4);
    REQUIRE(r.failure.has_value());
    CHECK(r.failure->kind == "transport");
    CHECK(r.failure->attempts == 4);
    CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500),
                                                             std::chrono::milliseconds(1000),
                                                             std::chrono::milliseconds(2000)});
  }

  TEST_CASE("auth failures are not retried") {
    RetryPolicy policy;
    int calls = 0;
    auto r = with_retries<int>(
        policy,
        [&](int, const std::string*) -> int {
          ++calls;
          throw AuthError("401");
        },
        testing::no_sleep);
    CHECK(calls == 1);
    CHECK(r.failure->kind == "auth");
  }

  TEST_CASE("retry_on switches") {
    RetryPolicy policy;
    policy.retry_on.http_429 = false;
    int calls = 0;
    auto r = with_retries<int>(
        policy,
        [&](int, const std::string*) -> int {
          ++calls;
          throw HttpStatusError(429, "slow down");
        },
        testing::no_sleep);
    CHECK(calls == 1);
    CHECK(r.failure->kind == "http_status");
  }

  TEST_CASE("parse failure then success carries a corrective instruction") {
    auto corpus = std::make_shared<const Corpus>(synthetic_corpus());
    testing::ScriptedBackend backend({testing::ScriptedBackend::reply("I think it is mostly true."),
                                      testing::ScriptedBackend::reply(valid_reply(4).dump())});
    const auto base = render_questionnaire_prompt(corpus->claims[0], std::nullopt);
    RetryPolicy policy;
    auto r = with_retries<QuestionnaireResponse>(
        policy,
        [&](int, const std::string* corrective) {
          ChatRequest req;
          req.user = base;
          if (corrective) req.user.text += "\n\n" + *corrective;
          req.tag = {"a", corpus->claims[0].id, Phase::Questionnaire, -1};
          return parse_questionnaire(backend.complete(req).text);
        },
        testing::no_sleep);
    CHECK(r.attempts == 2);
    REQUIRE(r.value.has_value());
    CHECK(r.value->truthfulness == TruthLevel::MostlyTrue);
    const auto reqs = backend.requests();
    REQUIRE(reqs.size() == 2);
    CHECK(reqs[0].user.text == base.text);
    CHECK(reqs[1].user.text.size() > base.text.size());
    CHECK(reqs[1].user.text.find("JSON") != std::string::npos);
  }

  TEST_CASE("backoff schedule") {
    RetryPolicy p;
    p.backoff_base = std::chrono::milliseconds(100);
    p.backoff_multiplier = 3.0;
    CHECK(p.backoff_before(2) == std::chrono::milliseconds(100));
    CHECK(p.backoff_before(3) == std::chrono::milliseconds(300));
    p.max_attempts = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
  }

  TEST_CASE("chat request body") {
    ChatRequest r;
    r.system = PromptText{Role::System, "sys"};
    r.user = {Role::User, "hello"};
    r.model_id = "gpt-x";
    r.temperature = 0.5;
    r.max_tokens = 77;
    const auto body = chat_request_body(r);
    CHECK(body.at("model") == "gpt-x");
    CHECK(body.at("max_tokens") == 77);
    CHECK(body.at("temperature") == 0.5);
    REQUIRE(body.at("messages").size() == 2);
    CHECK(body.at("messages")[0].at("role") == "system");
    CHECK(body.at("messages")[1].at("content") == "hello");
  }

  TEST_CASE("completion content") {
    CHECK(completion_content(R"({"choices":[{"message":{"content":"hi"}}]})") == "hi");
    CHECK_THROWS_AS(completion_content("{}"), TransportError);
    CHECK_THROWS_AS(completion_content("<html>"), TransportError);
  }

  TEST_CASE("http backend against a local server") {
    httplib::Server server;
    std::atomic<int> calls{0};
    std::string seen_auth, seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
      const int n = ++calls;
      seen_auth = req.get_header_value("Authorization");
      seen_body = req.body;
      if (n == 2) {
        res.status = 503;
        return;
      }
      if (n == 3) {
        res.status = 401;
        return;
      }
      if (n == 4) {
        res.status = 400;
        res.set_content("bad request", "text/plain");
        return;
      }
      res.set_content(R"({"model":"served","choices":[{"message":{"role":"assistant","content":"pong"}}]})",
                      "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpBackend backend({"http://127.0.0.1:" + std::to_string(port) + "/v1", "secret", std::chrono::seconds(5), 2});
    ChatRequest r;
    r.user = {Role::User, "ping"};
    r.model_id = "m";
    const auto out = backend.complete(r);
    CHECK(out.text == "pong");
    CHECK(seen_auth == "Bearer secret");
    CHECK(json::parse(seen_body).at("messages")[0].at("content") == "ping");
    CHECK_THROWS_AS(backend.complete(r), HttpStatusError);
    CHECK_THROWS_AS(backend.complete(r), AuthError);
    CHECK_THROWS_AS(backend.complete(r), BackendError);
    CHECK(backend.in_flight_peak() <= 2);

    server.stop();
    t.join();

    HttpBackend dead({"http://127.0.0.1:" + std::to_string(port) + "/v1", "", std::chrono::seconds(1), 1});
    CHECK_THROWS_AS(dead.complete(r), TransportError);
    CHECK_THROWS_AS(HttpBackend({"ftp://x", "", std::chrono::seconds(1), 1}), ConfigError);
  }
}
