#include "agentcrowd/backend.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "agentcrowd/util.hpp"

namespace agentcrowd {

using nlohmann::json;

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::Evidence: return "evidence";
    case Phase::Questionnaire: return "questionnaire";
    case Phase::Summary: return "summary";
  }
  return "?";
}

std::optional<Phase> phase_from_name(std::string_view name) {
  if (name == "evidence") return Phase::Evidence;
  if (name == "questionnaire") return Phase::Questionnaire;
  if (name == "summary") return Phase::Summary;
  return std::nullopt;
}

std::string RequestTag::str() const {
  if (phase == Phase::Summary) return "summary:" + claim_id + ":" + std::to_string(page);
  return agent_id + ":" + claim_id + ":" + std::string(phase_name(phase));
}

json chat_request_body(const ChatRequest& request) {
  json messages = json::array();
  if (request.system) messages.push_back({{"role", "system"}, {"content", request.system->text}});
  messages.push_back({{"role", "user"}, {"content", request.user.text}});
  return {{"model", request.model_id},
          {"messages", std::move(messages)},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}

std::chrono::milliseconds RetryPolicy::backoff_before(int next_attempt) const {
  const double factor = std::pow(backoff_multiplier, std::max(0, next_attempt - 2));
  return std::chrono::milliseconds(static_cast<long long>(std::llround(backoff_base.count() * factor)));
}

void RetryPolicy::validate() const {
  if (max_attempts < 1) throw ConfigError("retry policy: max_attempts must be at least 1");
  if (backoff_base.count() <= 0) throw ConfigError("retry policy: backoff base must be positive");
  if (!(backoff_multiplier >= 1.0)) throw ConfigError("retry policy: backoff multiplier must be >= 1");
}

json failure_to_json(const FailureRecord& f) {
  return {{"kind", f.kind}, {"reason", f.reason}, {"attempts", f.attempts}};
}

FailureRecord failure_from_json(const json& j) {
  return {j.at("kind").get<std::string>(), j.at("reason").get<std::string>(), j.at("attempts").get<int>()};
}

std::string corrective_instruction(std::string_view violated_rule) {
  return "\n\nYour previous reply could not be accepted: " + std::string(violated_rule) +
         ". Reply again with only a valid JSON object containing exactly the requested fields.";
}

RawCompletion complete_with_policy(Backend& backend, const ChatRequest& request, const RetryPolicy& policy,
                                   const Sleeper& sleep) {
  for (int attempt = 1;; ++attempt) {
    bool retryable = false;
    try {
      auto out = backend.complete(request);
      out.attempt = attempt;
      return out;
    } catch (const AuthError&) {
      throw;
    } catch (const HttpStatusError& e) {
      retryable = e.status() == 429 ? policy.retry_on.http_429 : policy.retry_on.http_5xx;
      if (!retryable || attempt >= policy.max_attempts) throw;
    } catch (const TransportError&) {
      if (!policy.retry_on.transport || attempt >= policy.max_attempts) throw;
    } catch (const TimeoutError&) {
      if (!policy.retry_on.transport || attempt >= policy.max_attempts) throw;
    }
    sleep(policy.backoff_before(attempt + 1));
  }
}

void OracleConfig::validate() const {
  if (!(truthfulness_noise >= 0.0 && truthfulness_noise <= 1.0)) {
    throw ConfigError("oracle: truthfulness_noise must lie in [0, 1]");
  }
  for (double m : dimension_bias) {
    if (!(m >= -2.0 && m <= 2.0)) throw ConfigError("oracle: dimension means must lie in [-2, 2]");
  }
  if (!(dimension_spread >= 0.0)) throw ConfigError("oracle: dimension_spread must be nonnegative");
  if (!(wrap_rate >= 0.0 && wrap_rate <= 1.0)) throw ConfigError("oracle: wrap_rate must lie in [0, 1]");
}

json oracle_to_json(const OracleConfig& c) {
  return {{"seed", c.seed},
          {"truthfulness_noise", c.truthfulness_noise},
          {"dimension_bias", c.dimension_bias},
          {"dimension_spread", c.dimension_spread},
          {"truth_coupling", c.truth_coupling},
          {"evidence_rule", c.evidence_rule == EvidenceRule::First ? "first" : "seeded-uniform"},
          {"wrap_rate", c.wrap_rate}};
}

OracleConfig oracle_from_json(const json& j) {
  OracleConfig c;
  if (!j.is_object()) throw ConfigError("oracle: expected an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "seed") {
      c.seed = v.get<std::uint64_t>();
    } else if (key == "truthfulness_noise") {
      c.truthfulness_noise = v.get<double>();
    } else if (key == "dimension_bias") {
      if (!v.is_array() || v.size() != kDimensionCount) throw ConfigError("oracle: dimension_bias needs 7 numbers");
      for (std::size_t i = 0; i < kDimensionCount; ++i) c.dimension_bias[i] = v[i].get<double>();
    } else if (key == "dimension_spread") {
      c.dimension_spread = v.get<double>();
    } else if (key == "truth_coupling") {
      c.truth_coupling = v.get<double>();
    } else if (key == "evidence_rule") {
      const auto rule = v.get<std::string>();
      if (rule == "first") {
        c.evidence_rule = EvidenceRule::First;
      } else if (rule == "seeded-uniform") {
        c.evidence_rule = EvidenceRule::SeededUniform;
      } else {
        throw ConfigError("oracle: evidence_rule must be 'first' or 'seeded-uniform'");
      }
    } else if (key == "wrap_rate") {
      c.wrap_rate = v.get<double>();
    } else {
      throw ConfigError("oracle: unexpected field '" + key + "'");
    }
  }
  c.validate();
  return c;
}

MockBackend::MockBackend(std::shared_ptr<const Corpus> corpus, OracleConfig config, std::string model_id)
    : corpus_(std::move(corpus)), config_(config), model_id_(std::move(model_id)) {
  if (!corpus_) throw ConfigError("mock backend needs a corpus");
  config_.validate();
}

RawCompletion MockBackend::complete(const ChatRequest& request) {
  const Claim* claim = corpus_->find(request.tag.claim_id);
  if (claim == nullptr) throw ConfigError("mock backend: unknown claim '" + request.tag.claim_id + "'");

  std::string text;
  switch (request.tag.phase) {
    case Phase::Evidence: text = evidence_reply(*claim, request.tag); break;
    case Phase::Questionnaire: text = questionnaire_reply(*claim, request.tag); break;
    case Phase::Summary: text = summary_reply(*claim, request.tag); break;
  }
  if (request.tag.phase != Phase::Summary) text = wrap(std::move(text), request.tag);

  RawCompletion out;
  out.text = text;
  out.model_id = model_id_;
  out.request_body = chat_request_body(request);
  json response = {{"id", "mock-" + sha256_hex(request.tag.str()).substr(0, 16)},
                   {"object", "chat.completion"},
                   {"model", model_id_},
                   {"choices", json::array({{{"index", 0},
                                             {"message", {{"role", "assistant"}, {"content", text}}},
                                             {"finish_reason", "stop"}}})}};
  out.response_body = response.dump();
  return out;
}

std::string MockBackend::evidence_reply(const Claim& claim, const RequestTag& tag) const {
  if (claim.evidence.empty()) return "I have no sources to choose from.";
  std::size_t index = 0;
  if (config_.evidence_rule == EvidenceRule::SeededUniform) {
    Rng rng(derive_seed(config_.seed, tag.str() + "/evidence"));
    index = static_cast<std::size_t>(rng.below(claim.evidence.size()));
  }
  const auto& page = claim.evidence[index];
  return json{{"url", page.url}, {"title", page.title}, {"snippet", page.snippet}}.dump();
}

std::string MockBackend::questionnaire_reply(const Claim& claim, const RequestTag& tag) const {
  Rng rng(derive_seed(config_.seed, tag.str()));
  int truth = to_int(claim.ground_truth);
  if (rng.uniform() < config_.truthfulness_noise) truth = static_cast<int>(rng.below(kTruthLevelCount));

  QuestionnaireResponse r;
  const double shift = config_.truth_coupling * (truth - 2.5) / 2.5;
  for (auto d : kAllDimensions) {
    const double mean = config_.dimension_bias[static_cast<std::size_t>(d)] + shift;
    const double draw = mean + rng.triangular(config_.dimension_spread);
    const int value = static_cast<int>(std::clamp(std::round(draw), -2.0, 2.0));
    r[d].value = value;
    r[d].meaning = std::string(agreement_meaning(value));
    r[d].reason = "Oracle rating for " + std::string(dimension_label(d)) + " (" + tag.str() + ").";
  }
  r.truthfulness = static_cast<TruthLevel>(truth);
  r.truthfulness_meaning = std::string(truth_level_name(r.truthfulness));
  r.truthfulness_reason = "Oracle verdict for " + tag.str() + ".";
  return questionnaire_to_json(r).dump();
}

std::string MockBackend::summary_reply(const Claim& claim, const RequestTag& tag) const {
  if (tag.page < 0 || static_cast<std::size_t>(tag.page) >= claim.evidence.size()) {
    throw ConfigError("mock backend: claim " + claim.id + " has no page " + std::to_string(tag.page));
  }
  const auto& page = claim.evidence[static_cast<std::size_t>(tag.page)];
  std::istringstream words(page.page_text.value_or(page.snippet));
  std::string word, out = "Summary of " + page.url + ":";
  for (int n = 0; n < 40 && (words >> word); ++n) out += " " + word;
  return out;
}

std::string MockBackend::wrap(std::string reply, const RequestTag& tag) const {
  if (config_.wrap_rate <= 0.0) return reply;
  Rng rng(derive_seed(config_.seed, tag.str() + "/wrap"));
  if (rng.uniform() >= config_.wrap_rate) return reply;
  if (rng.below(2) == 0) return "```json\n" + reply + "\n```";
  return "Here is my answer:\n" + reply + "\nThank you.";
}

std::string completion_content(std::string_view response_body) {
  auto doc = json::parse(response_body, nullptr, false);
  if (doc.is_discarded()) throw TransportError("response body is not JSON");
  try {
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
  } catch (const json::exception&) {
  }
  throw TransportError("response has no choices[0].message.content");
}

}  // namespace agentcrowd
