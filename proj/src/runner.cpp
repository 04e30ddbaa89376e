#include "agentcrowd/runner.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <ctime>
#include <fstream>
#include <mutex>
#include <thread>

#include "agentcrowd/util.hpp"

namespace agentcrowd {

using nlohmann::json;

std::string_view evidence_mode_name(EvidenceMode m) { return m == EvidenceMode::Selected ? "selected" : "none"; }

std::optional<EvidenceMode> evidence_mode_from_name(std::string_view name) {
  if (name == "selected") return EvidenceMode::Selected;
  if (name == "none") return EvidenceMode::None;
  return std::nullopt;
}

namespace {

constexpr std::string_view kFixedTime = "1970-01-01T00:00:00Z";

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

json choice_to_json(const EvidenceChoice& c) {
  return {{"index", c.index}, {"url", c.url}, {"title", c.title}, {"snippet", c.snippet}};
}

EvidenceChoice choice_from_json(const json& j) {
  return {j.at("index").get<std::size_t>(), j.at("url").get<std::string>(), j.at("title").get<std::string>(),
          j.at("snippet").get<std::string>()};
}

std::string prompt_digest(const ChatRequest& req) {
  std::string material = req.system ? req.system->text : std::string();
  material += "\n\x1e\n";
  material += req.user.text;
  return sha256_hex(material);
}

// One step of the plan: which pair and which phase.
struct PlannedStep {
  std::size_t pair = 0;
  Phase phase = Phase::Questionnaire;
};

class LogWriter {
 public:
  // Plain logs are appended to; gzip logs are rewritten from `existing`.
  LogWriter(const std::filesystem::path& path, const std::vector<std::string>& existing, bool append)
      : gz_(is_gzip_path(path)) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (gz_) {
      gz_file_ = gzopen(path.c_str(), "wb");
      if (gz_file_ == nullptr) throw ConfigError("cannot write run log: " + path.string());
      for (const auto& line : existing) write(line);
    } else {
      out_.open(path, append ? std::ios::binary | std::ios::app : std::ios::binary | std::ios::trunc);
      if (!out_) throw ConfigError("cannot write run log: " + path.string());
    }
  }
  ~LogWriter() {
    if (gz_file_ != nullptr) gzclose(gz_file_);
  }
  LogWriter(const LogWriter&) = delete;
  LogWriter& operator=(const LogWriter&) = delete;

  void write(const std::string& line) {
    if (gz_) {
      const std::string data = line + "\n";
      if (gzwrite(gz_file_, data.data(), static_cast<unsigned>(data.size())) != static_cast<int>(data.size())) {
        throw ConfigError("run log write failed");
      }
      gzflush(gz_file_, Z_SYNC_FLUSH);
    } else {
      out_ << line << '\n';
      out_.flush();
      if (!out_) throw ConfigError("run log write failed");
    }
  }

 private:
  bool gz_;
  gzFile gz_file_ = nullptr;
  std::ofstream out_;
};

struct Prepared {
  Assignment assignment;
  std::vector<PlannedStep> plan;
  json header;
  bool fixed_clock = false;
};

void validate_config(const RunConfig& c) {
  if (!c.corpus) throw ConfigError("run: no corpus");
  if (c.corpus->claims.empty()) throw ConfigError("run: corpus has no claims");
  if (c.crowd.empty()) throw EmptyCrowdError("run: crowd is empty");
  if (!c.backend) throw ConfigError("run: no backend");
  if (c.parallelism < 1) throw ConfigError("run: parallelism must be at least 1");
  if (c.per_claim_raters < 1) throw ConfigError("run: raters_per_claim must be at least 1");
  if (c.output.empty()) throw ConfigError("run: no output path");
  c.retry.validate();
  if (c.evidence_mode == EvidenceMode::Selected) {
    for (const auto& claim : c.corpus->claims) {
      if (claim.evidence.empty()) throw ConfigError("run: claim " + claim.id + " has no evidence candidates");
      for (const auto& page : claim.evidence) {
        if (!page.summary) {
          throw ConfigError("run: claim " + claim.id + " has pages without summaries (" + page.url +
                            "); run 'prepare' first or use evidence_mode 'none'");
        }
      }
    }
  }
}

Prepared prepare(const RunConfig& c) {
  validate_config(c);
  Prepared p;
  p.assignment = assign_claims(c.crowd, c.corpus->claims, c.per_agent_load, c.per_claim_raters,
                               derive_seed(c.seed, "assignment"));
  for (std::size_t i = 0; i < p.assignment.pairs.size(); ++i) {
    if (c.evidence_mode == EvidenceMode::Selected) p.plan.push_back({i, Phase::Evidence});
    p.plan.push_back({i, Phase::Questionnaire});
  }
  p.header = run_header(c);
  p.fixed_clock = c.deterministic_clock.value_or(c.backend->kind() == "mock");
  return p;
}

struct PairContext {
  const Claim* claim = nullptr;
  const AgentProfile* agent = nullptr;
};

class StepRunner {
 public:
  StepRunner(const RunConfig& c, bool fixed_clock, std::atomic<std::size_t>& requests)
      : c_(c), fixed_clock_(fixed_clock), requests_(requests) {}

  RunRecord evidence(const PairContext& ctx) {
    const auto& claim = *ctx.claim;
    ChatRequest base = request(ctx, Phase::Evidence, render_evidence_prompt(claim, claim.evidence));
    RunRecord rec = start(ctx, Phase::Evidence, base);
    auto result = with_retries<EvidenceChoice>(
        c_.retry,
        [&](int attempt, const std::string* corrective) {
          return parse_evidence_choice(call(base, attempt, corrective, rec), claim.evidence);
        },
        c_.sleep);
    finish(rec, result.attempts);
    if (result.value) {
      rec.evidence = *result.value;
    } else {
      rec.failure = result.failure;
      const auto& first = claim.evidence.front();
      rec.evidence = EvidenceChoice{0, first.url, first.title, first.snippet};
      rec.fallback = true;
      rec.warnings.push_back("evidence selection failed; using the first candidate");
    }
    return rec;
  }

  RunRecord questionnaire(const PairContext& ctx, const std::optional<EvidenceChoice>& choice) {
    const auto& claim = *ctx.claim;
    std::optional<std::string> summary;
    if (choice) summary = claim.evidence.at(choice->index).summary;
    ChatRequest base = request(ctx, Phase::Questionnaire, render_questionnaire_prompt(claim, summary));
    RunRecord rec = start(ctx, Phase::Questionnaire, base);
    auto result = with_retries<QuestionnaireResponse>(
        c_.retry,
        [&](int attempt, const std::string* corrective) {
          return parse_questionnaire(call(base, attempt, corrective, rec));
        },
        c_.sleep);
    finish(rec, result.attempts);
    if (result.value) {
      rec.questionnaire = *result.value;
      rec.warnings.insert(rec.warnings.end(), result.value->warnings.begin(), result.value->warnings.end());
    } else {
      rec.failure = result.failure;
    }
    return rec;
  }

 private:
  ChatRequest request(const PairContext& ctx, Phase phase, PromptText user) const {
    ChatRequest r;
    r.system = render_system_prompt(*ctx.agent);
    r.user = std::move(user);
    r.model_id = c_.model_id;
    r.temperature = c_.temperature;
    r.max_tokens = c_.max_tokens;
    r.tag = {ctx.agent->agent_id, ctx.claim->id, phase, -1};
    return r;
  }

  RunRecord start(const PairContext& ctx, Phase phase, const ChatRequest& base) {
    RunRecord rec;
    rec.agent_id = ctx.agent->agent_id;
    rec.claim_id = ctx.claim->id;
    rec.phase = phase;
    rec.model_id = c_.model_id;
    rec.prompt_digest = prompt_digest(base);
    rec.started_at = fixed_clock_ ? std::string(kFixedTime) : utc_now();
    started_ = std::chrono::steady_clock::now();
    return rec;
  }

  void finish(RunRecord& rec, int attempts) {
    rec.attempts = attempts;
    rec.finished_at = fixed_clock_ ? std::string(kFixedTime) : utc_now();
    rec.latency_ms = fixed_clock_ ? 0
                                  : std::chrono::duration_cast<std::chrono::milliseconds>(
                                        std::chrono::steady_clock::now() - started_)
                                        .count();
  }

  std::string call(const ChatRequest& base, int attempt, const std::string* corrective, RunRecord& rec) {
    ChatRequest req = base;
    if (corrective != nullptr) req.user.text += *corrective;
    rec.prompt_digest = prompt_digest(req);
    Exchange ex;
    ex.attempt = attempt;
    ex.request = chat_request_body(req);
    ++requests_;
    try {
      auto completion = c_.backend->complete(req);
      ex.response = completion.response_body;
      if (!completion.model_id.empty()) rec.model_id = completion.model_id;
      rec.reply = completion.text;
      rec.exchanges.push_back(std::move(ex));
      return completion.text;
    } catch (const std::exception& e) {
      ex.error = e.what();
      rec.exchanges.push_back(std::move(ex));
      throw;
    }
  }

  const RunConfig& c_;
  bool fixed_clock_;
  std::atomic<std::size_t>& requests_;
  std::chrono::steady_clock::time_point started_;
};

RunSummary summarize_log(const RunLog& log, std::size_t pairs, std::size_t planned) {
  RunSummary s;
  s.assigned_pairs = pairs;
  s.records = log.records.size();
  for (const auto& r : log.records) {
    if (r.phase == Phase::Evidence) ++s.evidence_records;
    if (r.phase == Phase::Questionnaire) ++s.questionnaire_records;
    if (r.fallback) ++s.fallbacks;
    if (r.failure) ++s.failures[r.failure->kind];
  }
  s.complete = s.records == planned;
  return s;
}

struct ExistingLog {
  RunLog log;
  std::vector<std::string> lines;  // valid lines, header included
};

ExistingLog read_lines(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const ParseError& e) {
    throw CorruptLogError(e.what());
  }
  ExistingLog out;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const bool last = nl == std::string::npos;
    std::string line = text.substr(pos, last ? std::string::npos : nl - pos);
    pos = last ? text.size() : nl + 1;
    if (line.empty()) {
      if (pos < text.size()) throw CorruptLogError(path.string() + ": blank line inside run log");
      continue;
    }
    auto doc = json::parse(line, nullptr, false);
    const bool trailing = pos >= text.size();
    if (doc.is_discarded() || !doc.is_object()) {
      // An interrupted write leaves at most one partial final line.
      if (trailing && header_seen) break;
      throw CorruptLogError(path.string() + ": malformed line " + std::to_string(out.lines.size() + 1));
    }
    if (!header_seen) {
      if (doc.value("type", "") != "header" || doc.value("format", "") != kRunLogFormat) {
        throw CorruptLogError(path.string() + ": first line is not a run log header");
      }
      out.log.header = std::move(doc);
      header_seen = true;
    } else {
      try {
        auto rec = record_from_json(doc);
        if (rec.seq != out.log.records.size()) throw CorruptLogError("sequence gap");
        out.log.records.push_back(std::move(rec));
      } catch (const std::exception& e) {
        if (trailing && last) break;
        throw CorruptLogError(path.string() + ": bad record on line " + std::to_string(out.lines.size() + 1) + ": " +
                              e.what());
      }
    }
    out.lines.push_back(std::move(line));
  }
  if (!header_seen) throw CorruptLogError(path.string() + ": empty run log");
  return out;
}

RunResult execute(const RunConfig& c, const Prepared& p, ExistingLog existing, bool resuming) {
  const auto wall_start = std::chrono::steady_clock::now();
  auto& log = existing.log;
  if (!resuming) {
    log.header = p.header;
    existing.lines = {p.header.dump()};
  }
  const std::size_t done = log.records.size();
  if (done > p.plan.size()) throw CorruptLogError("run log has more records than the design");
  for (std::size_t i = 0; i < done; ++i) {
    const auto& rec = log.records[i];
    const auto& step = p.plan[i];
    const auto& [agent_id, claim_id] = p.assignment.pairs[step.pair];
    if (rec.agent_id != agent_id || rec.claim_id != claim_id || rec.phase != step.phase) {
      throw CorruptLogError("run log record " + std::to_string(i) + " does not match the assignment");
    }
  }

  std::size_t target = p.plan.size();
  if (c.max_records) target = std::min(target, *c.max_records);

  // Plain logs keep their valid prefix and are appended to; partial trailing
  // bytes are cut off first.
  if (resuming && !is_gzip_path(c.output)) {
    std::string text;
    for (const auto& line : existing.lines) text += line + "\n";
    write_text_file(c.output, text);
  }
  LogWriter writer(c.output, resuming ? existing.lines : std::vector<std::string>{}, resuming);
  if (!resuming) writer.write(existing.lines.front());

  std::atomic<std::size_t> requests{0};

  if (done < target) {
    std::map<std::string, const AgentProfile*> agents;
    for (const auto& a : c.crowd) agents[a.agent_id] = &a;

    // Work items are pairs; the first may be half done.
    const std::size_t first_pair = p.plan[done].pair;
    const std::size_t last_pair = p.plan[target - 1].pair;
    std::optional<EvidenceChoice> carried;
    if (p.plan[done].phase == Phase::Questionnaire && done > 0 && p.plan[done - 1].pair == first_pair) {
      carried = log.records[done - 1].evidence;
    }
    const std::size_t n_items = last_pair - first_pair + 1;

    std::mutex mu;
    std::condition_variable ready_cv;
    std::vector<std::optional<std::vector<RunRecord>>> results(n_items);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr worker_error;

    auto work = [&] {
      StepRunner runner(c, p.fixed_clock, requests);
      for (;;) {
        const std::size_t item = next.fetch_add(1);
        if (item >= n_items || stop) return;
        const std::size_t pair = first_pair + item;
        std::vector<RunRecord> recs;
        try {
          const auto& [agent_id, claim_id] = p.assignment.pairs[pair];
          PairContext ctx{c.corpus->find(claim_id), agents.at(agent_id)};
          std::optional<EvidenceChoice> choice;
          if (item == 0 && carried) {
            choice = carried;
          } else if (c.evidence_mode == EvidenceMode::Selected) {
            recs.push_back(runner.evidence(ctx));
            choice = recs.back().evidence;
          }
          recs.push_back(runner.questionnaire(ctx, choice));
        } catch (...) {
          std::lock_guard lock(mu);
          if (!worker_error) worker_error = std::current_exception();
          stop = true;
          ready_cv.notify_all();
          return;
        }
        std::lock_guard lock(mu);
        results[item] = std::move(recs);
        ready_cv.notify_all();
      }
    };

    const int n_threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(c.parallelism), n_items));
    {
      std::vector<std::jthread> pool;
      for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);

      // Records are flushed strictly in plan order regardless of completion order.
      std::size_t written = done;
      for (std::size_t item = 0; item < n_items && written < target; ++item) {
        std::vector<RunRecord> recs;
        {
          std::unique_lock lock(mu);
          ready_cv.wait(lock, [&] { return results[item].has_value() || worker_error; });
          if (!results[item]) break;
          recs = std::move(*results[item]);
          results[item].reset();
        }
        for (auto& rec : recs) {
          if (written >= target) break;
          rec.seq = written++;
          writer.write(record_to_json(rec).dump());
          log.records.push_back(std::move(rec));
          if (c.progress) c.progress(written, p.plan.size());
        }
      }
      stop = true;
    }
    if (worker_error) std::rethrow_exception(worker_error);
  }

  RunResult out;
  out.summary = summarize_log(log, p.assignment.pairs.size(), p.plan.size());
  out.summary.requests_issued = requests;
  out.summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  out.log = std::move(log);
  return out;
}

}  // namespace

json record_to_json(const RunRecord& r) {
  json exchanges = json::array();
  for (const auto& e : r.exchanges) {
    json ex = {{"attempt", e.attempt}, {"request", e.request}, {"response", e.response}};
    if (!e.error.empty()) ex["error"] = e.error;
    exchanges.push_back(std::move(ex));
  }
  json parsed = nullptr;
  if (r.evidence) parsed = choice_to_json(*r.evidence);
  if (r.questionnaire) parsed = questionnaire_to_json(*r.questionnaire);
  return {{"type", "record"},
          {"seq", r.seq},
          {"agent_id", r.agent_id},
          {"claim_id", r.claim_id},
          {"phase", phase_name(r.phase)},
          {"prompt_digest", r.prompt_digest},
          {"model_id", r.model_id},
          {"started_at", r.started_at},
          {"finished_at", r.finished_at},
          {"latency_ms", r.latency_ms},
          {"attempts", r.attempts},
          {"exchanges", std::move(exchanges)},
          {"reply", r.reply},
          {"parsed", std::move(parsed)},
          {"failure", r.failure ? failure_to_json(*r.failure) : json(nullptr)},
          {"fallback_first_candidate", r.fallback},
          {"warnings", r.warnings}};
}

RunRecord record_from_json(const json& j) {
  if (j.value("type", "") != "record") throw CorruptLogError("not a record line");
  RunRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.agent_id = j.at("agent_id").get<std::string>();
  r.claim_id = j.at("claim_id").get<std::string>();
  const auto phase = phase_from_name(j.at("phase").get<std::string>());
  if (!phase) throw CorruptLogError("unknown phase in record");
  r.phase = *phase;
  r.prompt_digest = j.at("prompt_digest").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.started_at = j.at("started_at").get<std::string>();
  r.finished_at = j.at("finished_at").get<std::string>();
  r.latency_ms = j.at("latency_ms").get<long long>();
  r.attempts = j.at("attempts").get<int>();
  for (const auto& e : j.at("exchanges")) {
    r.exchanges.push_back(
        {e.at("attempt").get<int>(), e.at("request"), e.at("response").get<std::string>(), e.value("error", "")});
  }
  r.reply = j.at("reply").get<std::string>();
  const auto& parsed = j.at("parsed");
  if (!parsed.is_null()) {
    if (r.phase == Phase::Evidence) r.evidence = choice_from_json(parsed);
    if (r.phase == Phase::Questionnaire) r.questionnaire = questionnaire_from_json(parsed);
  }
  if (!j.at("failure").is_null()) r.failure = failure_from_json(j.at("failure"));
  r.fallback = j.at("fallback_first_candidate").get<bool>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

std::size_t RunLog::count(Phase p) const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [p](const RunRecord& r) {
    return r.phase == p;
  }));
}

RunLog read_run_log(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingInputError("run log not found: " + path.string());
  return read_lines(path).log;
}

std::size_t RunSummary::failure_count() const {
  std::size_t n = 0;
  for (const auto& [kind, count] : failures) n += count;
  return n;
}

std::size_t RunSummary::backend_failure_count() const { return failure_count() - (failures.contains("parse") ? failures.at("parse") : 0); }

json RunSummary::to_json() const {
  return {{"records", records},
          {"evidence_records", evidence_records},
          {"questionnaire_records", questionnaire_records},
          {"assigned_pairs", assigned_pairs},
          {"requests_issued", requests_issued},
          {"fallbacks", fallbacks},
          {"failures", failures},
          {"complete", complete},
          {"wall_seconds", wall_seconds}};
}

json run_header(const RunConfig& c) {
  json backend = c.backend_params;
  backend["kind"] = c.backend ? c.backend->kind() : "";
  backend["model_id"] = c.model_id;
  backend["temperature"] = c.temperature;
  backend["max_tokens"] = c.max_tokens;
  json retry = {{"max_attempts", c.retry.max_attempts},
                {"backoff_base_ms", c.retry.backoff_base.count()},
                {"backoff_multiplier", c.retry.backoff_multiplier},
                {"retry_on",
                 {{"transport", c.retry.retry_on.transport},
                  {"http_5xx", c.retry.retry_on.http_5xx},
                  {"http_429", c.retry.retry_on.http_429},
                  {"parse_failure", c.retry.retry_on.parse_failure}}}};
  json config = {{"corpus_name", c.corpus ? c.corpus->metadata.name : ""},
                 {"claims", c.corpus ? c.corpus->claims.size() : 0},
                 {"agents", c.crowd.size()},
                 {"raters_per_claim", c.per_claim_raters},
                 {"agent_load", c.per_agent_load ? json(*c.per_agent_load) : json("balanced")},
                 {"evidence_mode", evidence_mode_name(c.evidence_mode)},
                 {"seed", c.seed},
                 {"backend", std::move(backend)},
                 {"retry", std::move(retry)}};
  return {{"type", "header"},
          {"format", kRunLogFormat},
          {"config", std::move(config)},
          {"corpus_digest", c.corpus ? corpus_digest(*c.corpus) : ""},
          {"crowd_digest", crowd_digest(c.crowd)}};
}

RunResult run_simulation(const RunConfig& config) {
  const auto prepared = prepare(config);
  return execute(config, prepared, ExistingLog{}, false);
}

RunResult resume(const std::filesystem::path& log_path, RunConfig config) {
  config.output = log_path;
  const auto prepared = prepare(config);
  if (!std::filesystem::exists(log_path)) return execute(config, prepared, ExistingLog{}, false);
  auto existing = read_lines(log_path);
  const auto& h = existing.log.header;
  for (const char* key : {"corpus_digest", "crowd_digest"}) {
    if (h.value(key, "") != prepared.header.at(key).get<std::string>()) {
      throw DigestMismatchError(std::string("run log ") + key + " does not match the current inputs");
    }
  }
  if (h.at("config") != prepared.header.at("config")) {
    throw DigestMismatchError("run log configuration does not match the current configuration");
  }
  return execute(config, prepared, std::move(existing), true);
}

SummarizeResult summarize_corpus(const Corpus& corpus, Backend& backend, const SummarizeOptions& options) {
  options.retry.validate();
  SummarizeResult out;
  out.corpus = corpus;
  for (auto& claim : out.corpus.claims) {
    for (std::size_t i = 0; i < claim.evidence.size(); ++i) {
      auto& page = claim.evidence[i];
      if (page.summary) continue;
      const auto where = claim.id + " page " + std::to_string(i + 1) + " (" + page.url + ")";
      if (!page.page_text || is_blank(*page.page_text)) {
        out.warnings.push_back(where + ": no page text; left without a summary");
        continue;
      }
      ChatRequest base;
      base.user = render_summary_prompt(claim, *page.page_text, options.segment_chars);
      base.model_id = options.model_id;
      base.temperature = options.temperature;
      base.max_tokens = options.max_tokens;
      base.tag = {"", claim.id, Phase::Summary, static_cast<int>(i)};
      auto result = with_retries<std::string>(
          options.retry,
          [&](int, const std::string* corrective) {
            ChatRequest req = base;
            if (corrective != nullptr) req.user.text += *corrective;
            ++out.requests_issued;
            auto text = trim(backend.complete(req).text);
            if (text.empty()) throw EmptyTextError("empty summary");
            return text;
          },
          options.sleep);
      if (result.value) {
        page.summary = *result.value;
      } else {
        out.failures.push_back({claim.id, static_cast<int>(i), *result.failure});
        out.warnings.push_back(where + ": summarization failed: " + result.failure->reason);
      }
    }
  }
  return out;
}

}  // namespace agentcrowd
