#include <httplib.h>

#include "agentcrowd/backend.hpp"

namespace agentcrowd {

namespace {

class InFlightSlot {
 public:
  InFlightSlot(std::mutex& mu, std::condition_variable& cv, int& in_flight, int& peak, int cap)
      : mu_(mu), cv_(cv), in_flight_(in_flight) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < cap; });
    ++in_flight_;
    peak = std::max(peak, in_flight_);
  }
  ~InFlightSlot() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }
  InFlightSlot(const InFlightSlot&) = delete;
  InFlightSlot& operator=(const InFlightSlot&) = delete;

 private:
  std::mutex& mu_;
  std::condition_variable& cv_;
  int& in_flight_;
};

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.max_in_flight < 1) throw ConfigError("http backend: max_in_flight must be at least 1");
  const auto& ep = config_.endpoint;
  const auto scheme_end = ep.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("http backend: endpoint needs a scheme: '" + ep + "'");
  const auto scheme = ep.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("http backend: unsupported scheme '" + scheme + "'");
  const auto path_start = ep.find('/', scheme_end + 3);
  scheme_host_port_ = ep.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : ep.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

int HttpBackend::in_flight_peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

RawCompletion HttpBackend::complete(const ChatRequest& request) {
  InFlightSlot slot(mu_, cv_, in_flight_, peak_, config_.max_in_flight);

  RawCompletion out;
  out.model_id = request.model_id;
  out.request_body = chat_request_body(request);

  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(path_prefix_ + "/chat/completions", headers, out.request_body.dump(), "application/json");
  out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

  if (!res) {
    const auto err = res.error();
    const auto msg = "POST " + config_.endpoint + "/chat/completions: " + httplib::to_string(err);
    if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout) {
      throw TimeoutError(msg);
    }
    throw TransportError(msg);
  }
  out.response_body = res->body;
  if (res->status == 401 || res->status == 403) {
    throw AuthError("HTTP " + std::to_string(res->status) + " from " + config_.endpoint + "; check LLM_API_KEY");
  }
  if (res->status == 429 || res->status >= 500) {
    throw HttpStatusError(res->status, "HTTP " + std::to_string(res->status) + " from " + config_.endpoint);
  }
  if (res->status < 200 || res->status >= 300) {
    // Other client errors will not improve on retry.
    throw BackendError("HTTP " + std::to_string(res->status) + " from " + config_.endpoint + ": " + res->body);
  }
  out.text = completion_content(res->body);
  return out;
}

}  // namespace agentcrowd
