#pragma once

#include <atomic>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "agentcrowd/backend.hpp"
#include "agentcrowd/util.hpp"

namespace testing {

// Plays back a fixed script of replies and errors, one per request, and
// keeps every request for inspection.
class ScriptedBackend final : public agentcrowd::Backend {
 public:
  struct Step {
    enum Kind { Reply, Transport, Status, Timeout, Auth } kind = Reply;
    std::string text;
    int status = 500;
  };

  static Step reply(std::string text) { return {Step::Reply, std::move(text), 0}; }
  static Step transport() { return {Step::Transport, {}, 0}; }
  static Step status(int code) { return {Step::Status, {}, code}; }
  static Step timeout() { return {Step::Timeout, {}, 0}; }
  static Step auth() { return {Step::Auth, {}, 0}; }

  explicit ScriptedBackend(std::vector<Step> script, std::string fallback = {})
      : script_(script.begin(), script.end()), fallback_(std::move(fallback)) {}

  agentcrowd::RawCompletion complete(const agentcrowd::ChatRequest& request) override {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
    Step step;
    if (!script_.empty()) {
      step = script_.front();
      script_.pop_front();
    } else {
      step = reply(fallback_);
    }
    switch (step.kind) {
      case Step::Transport: throw agentcrowd::TransportError("scripted connection reset");
      case Step::Status: throw agentcrowd::HttpStatusError(step.status, "scripted HTTP " + std::to_string(step.status));
      case Step::Timeout: throw agentcrowd::TimeoutError("scripted timeout");
      case Step::Auth: throw agentcrowd::AuthError("scripted 401");
      case Step::Reply: break;
    }
    agentcrowd::RawCompletion out;
    out.text = step.text;
    out.model_id = request.model_id;
    out.request_body = agentcrowd::chat_request_body(request);
    out.response_body = step.text;
    return out;
  }

  std::string kind() const override { return "scripted"; }

  std::vector<agentcrowd::ChatRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  mutable std::mutex mu_;
  std::deque<Step> script_;
  std::string fallback_;
  std::vector<agentcrowd::ChatRequest> requests_;
};

// Forwards to another backend and counts calls.
class CountingBackend final : public agentcrowd::Backend {
 public:
  explicit CountingBackend(std::shared_ptr<agentcrowd::Backend> inner) : inner_(std::move(inner)) {}

  agentcrowd::RawCompletion complete(const agentcrowd::ChatRequest& request) override {
    ++calls_;
    return inner_->complete(request);
  }
  std::string kind() const override { return inner_->kind(); }
  int calls() const { return calls_; }

 private:
  std::shared_ptr<agentcrowd::Backend> inner_;
  std::atomic<int> calls_{0};
};

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "agentcrowd") {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline const std::filesystem::path& source_dir() {
  static const std::filesystem::path dir = AGENTCROWD_SOURCE_DIR;
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) { return agentcrowd::read_text_file(p); }

inline void no_sleep(std::chrono::milliseconds) {}

}  // namespace testing
