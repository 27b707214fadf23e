#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace ntekit {

// Yes/no oracle behind the disambiguation filter. ask() returns the raw
// reply text and throws ServiceError when the service can't be reached.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual std::string ask(const std::string& prompt) = 0;
  virtual std::string model() const = 0;
};

struct HttpJudgeConfig {
  // Full URL of a chat-completions endpoint, http or https.
  std::string endpoint;
  std::string model = "gpt-4o";
  // Bearer token; empty sends no Authorization header.
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 4;
  std::chrono::milliseconds backoff{500};
};

// POSTs {model, messages: [{role: user, content}], temperature: 0} and reads
// choices[0].message.content. Transport errors, 429 and 5xx are retried with
// exponential backoff.
class HttpJudgeClient : public JudgeClient {
 public:
  explicit HttpJudgeClient(HttpJudgeConfig config);
  std::string ask(const std::string& prompt) override;
  std::string model() const override { return config_.model; }

 private:
  HttpJudgeConfig config_;
  std::string base_;
  std::string path_;
};

class AllYesJudge : public JudgeClient {
 public:
  std::string ask(const std::string&) override { return "yes"; }
  std::string model() const override { return "stub-all-yes"; }
};

// Replies scripted per entity string (the text between `Does "` and `" in`).
// Each ask of a given prompt takes the next reply for its entity and repeats
// the last one once the list runs out; unscripted entities get "yes". The reply
// "!unreachable" raises ServiceError.
class ScriptedJudge : public JudgeClient {
 public:
  ScriptedJudge() = default;
  explicit ScriptedJudge(std::map<std::string, std::vector<std::string>> script)
      : script_(std::move(script)) {}
  ScriptedJudge(ScriptedJudge&& other) noexcept
      : script_(std::move(other.script_)), cursor_(std::move(other.cursor_)), calls_(other.calls_) {}
  // JSONL lines {"entity": "...", "replies": ["maybe", "no"]}.
  static ScriptedJudge load(const std::filesystem::path& path);

  std::string ask(const std::string& prompt) override;
  std::string model() const override { return "stub-scripted"; }
  std::size_t calls() const;

 private:
  std::map<std::string, std::vector<std::string>> script_;
  std::map<std::string, std::size_t> cursor_;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

}  // namespace ntekit
