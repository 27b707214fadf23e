#include "ntekit/judge_client.hpp"

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "ntekit/common.hpp"
#include "ntekit/corpus_io.hpp"

namespace ntekit {

HttpJudgeClient::HttpJudgeClient(HttpJudgeConfig config) : config_(std::move(config)) {
  const std::string& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw UsageError("judge endpoint needs a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw UsageError("unsupported judge endpoint scheme " + scheme);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  base_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::string HttpJudgeClient::ask(const std::string& prompt) {
  nlohmann::json body = {
      {"model", config_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", 0},
  };
  const std::string payload = body.dump();

  httplib::Client client(base_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_problem;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_problem = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_problem = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ServiceError("judge returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    auto reply = nlohmann::json::parse(res->body, nullptr, false);
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ServiceError("judge reply lacks choices[0].message.content");
    }
  }
  throw ServiceError("judge endpoint " + config_.endpoint + " unreachable after " +
                     std::to_string(config_.max_retries + 1) + " attempts (" + last_problem + ")");
}

ScriptedJudge ScriptedJudge::load(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::string>> script;
  LineReader lines(path);
  std::string line;
  while (lines.next(line)) {
    if (line.empty()) continue;
    auto obj = nlohmann::json::parse(line, nullptr, false);
    try {
      script[obj.at("entity").get<std::string>()] =
          obj.at("replies").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception&) {
      throw DataError(path.string() + ": line " + std::to_string(lines.line_number()) +
                      ": expected {\"entity\", \"replies\"}");
    }
  }
  return ScriptedJudge(std::move(script));
}

std::string ScriptedJudge::ask(const std::string& prompt) {
  std::string entity;
  const std::string open = "Does \"";
  const auto start = prompt.find(open);
  if (start != std::string::npos) {
    const auto from = start + open.size();
    const auto end = prompt.find("\" in \"", from);
    if (end != std::string::npos) entity = prompt.substr(from, end - from);
  }
  std::lock_guard lock(mu_);
  ++calls_;
  auto it = script_.find(entity);
  if (it == script_.end() || it->second.empty()) return "yes";
  std::size_t& pos = cursor_[prompt];
  const std::string reply = it->second[std::min(pos, it->second.size() - 1)];
  ++pos;
  if (reply == "!unreachable") throw ServiceError("scripted judge unreachable");
  return reply;
}

std::size_t ScriptedJudge::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

}  // namespace ntekit
