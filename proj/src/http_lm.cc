#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <chrono>
#include <cstdlib>
#include <thread>

#include "grammar_steer/lm.h"
#include "json.hpp"

namespace grammar_steer {

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace

HttpLmConfig HttpLmConfig::from_env() {
  HttpLmConfig c;
  c.base_url = env_or("GRAMMAR_STEER_API_BASE", c.base_url);
  c.path_prefix = env_or("GRAMMAR_STEER_API_PREFIX", c.path_prefix);
  c.api_key_env = env_or("GRAMMAR_STEER_API_KEY_ENV", c.api_key_env);
  c.model = env_or("GRAMMAR_STEER_MODEL", c.model);
  const std::string lp = env_or("GRAMMAR_STEER_LOGPROBS", "");
  c.logprobs = lp == "1" || lp == "true" || lp == "yes";
  return c;
}

HttpLm::HttpLm(HttpLmConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.model.empty()) throw ProviderError("no model name configured");
}

std::string HttpLm::post(const std::string& body) const {
  httplib::Client cli(cfg_.base_url);
  cli.set_connection_timeout(cfg_.timeout_seconds, 0);
  cli.set_read_timeout(cfg_.timeout_seconds, 0);
  cli.set_write_timeout(cfg_.timeout_seconds, 0);
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string path = cfg_.path_prefix + "/completions";
  for (int attempt = 0;; ++attempt) {
    auto res = cli.Post(path, headers, body, "application/json");
    if (!res) {
      if (attempt < 2) {
        std::this_thread::sleep_for(std::chrono::milliseconds(250 << attempt));
        continue;
      }
      throw ProviderError("request to " + cfg_.base_url + path + " failed: " + httplib::to_string(res.error()));
    }
    if ((res->status == 429 || res->status >= 500) && attempt < 2) {
      std::this_thread::sleep_for(std::chrono::milliseconds(250 << attempt));
      continue;
    }
    if (res->status != 200) {
      throw ProviderError("provider returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
    }
    return res->body;
  }
}

std::string HttpLm::do_complete(const LmRequest& req) {
  nlohmann::json body = {{"model", cfg_.model},
                         {"prompt", req.prompt},
                         {"max_tokens", req.max_new_text},
                         {"temperature", req.sampling.temperature},
                         {"presence_penalty", req.sampling.presence_penalty},
                         {"frequency_penalty", req.sampling.frequency_penalty}};
  if (!req.stop.empty()) {
    // Providers accept at most four; the rest are applied locally.
    std::vector<std::string> stop(req.stop.begin(), req.stop.begin() + std::min<std::size_t>(4, req.stop.size()));
    body["stop"] = stop;
  }
  if (req.seed) body["seed"] = *req.seed;
  try {
    auto j = nlohmann::json::parse(post(body.dump()));
    return j.at("choices").at(0).at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed completion response: ") + e.what());
  }
}

double HttpLm::do_score(const ScoreRequest& req) {
  nlohmann::json body = {{"model", cfg_.model},
                         {"prompt", req.prompt + req.continuation},
                         {"max_tokens", 0},
                         {"echo", true},
                         {"logprobs", 0},
                         {"temperature", 0.0}};
  try {
    auto j = nlohmann::json::parse(post(body.dump()));
    const auto& lp = j.at("choices").at(0).at("logprobs");
    const auto& offsets = lp.at("text_offset");
    const auto& values = lp.at("token_logprobs");
    double sum = 0;
    int n = 0;
    for (std::size_t i = 0; i < offsets.size() && i < values.size(); ++i) {
      if (offsets[i].get<std::size_t>() < req.prompt.size() || values[i].is_null()) continue;
      sum += values[i].get<double>();
      ++n;
    }
    if (n == 0) throw ProviderError("provider returned no log-probabilities for the continuation");
    return sum / n;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed scoring response: ") + e.what());
  }
}

}  // namespace grammar_steer
