#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include "grammar_steer/lm.h"
#include "json.hpp"

namespace grammar_steer {

namespace {

nlohmann::json request_json(const LmRequest& req) {
  nlohmann::json j = {{"kind", "complete"},
                      {"prompt", req.prompt},
                      {"stop", req.stop},
                      {"max_new_text", req.max_new_text},
                      {"sampling",
                       {{"temperature", req.sampling.temperature},
                        {"presence_penalty", req.sampling.presence_penalty},
                        {"frequency_penalty", req.sampling.frequency_penalty}}}};
  j["seed"] = req.seed ? nlohmann::json(*req.seed) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json request_json(const ScoreRequest& req) {
  return {{"kind", "score"}, {"prompt", req.prompt}, {"continuation", req.continuation}};
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr)) throw Error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string CachingLm::request_key(const LmRequest& req) { return sha256_hex(request_json(req).dump()); }
std::string CachingLm::request_key(const ScoreRequest& req) { return sha256_hex(request_json(req).dump()); }

CachingLm::CachingLm(std::shared_ptr<LanguageModel> inner, const std::filesystem::path& dir)
    : inner_(std::move(inner)), file_(dir / "transcripts.jsonl") {
  std::filesystem::create_directories(dir);
  std::ifstream in(file_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      entries_[j.at("request_hash").get<std::string>()] = j.at("response").dump();
    } catch (const nlohmann::json::exception&) {
      // A torn last line from an interrupted run.
    }
  }
}

Capabilities CachingLm::capabilities() const { return inner_ ? inner_->capabilities() : Capabilities{true}; }

std::string CachingLm::name() const { return inner_ ? "cached:" + inner_->name() : "replay"; }

std::optional<std::string> CachingLm::lookup(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void CachingLm::store(const std::string& key, const std::string& request_json, const std::string& response_json) {
  std::unique_lock lock(mu_);
  if (entries_.count(key)) return;
  entries_[key] = response_json;
  nlohmann::json line = {{"request_hash", key},
                         {"request", nlohmann::json::parse(request_json)},
                         {"response", nlohmann::json::parse(response_json)}};
  std::ofstream out(file_, std::ios::app);
  out << line.dump() << '\n';
  if (!out) throw Error("cannot write " + file_.string());
}

std::string CachingLm::do_complete(const LmRequest& req) {
  const std::string key = request_key(req);
  if (auto hit = lookup(key)) {
    ++hits_;
    return nlohmann::json::parse(*hit).at("text").get<std::string>();
  }
  ++misses_;
  if (!inner_) throw ProviderError("no recorded completion for request " + key);
  LmResponse r = inner_->complete(req);
  store(key, request_json(req).dump(), nlohmann::json{{"text", r.text}}.dump());
  return r.text;
}

double CachingLm::do_score(const ScoreRequest& req) {
  const std::string key = request_key(req);
  if (auto hit = lookup(key)) {
    ++hits_;
    return nlohmann::json::parse(*hit).at("score").get<double>();
  }
  ++misses_;
  if (!inner_) throw ProviderError("no recorded score for request " + key);
  const double s = inner_->score(req);
  store(key, request_json(req).dump(), nlohmann::json{{"score", s}}.dump());
  return s;
}

}  // namespace grammar_steer
