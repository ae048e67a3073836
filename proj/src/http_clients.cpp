#include "stem/http_clients.hpp"

#include "httplib.h"
#include "json.hpp"

namespace stem::http {

using nlohmann::json;

namespace {

json post_json(const Endpoint& ep, const json& body) {
  httplib::Client client(ep.base_url);
  client.set_connection_timeout(ep.timeout_seconds);
  client.set_read_timeout(ep.timeout_seconds);
  httplib::Headers headers;
  if (!ep.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + ep.api_key);
  }
  std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, ep.max_retries); ++attempt) {
    auto res = client.Post(ep.path, headers, payload, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      json parsed = json::parse(res->body, nullptr, false);
      if (!parsed.is_discarded()) return parsed;
      last_error = "response is not valid JSON";
    } else if (res) {
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
    }
  }
  throw Error(Error::Kind::transport,
              "POST " + ep.base_url + ep.path + " failed after " +
                  std::to_string(std::max(1, ep.max_retries)) +
                  " attempts: " + last_error);
}

}  // namespace

HttpEncoder::HttpEncoder(Endpoint endpoint, int dimension,
                         embedding::VectorCache* cache)
    : Encoder("http:" + endpoint.model, dimension),
      endpoint_(std::move(endpoint)),
      cache_(cache) {}

std::vector<embedding::Vector> HttpEncoder::post_inputs(
    const std::vector<std::string>& inputs) {
  json body;
  body["model"] = endpoint_.model;
  body["inputs"] = inputs;
  json response = post_json(endpoint_, body);
  if (!response.contains("vectors") || !response["vectors"].is_array() ||
      response["vectors"].size() != inputs.size()) {
    throw Error(Error::Kind::transport,
                "embedding response missing a vectors array of size " +
                    std::to_string(inputs.size()));
  }
  std::vector<embedding::Vector> out;
  out.reserve(inputs.size());
  for (const auto& arr : response["vectors"]) {
    embedding::Vector v = arr.get<embedding::Vector>();
    if (static_cast<int>(v.size()) != dimension()) {
      throw Error(Error::Kind::config,
                  "embedding service returned dimension " +
                      std::to_string(v.size()) + ", expected " +
                      std::to_string(dimension()));
    }
    out.push_back(std::move(v));
  }
  return out;
}

embedding::Vector HttpEncoder::encode_impl(std::string_view text) {
  if (cache_) {
    if (auto hit = cache_->get(name(), text)) return *hit;
  }
  auto vectors = post_inputs({std::string(text)});
  if (cache_) cache_->put(name(), text, vectors[0]);
  return vectors[0];
}

std::vector<embedding::Vector> HttpEncoder::encode_batch(
    const std::vector<std::string>& texts) {
  std::vector<embedding::Vector> out(texts.size());
  std::vector<std::string> misses;
  std::vector<size_t> miss_slots;
  for (size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) {
      throw Error(Error::Kind::argument, "cannot encode empty text");
    }
    if (cache_) {
      if (auto hit = cache_->get(name(), texts[i])) {
        out[i] = std::move(*hit);
        continue;
      }
    }
    misses.push_back(texts[i]);
    miss_slots.push_back(i);
  }
  if (!misses.empty()) {
    auto fetched = post_inputs(misses);
    for (size_t k = 0; k < misses.size(); ++k) {
      if (cache_) cache_->put(name(), misses[k], fetched[k]);
      out[miss_slots[k]] = std::move(fetched[k]);
    }
  }
  return out;
}

HttpChatClient::HttpChatClient(Endpoint endpoint)
    : endpoint_(std::move(endpoint)) {}

std::vector<std::string> HttpChatClient::complete(const std::string& prompt,
                                                  int n, double temperature) {
  json body;
  body["model"] = endpoint_.model;
  body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = temperature;
  body["n"] = n;
  json response = post_json(endpoint_, body);
  if (!response.contains("choices") || !response["choices"].is_array()) {
    throw Error(Error::Kind::transport, "chat response missing choices array");
  }
  std::vector<std::string> out;
  for (const auto& choice : response["choices"]) {
    if (choice.is_string()) {
      out.push_back(choice.get<std::string>());
    } else if (choice.contains("text")) {
      out.push_back(choice["text"].get<std::string>());
    } else if (choice.contains("message") &&
               choice["message"].contains("content")) {
      out.push_back(choice["message"]["content"].get<std::string>());
    }
  }
  if (out.empty()) {
    throw Error(Error::Kind::transport, "chat response held no completions");
  }
  return out;
}

}  // namespace stem::http
