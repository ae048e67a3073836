#pragma once
// Remote backends: a batched HTTP embedding endpoint and a chat-completion
// endpoint. Wire formats:
//   embeddings: POST {model, inputs:[string]} -> {vectors:[[real]]}
//   chat:       POST {model, messages:[{role,content}], temperature, n}
//               -> {choices:[string]} (object forms with text/message.content
//                  are accepted too)

#include <string>

#include "stem/embedding.hpp"
#include "stem/projection.hpp"

namespace stem::http {

struct Endpoint {
  std::string base_url;  // e.g. http://127.0.0.1:8089
  std::string path;
  std::string api_key;   // sent as a bearer token when non-empty
  std::string model;
  int timeout_seconds = 60;
  int max_retries = 3;
};

class HttpEncoder : public embedding::Encoder {
 public:
  HttpEncoder(Endpoint endpoint, int dimension,
              embedding::VectorCache* cache = nullptr);

  std::vector<embedding::Vector> encode_batch(
      const std::vector<std::string>& texts) override;

 protected:
  embedding::Vector encode_impl(std::string_view text) override;

 private:
  std::vector<embedding::Vector> post_inputs(
      const std::vector<std::string>& inputs);

  Endpoint endpoint_;
  embedding::VectorCache* cache_;
};

class HttpChatClient : public projection::ChatClient {
 public:
  explicit HttpChatClient(Endpoint endpoint);

  std::vector<std::string> complete(const std::string& prompt, int n,
                                    double temperature) override;

 private:
  Endpoint endpoint_;
};

}  // namespace stem::http
