/// @file http_endpoint.cpp
/// @brief OpenAI-compatible chat-completions client for the GTA evaluator.

#include <httplib.h>

#include <cstdlib>
#include <filesystem>

#include "gapdx/errors.h"
#include "gapdx/gta.h"
#include "gapdx/hash.h"
#include "gapdx/jsonl.h"
#include "gapdx/text_util.h"

namespace gapdx {

using json = nlohmann::json;

namespace {

std::string ImageMime(const std::filesystem::path& path) {
  const std::string ext = text::AsciiLower(path.extension().string());
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  return "image/png";
}

}  // namespace

HttpEndpoint::HttpEndpoint(HttpEndpointConfig config) : config_(std::move(config)) {
  const std::string& url = config_.url;
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint url needs a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported endpoint scheme: " + scheme);
  const std::size_t path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/v1/chat/completions" : url.substr(path_start);
  if (config_.model_name.empty()) throw ConfigError("endpoint model name is required");
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr) throw ConfigError("environment variable " + config_.api_key_env + " is not set");
    api_key_ = key;
  }
}

json HttpEndpoint::RequestBody(const EvaluatorPrompt& prompt) const {
  json content = json::array();
  content.push_back(json{{"type", "text"}, {"text", prompt.user_text}});
  for (const std::string& ref : prompt.image_refs) {
    std::string url;
    if (config_.image_mode == ImageMode::kPath) {
      url = "file://" + std::filesystem::absolute(ref).string();
    } else {
      url = "data:" + ImageMime(ref) + ";base64," + Base64Encode(ReadTextFile(ref));
    }
    content.push_back(json{{"type", "image_url"}, {"image_url", {{"url", url}}}});
  }
  return json{{"model", config_.model_name},
              {"temperature", prompt.decode.temperature()},
              {"max_tokens", prompt.decode.max_new_tokens()},
              {"messages", json::array({json{{"role", "system"}, {"content", prompt.system_text}},
                                        json{{"role", "user"}, {"content", content}}})}};
}

Completion HttpEndpoint::Complete(const EvaluatorPrompt& prompt) {
  // A missing screenshot is an input problem, not an unavailable evaluator.
  const std::string body = DumpCompact(RequestBody(prompt));

  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const auto response = client.Post(path_, headers, body, "application/json");
  if (!response) {
    throw EndpointError("request to " + scheme_host_port_ + path_ + " failed: " + httplib::to_string(response.error()));
  }
  if (response->status != 200) {
    throw EndpointError("endpoint returned HTTP " + std::to_string(response->status) + ": " +
                        response->body.substr(0, 200));
  }
  try {
    const json reply = json::parse(response->body);
    const json& choice = reply.at("choices").at(0);
    Completion completion;
    const json& message_content = choice.at("message").at("content");
    completion.text = message_content.is_string() ? message_content.get<std::string>() : "";
    completion.truncated = choice.value("finish_reason", std::string()) == "length";
    return completion;
  } catch (const json::exception& e) {
    throw EndpointError(std::string("malformed endpoint reply: ") + e.what());
  }
}

json HttpEndpoint::Describe() const {
  return json{{"kind", "http"},
              {"url", scheme_host_port_ + path_},
              {"model", config_.model_name},
              {"api_key_env", config_.api_key_env},
              {"image_mode", config_.image_mode == ImageMode::kPath ? "path" : "base64"}};
}

}  // namespace gapdx
